#pragma once

#include "mqttsec/security.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

namespace mqttsec::transport {

class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ListenerKind : std::uint8_t { Plain, Tls };

enum class TlsVersion : std::uint8_t { V1_2, V1_3 };

struct ListenerConfig {
    std::string name;
    ListenerKind kind = ListenerKind::Plain;
    std::string bind_address = "0.0.0.0";
    std::uint16_t port = 1883;
    // TLS only:
    std::string cert_path;
    std::string key_path;
    TlsVersion min_tls_version = TlsVersion::V1_2;
    std::string cipher_list;                // empty → library default
    bool require_client_cert = false;
};

struct ConnectionInfo {
    security::SecurityLevel security_level = security::SecurityLevel::NonSecured;
    std::string peer_address;
    std::string tls_version; // empty on plain connections
    std::string tls_cipher;
    std::chrono::steady_clock::time_point accepted_at;
};

// security_level follows the transport alone; a failed handshake never
// produces a classification because such connections are dropped first.
security::SecurityLevel classify(ListenerKind kind, bool handshake_ok);

// Full-duplex byte stream; read_some and write_all may be called from two
// different threads (one reader, one writer).
class Stream {
public:
    virtual ~Stream() = default;

    // >0: bytes read; 0: timeout, try again; -1: closed or broken.
    virtual int read_some(std::uint8_t* buf, std::size_t cap, int timeout_ms) = 0;

    virtual bool write_all(const std::uint8_t* data, std::size_t n) = 0;

    // Unblocks any reader/writer and makes further I/O fail.
    virtual void shutdown() = 0;
};

struct Accepted {
    std::unique_ptr<Stream> stream;
    ConnectionInfo info;
};

class TlsServerContext;

// One bound socket. For TLS listeners accept() performs the handshake on the
// calling thread; run it off the accept loop so listeners stay independent.
class Listener {
public:
    explicit Listener(ListenerConfig cfg); // binds and listens; throws TransportError
    ~Listener();

    Listener(const Listener&) = delete;
    Listener& operator=(const Listener&) = delete;

    const ListenerConfig& config() const { return cfg_; }
    std::uint16_t bound_port() const { return bound_port_; }

    // Blocks until a connection arrives or close() is called (then nullopt).
    // The returned fd still needs finish_accept() to become a Stream.
    std::optional<int> accept_fd();

    // Completes the connection: TLS handshake when applicable. Returns an
    // empty stream on handshake failure (fd closed internally).
    std::optional<Accepted> finish_accept(int fd, std::string peer);

    static std::string peer_name(int fd);

    void close();

private:
    ListenerConfig cfg_;
    int fd_ = -1;
    std::uint16_t bound_port_ = 0;
    std::atomic<bool> closed_{false};
    std::shared_ptr<TlsServerContext> tls_;
};

// Client-side connector used by the CLI tools and tests.
struct ConnectOptions {
    std::string host = "127.0.0.1";
    std::uint16_t port = 1883;
    bool tls = false;
    int timeout_ms = 10000;
    bool verify_peer = false; // self-signed test certs by default
};

struct ClientConnection {
    std::unique_ptr<Stream> stream;
    std::string tls_version; // empty on plain connections
    std::string tls_cipher;
};

ClientConnection connect_stream(const ConnectOptions& opts);

// P-256 self-signed certificate for hermetic test setups.
void generate_self_signed_cert(const std::string& cert_path, const std::string& key_path,
                               const std::string& common_name, int valid_days = 365);

} // namespace mqttsec::transport
