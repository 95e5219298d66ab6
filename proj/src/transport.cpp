#include "mqttsec/transport.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <openssl/err.h>
#include <openssl/evp.h>
#include <openssl/pem.h>
#include <openssl/rand.h>
#include <openssl/ssl.h>
#include <openssl/x509.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <mutex>

namespace mqttsec::transport {

namespace {

std::string ssl_error_text(const char* what)
{
    char buf[256];
    ERR_error_string_n(ERR_get_error(), buf, sizeof buf);
    return std::string(what) + ": " + buf;
}

void set_nonblocking(int fd)
{
    int flags = fcntl(fd, F_GETFL, 0);
    fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

void set_nodelay(int fd)
{
    int one = 1;
    setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

int poll_one(int fd, short events, int timeout_ms)
{
    pollfd p{fd, events, 0};
    return ::poll(&p, 1, timeout_ms);
}

// How long write_all keeps retrying with zero bytes moved before giving up.
constexpr auto kWriteStall = std::chrono::seconds(5);

class PlainStream final : public Stream {
public:
    explicit PlainStream(int fd) : fd_(fd) {}

    ~PlainStream() override
    {
        if (fd_ >= 0)
            ::close(fd_);
    }

    int read_some(std::uint8_t* buf, std::size_t cap, int timeout_ms) override
    {
        if (closed_.load(std::memory_order_relaxed))
            return -1;
        int r = poll_one(fd_, POLLIN, timeout_ms);
        if (r == 0)
            return 0;
        if (r < 0)
            return errno == EINTR ? 0 : -1;
        ssize_t n = ::recv(fd_, buf, cap, 0);
        if (n > 0)
            return static_cast<int>(n);
        if (n == 0)
            return -1; // orderly close
        if (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR)
            return 0;
        return -1;
    }

    bool write_all(const std::uint8_t* data, std::size_t n) override
    {
        std::size_t off = 0;
        auto last_progress = std::chrono::steady_clock::now();
        while (off < n)
        {
            if (closed_.load(std::memory_order_relaxed))
                return false;
            ssize_t w = ::send(fd_, data + off, n - off, MSG_NOSIGNAL);
            if (w > 0)
            {
                off += static_cast<std::size_t>(w);
                last_progress = std::chrono::steady_clock::now();
                continue;
            }
            if (w < 0 && (errno == EAGAIN || errno == EWOULDBLOCK))
            {
                // A peer that stops draining must not pin this thread forever.
                if (std::chrono::steady_clock::now() - last_progress > kWriteStall)
                    return false;
                poll_one(fd_, POLLOUT, 100);
                continue;
            }
            if (w < 0 && errno == EINTR)
                continue;
            return false;
        }
        return true;
    }

    void shutdown() override
    {
        closed_.store(true, std::memory_order_relaxed);
        ::shutdown(fd_, SHUT_RDWR);
    }

private:
    int fd_;
    std::atomic<bool> closed_{false};
};

struct CtxHolder {
    SSL_CTX* ctx = nullptr;
    ~CtxHolder()
    {
        if (ctx)
            SSL_CTX_free(ctx);
    }
};

// Reader and writer run on different threads but OpenSSL's SSL object is not
// thread-safe, so every SSL_* call is serialized; reads poll outside the lock
// so a blocked reader never starves the writer.
class TlsStream final : public Stream {
public:
    TlsStream(int fd, SSL* ssl, std::shared_ptr<CtxHolder> ctx)
        : fd_(fd), ssl_(ssl), ctx_(std::move(ctx))
    {
    }

    ~TlsStream() override
    {
        SSL_free(ssl_);
        if (fd_ >= 0)
            ::close(fd_);
    }

    int read_some(std::uint8_t* buf, std::size_t cap, int timeout_ms) override
    {
        if (closed_.load(std::memory_order_relaxed))
            return -1;

        bool buffered;
        {
            std::lock_guard lock(mu_);
            buffered = SSL_pending(ssl_) > 0;
        }
        if (!buffered)
        {
            int r = poll_one(fd_, POLLIN, timeout_ms);
            if (r == 0)
                return 0;
            if (r < 0)
                return errno == EINTR ? 0 : -1;
        }

        std::lock_guard lock(mu_);
        int n = SSL_read(ssl_, buf, static_cast<int>(cap));
        if (n > 0)
            return n;
        switch (SSL_get_error(ssl_, n))
        {
        case SSL_ERROR_WANT_READ:
        case SSL_ERROR_WANT_WRITE:
            return 0; // record not complete yet
        default:
            return -1;
        }
    }

    bool write_all(const std::uint8_t* data, std::size_t n) override
    {
        std::size_t off = 0;
        auto last_progress = std::chrono::steady_clock::now();
        while (off < n)
        {
            if (closed_.load(std::memory_order_relaxed))
                return false;
            int w;
            int err;
            {
                std::lock_guard lock(mu_);
                w = SSL_write(ssl_, data + off, static_cast<int>(n - off));
                err = w > 0 ? SSL_ERROR_NONE : SSL_get_error(ssl_, w);
            }
            if (w > 0)
            {
                off += static_cast<std::size_t>(w);
                last_progress = std::chrono::steady_clock::now();
                continue;
            }
            if (err == SSL_ERROR_WANT_WRITE || err == SSL_ERROR_WANT_READ)
            {
                if (std::chrono::steady_clock::now() - last_progress > kWriteStall)
                    return false;
                poll_one(fd_, err == SSL_ERROR_WANT_WRITE ? POLLOUT : POLLIN, 100);
                continue;
            }
            return false;
        }
        return true;
    }

    void shutdown() override
    {
        closed_.store(true, std::memory_order_relaxed);
        ::shutdown(fd_, SHUT_RDWR);
    }

private:
    int fd_;
    SSL* ssl_;
    std::shared_ptr<CtxHolder> ctx_;
    std::mutex mu_;
    std::atomic<bool> closed_{false};
};

// Drives a non-blocking handshake (SSL_accept or SSL_connect) to completion.
bool run_handshake(SSL* ssl, int fd, bool accepting, int timeout_ms)
{
    auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    for (;;)
    {
        int r = accepting ? SSL_accept(ssl) : SSL_connect(ssl);
        if (r == 1)
            return true;
        int err = SSL_get_error(ssl, r);
        if (err != SSL_ERROR_WANT_READ && err != SSL_ERROR_WANT_WRITE)
            return false;
        auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                        deadline - std::chrono::steady_clock::now())
                        .count();
        if (left <= 0)
            return false;
        poll_one(fd, err == SSL_ERROR_WANT_READ ? POLLIN : POLLOUT,
                 static_cast<int>(std::min<long long>(left, 250)));
    }
}

int min_proto(TlsVersion v)
{
    return v == TlsVersion::V1_3 ? TLS1_3_VERSION : TLS1_2_VERSION;
}

} // namespace

security::SecurityLevel classify(ListenerKind kind, bool handshake_ok)
{
    if (kind == ListenerKind::Tls && !handshake_ok)
        throw std::logic_error("failed handshakes are dropped before classification");
    return kind == ListenerKind::Tls ? security::SecurityLevel::Secured
                                     : security::SecurityLevel::NonSecured;
}

class TlsServerContext {
public:
    explicit TlsServerContext(const ListenerConfig& cfg) : holder_(std::make_shared<CtxHolder>())
    {
        holder_->ctx = SSL_CTX_new(TLS_server_method());
        if (!holder_->ctx)
            throw TransportError(ssl_error_text("SSL_CTX_new"));
        SSL_CTX* ctx = holder_->ctx;

        SSL_CTX_set_min_proto_version(ctx, min_proto(cfg.min_tls_version));
        if (SSL_CTX_use_certificate_chain_file(ctx, cfg.cert_path.c_str()) != 1)
            throw TransportError(ssl_error_text(("loading " + cfg.cert_path).c_str()));
        if (SSL_CTX_use_PrivateKey_file(ctx, cfg.key_path.c_str(), SSL_FILETYPE_PEM) != 1)
            throw TransportError(ssl_error_text(("loading " + cfg.key_path).c_str()));
        if (SSL_CTX_check_private_key(ctx) != 1)
            throw TransportError("certificate and key do not match");
        if (!cfg.cipher_list.empty() &&
            SSL_CTX_set_cipher_list(ctx, cfg.cipher_list.c_str()) != 1)
            throw TransportError(ssl_error_text("cipher list"));
        if (cfg.require_client_cert)
            SSL_CTX_set_verify(ctx, SSL_VERIFY_PEER | SSL_VERIFY_FAIL_IF_NO_PEER_CERT,
                               nullptr);
    }

    std::shared_ptr<CtxHolder> holder() const { return holder_; }

private:
    std::shared_ptr<CtxHolder> holder_;
};

Listener::Listener(ListenerConfig cfg) : cfg_(std::move(cfg))
{
    if (cfg_.kind == ListenerKind::Tls)
        tls_ = std::make_shared<TlsServerContext>(cfg_);

    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    std::string port = std::to_string(cfg_.port);
    int rc = getaddrinfo(cfg_.bind_address.c_str(), port.c_str(), &hints, &res);
    if (rc != 0)
        throw TransportError("resolve " + cfg_.bind_address + ": " + gai_strerror(rc));

    int fd = -1;
    std::string err = "no usable address";
    for (addrinfo* ai = res; ai; ai = ai->ai_next)
    {
        fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0)
            continue;
        int one = 1;
        setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd, 128) == 0)
            break;
        err = std::strerror(errno);
        ::close(fd);
        fd = -1;
    }
    freeaddrinfo(res);
    if (fd < 0)
        throw TransportError("bind " + cfg_.bind_address + ":" + port + ": " + err);

    fd_ = fd;
    sockaddr_storage ss{};
    socklen_t slen = sizeof ss;
    if (getsockname(fd_, reinterpret_cast<sockaddr*>(&ss), &slen) == 0)
    {
        if (ss.ss_family == AF_INET)
            bound_port_ = ntohs(reinterpret_cast<sockaddr_in*>(&ss)->sin_port);
        else if (ss.ss_family == AF_INET6)
            bound_port_ = ntohs(reinterpret_cast<sockaddr_in6*>(&ss)->sin6_port);
    }
}

Listener::~Listener()
{
    if (fd_ >= 0)
        ::close(fd_);
}

std::optional<int> Listener::accept_fd()
{
    for (;;)
    {
        if (closed_.load(std::memory_order_relaxed))
            return std::nullopt;
        int r = poll_one(fd_, POLLIN, 250);
        if (r <= 0)
            continue;
        int c = ::accept(fd_, nullptr, nullptr);
        if (c >= 0)
            return c;
        if (errno == EINTR || errno == EAGAIN || errno == ECONNABORTED)
            continue;
        return std::nullopt;
    }
}

std::string Listener::peer_name(int fd)
{
    sockaddr_storage ss{};
    socklen_t slen = sizeof ss;
    if (getpeername(fd, reinterpret_cast<sockaddr*>(&ss), &slen) != 0)
        return "?";
    char host[INET6_ADDRSTRLEN] = {};
    std::uint16_t port = 0;
    if (ss.ss_family == AF_INET)
    {
        auto* a = reinterpret_cast<sockaddr_in*>(&ss);
        inet_ntop(AF_INET, &a->sin_addr, host, sizeof host);
        port = ntohs(a->sin_port);
    }
    else if (ss.ss_family == AF_INET6)
    {
        auto* a = reinterpret_cast<sockaddr_in6*>(&ss);
        inet_ntop(AF_INET6, &a->sin6_addr, host, sizeof host);
        port = ntohs(a->sin6_port);
    }
    return std::string(host) + ":" + std::to_string(port);
}

std::optional<Accepted> Listener::finish_accept(int fd, std::string peer)
{
    set_nonblocking(fd);
    set_nodelay(fd);

    ConnectionInfo info;
    info.peer_address = std::move(peer);
    info.accepted_at = std::chrono::steady_clock::now();

    if (cfg_.kind == ListenerKind::Plain)
    {
        info.security_level = classify(ListenerKind::Plain, true);
        return Accepted{std::make_unique<PlainStream>(fd), std::move(info)};
    }

    SSL* ssl = SSL_new(tls_->holder()->ctx);
    if (!ssl)
    {
        ::close(fd);
        return std::nullopt;
    }
    SSL_set_fd(ssl, fd);
    if (!run_handshake(ssl, fd, true, 10000))
    {
        SSL_free(ssl);
        ::close(fd);
        return std::nullopt;
    }

    info.security_level = classify(ListenerKind::Tls, true);
    info.tls_version = SSL_get_version(ssl);
    info.tls_cipher = SSL_get_cipher_name(ssl);
    return Accepted{std::make_unique<TlsStream>(fd, ssl, tls_->holder()), std::move(info)};
}

void Listener::close()
{
    closed_.store(true, std::memory_order_relaxed);
    if (fd_ >= 0)
        ::shutdown(fd_, SHUT_RDWR);
}

ClientConnection connect_stream(const ConnectOptions& opts)
{
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    std::string port = std::to_string(opts.port);
    int rc = getaddrinfo(opts.host.c_str(), port.c_str(), &hints, &res);
    if (rc != 0)
        throw TransportError("resolve " + opts.host + ": " + gai_strerror(rc));

    int fd = -1;
    std::string err = "no usable address";
    for (addrinfo* ai = res; ai; ai = ai->ai_next)
    {
        fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0)
            continue;
        set_nonblocking(fd);
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0)
            break;
        if (errno == EINPROGRESS)
        {
            if (poll_one(fd, POLLOUT, opts.timeout_ms) > 0)
            {
                int soerr = 0;
                socklen_t len = sizeof soerr;
                getsockopt(fd, SOL_SOCKET, SO_ERROR, &soerr, &len);
                if (soerr == 0)
                    break;
                err = std::strerror(soerr);
            }
            else
                err = "connect timeout";
        }
        else
            err = std::strerror(errno);
        ::close(fd);
        fd = -1;
    }
    freeaddrinfo(res);
    if (fd < 0)
        throw TransportError("connect " + opts.host + ":" + port + ": " + err);

    set_nodelay(fd);

    if (!opts.tls)
        return {std::make_unique<PlainStream>(fd), "", ""};

    auto holder = std::make_shared<CtxHolder>();
    holder->ctx = SSL_CTX_new(TLS_client_method());
    if (!holder->ctx)
    {
        ::close(fd);
        throw TransportError(ssl_error_text("SSL_CTX_new"));
    }
    SSL_CTX_set_min_proto_version(holder->ctx, TLS1_2_VERSION);
    SSL_CTX_set_verify(holder->ctx, opts.verify_peer ? SSL_VERIFY_PEER : SSL_VERIFY_NONE,
                       nullptr);
    if (opts.verify_peer)
        SSL_CTX_set_default_verify_paths(holder->ctx);

    SSL* ssl = SSL_new(holder->ctx);
    if (!ssl)
    {
        ::close(fd);
        throw TransportError(ssl_error_text("SSL_new"));
    }
    SSL_set_fd(ssl, fd);
    SSL_set_tlsext_host_name(ssl, opts.host.c_str());
    if (!run_handshake(ssl, fd, false, opts.timeout_ms))
    {
        std::string detail = ssl_error_text("TLS handshake");
        SSL_free(ssl);
        ::close(fd);
        throw TransportError(detail);
    }

    ClientConnection out;
    out.tls_version = SSL_get_version(ssl);
    out.tls_cipher = SSL_get_cipher_name(ssl);
    out.stream = std::make_unique<TlsStream>(fd, ssl, holder);
    return out;
}

void generate_self_signed_cert(const std::string& cert_path, const std::string& key_path,
                               const std::string& common_name, int valid_days)
{
    EVP_PKEY* pkey = EVP_EC_gen("P-256");
    if (!pkey)
        throw TransportError(ssl_error_text("key generation"));

    X509* x = X509_new();
    if (!x)
    {
        EVP_PKEY_free(pkey);
        throw TransportError(ssl_error_text("X509_new"));
    }

    X509_set_version(x, 2);
    std::uint64_t serial = 0;
    RAND_bytes(reinterpret_cast<unsigned char*>(&serial), sizeof serial);
    ASN1_INTEGER_set_uint64(X509_get_serialNumber(x), serial >> 1);
    X509_gmtime_adj(X509_getm_notBefore(x), -3600);
    X509_gmtime_adj(X509_getm_notAfter(x), 86400L * valid_days);
    X509_set_pubkey(x, pkey);

    X509_NAME* name = X509_get_subject_name(x);
    X509_NAME_add_entry_by_txt(name, "CN", MBSTRING_ASC,
                               reinterpret_cast<const unsigned char*>(common_name.c_str()),
                               -1, -1, 0);
    X509_set_issuer_name(x, name);

    bool ok = X509_sign(x, pkey, EVP_sha256()) != 0;

    if (ok)
    {
        FILE* kf = std::fopen(key_path.c_str(), "w");
        ok = kf && PEM_write_PrivateKey(kf, pkey, nullptr, nullptr, 0, nullptr, nullptr) == 1;
        if (kf)
            std::fclose(kf);
    }
    if (ok)
    {
        FILE* cf = std::fopen(cert_path.c_str(), "w");
        ok = cf && PEM_write_X509(cf, x) == 1;
        if (cf)
            std::fclose(cf);
    }

    X509_free(x);
    EVP_PKEY_free(pkey);
    if (!ok)
        throw TransportError("writing self-signed certificate failed");
}

} // namespace mqttsec::transport
