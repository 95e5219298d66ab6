#include "mqttsec/transport.hpp"

#include "CLI11.hpp"

#include <cstdio>

int main(int argc, char** argv)
{
    CLI::App app{"mqttsec-certgen - self-signed certificate for TLS listeners"};

    std::string cert = "broker.crt";
    std::string key = "broker.key";
    std::string cn = "localhost";
    int days = 365;

    app.add_option("--cert", cert, "Certificate output path (PEM)");
    app.add_option("--key", key, "Private key output path (PEM)");
    app.add_option("--cn", cn, "Subject common name");
    app.add_option("--days", days, "Validity in days")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try
    {
        mqttsec::transport::generate_self_signed_cert(cert, key, cn, days);
        std::printf("wrote %s and %s (CN=%s, %d days)\n", cert.c_str(), key.c_str(),
                    cn.c_str(), days);
        return 0;
    }
    catch (const std::exception& e)
    {
        std::fprintf(stderr, "mqttsec-certgen: %s\n", e.what());
        return 1;
    }
}
