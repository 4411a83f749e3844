#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "forensics/provider.hpp"

namespace forensics {

namespace {

class HttplibTransport : public HttpTransport {
public:
    HttpResult post_json(const std::string& url, const std::string& body,
                         const std::string& bearer, Millis timeout) override {
        const auto scheme_end = url.find("://");
        if (scheme_end == std::string::npos) return {0, {}, "malformed url: " + url};
        const auto path_start = url.find('/', scheme_end + 3);
        const std::string origin = url.substr(0, path_start);
        const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

        httplib::Client client(origin);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout).count();
        client.set_connection_timeout(std::max<std::int64_t>(1, secs / 4), 0);
        client.set_read_timeout(std::max<std::int64_t>(1, secs), 0);
        client.set_write_timeout(std::max<std::int64_t>(1, secs), 0);
        httplib::Headers headers{{"Authorization", "Bearer " + bearer}};

        auto res = client.Post(path, headers, body, "application/json");
        if (!res) return {0, {}, httplib::to_string(res.error())};
        return {res->status, res->body, {}};
    }
};

}  // namespace

std::unique_ptr<HttpTransport> make_httplib_transport() {
    return std::make_unique<HttplibTransport>();
}

}  // namespace forensics
