#include "collab/gateway.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

namespace collab {

namespace {

class HttplibTransport : public HttpTransport {
 public:
  HttplibTransport(const std::string& base_url, std::chrono::seconds timeout)
      : base_url_(base_url), timeout_(timeout) {}

  HttpResponse post_json(const std::string& path, const std::string& body,
                         const std::vector<std::pair<std::string, std::string>>& headers) override {
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    // One client per request; httplib::Client instances are not shareable
    // across threads.
    httplib::Client client(base_url_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    auto result = client.Post(path, h, body, "application/json");
    HttpResponse out;
    if (!result) {
      out.error = httplib::to_string(result.error());
      return out;
    }
    out.status = result->status;
    out.body = result->body;
    return out;
  }

 private:
  std::string base_url_;
  std::chrono::seconds timeout_;
};

}  // namespace

std::shared_ptr<HttpTransport> make_http_transport(const std::string& base_url,
                                                   std::chrono::seconds timeout) {
  return std::make_shared<HttplibTransport>(base_url, timeout);
}

}  // namespace collab
