#include <httplib.h>

#include <regex>

#include "chaintrust/gateway.hpp"

namespace chaintrust {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  static const std::regex pattern(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, pattern)) {
    throw TransportError(TransportErrorKind::bad_request, "endpoint is not an http(s) URL: " + url);
  }
  return {m[1].str(), m[2].matched ? m[2].str() : "/"};
}

}  // namespace

HttpPoster default_http_poster() {
  return [](const std::string& url, const std::string& body,
            const std::map<std::string, std::string>& headers, std::chrono::seconds timeout) {
    const auto [origin, path] = split_url(url);
    httplib::Client client(origin);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    httplib::Headers hs;
    std::string content_type = "application/json";
    for (const auto& [k, v] : headers) {
      if (k == "Content-Type") {
        content_type = v;
      } else {
        hs.emplace(k, v);
      }
    }

    HttpResponse out;
    auto result = client.Post(path, hs, body, content_type);
    if (!result) {
      out.transport_error = httplib::to_string(result.error());
      out.timed_out = result.error() == httplib::Error::Read ||
                      result.error() == httplib::Error::Write ||
                      result.error() == httplib::Error::ConnectionTimeout;
      return out;
    }
    out.status = result->status;
    out.body = result->body;
    return out;
  };
}

}  // namespace chaintrust
