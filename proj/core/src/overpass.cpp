#include "streetvae/overpass.hpp"

#include <cmath>
#include <sstream>

#include "httplib.h"
#include "streetvae/error.hpp"

namespace streetvae {

std::string OverpassQuery::to_ql() const {
  std::ostringstream q;
  q.precision(9);
  q << "[out:xml][timeout:60];\n"
    << "(way[\"" << tag_filter << "\"](" << south << ',' << west << ',' << north << ',' << east << ");\n"
    << " node[\"place\"~\"^(town|city)$\"](" << south << ',' << west << ',' << north << ',' << east << "););\n"
    << "(._;>;);\nout body;\n";
  return q.str();
}

namespace {

struct Endpoint {
  std::string scheme_host_port;
  std::string path;
};

Endpoint split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw FetchError("endpoint is not an absolute URL", 0, url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

std::string fetch_overpass(const std::string& endpoint, const OverpassQuery& query,
                           const FetchOptions& options) {
  if (!(options.timeout_s > 0.0)) throw ArgumentError("fetch_overpass: timeout must be > 0");
  const Endpoint ep = split_url(endpoint);
  httplib::Client client(ep.scheme_host_port);
  if (!client.is_valid()) throw FetchError("unsupported endpoint", 0, endpoint);

  const double whole = std::floor(options.timeout_s);
  const auto sec = static_cast<time_t>(whole);
  const auto usec = static_cast<time_t>((options.timeout_s - whole) * 1e6);
  client.set_connection_timeout(sec, usec);
  client.set_read_timeout(sec, usec);
  client.set_write_timeout(sec, usec);

  httplib::Params params{{"data", query.to_ql()}};
  auto res = client.Post(ep.path, params);
  if (!res) throw FetchError("request failed: " + httplib::to_string(res.error()), 0, endpoint);
  if (res->status < 200 || res->status >= 300) throw FetchError("non-success response", res->status, endpoint);
  return res->body;
}

}  // namespace streetvae
