#pragma once

#include <string>

namespace streetvae {

/// Bounding box plus tag filter for an Overpass query.
struct OverpassQuery {
  double south = 0.0;
  double west = 0.0;
  double north = 0.0;
  double east = 0.0;
  std::string tag_filter = "highway";

  /// Overpass QL body requesting ways matching the filter and their nodes, as XML.
  std::string to_ql() const;
};

struct FetchOptions {
  double timeout_s = 60.0;
};

/// POSTs the query (form field `data`) to `endpoint` and returns the body
/// verbatim. Any transport failure, timeout or non-2xx status raises FetchError.
std::string fetch_overpass(const std::string& endpoint, const OverpassQuery& query,
                           const FetchOptions& options = {});

}  // namespace streetvae
