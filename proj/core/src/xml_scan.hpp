#pragma once

// Minimal pull scanner for the subset of XML used by OSM extracts: elements,
// attributes, comments, processing instructions and DOCTYPE. Character data is
// skipped. Errors carry the byte offset of the offending character.

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace streetvae::detail {

struct XmlEvent {
  enum class Kind { open, close, end_of_document };
  Kind kind = Kind::end_of_document;
  std::string name;
  std::vector<std::pair<std::string, std::string>> attributes;
  bool self_closing = false;
  std::size_t offset = 0;

  const std::string* attribute(std::string_view key) const {
    for (const auto& [k, v] : attributes) {
      if (k == key) return &v;
    }
    return nullptr;
  }
};

class XmlScanner {
 public:
  explicit XmlScanner(std::string_view doc) : doc_(doc) {}

  /// Returns the next element event. A self-closing element yields a single
  /// `open` event with self_closing set. Tag nesting is checked.
  XmlEvent next();

 private:
  [[noreturn]] void fail(const std::string& what) const;
  void skip_ws();
  bool starts_with(std::string_view s) const { return doc_.substr(pos_).starts_with(s); }
  void skip_past(std::string_view terminator, const char* construct);
  std::string read_name();
  std::string read_attr_value();

  std::string_view doc_;
  std::size_t pos_ = 0;
  std::vector<std::string> stack_;
  bool seen_root_ = false;
};

}  // namespace streetvae::detail
