#include "xml_scan.hpp"

#include <cctype>
#include <cstdint>

#include "streetvae/error.hpp"

namespace streetvae::detail {

namespace {

bool is_name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == ':' || c == '-' || c == '.' ||
         static_cast<unsigned char>(c) >= 0x80;
}

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

}  // namespace

void XmlScanner::fail(const std::string& what) const { throw ParseError("osm xml: " + what, pos_); }

void XmlScanner::skip_ws() {
  while (pos_ < doc_.size() && std::isspace(static_cast<unsigned char>(doc_[pos_]))) ++pos_;
}

void XmlScanner::skip_past(std::string_view terminator, const char* construct) {
  const auto end = doc_.find(terminator, pos_);
  if (end == std::string_view::npos) fail(std::string("unterminated ") + construct);
  pos_ = end + terminator.size();
}

std::string XmlScanner::read_name() {
  const std::size_t start = pos_;
  while (pos_ < doc_.size() && is_name_char(doc_[pos_])) ++pos_;
  if (pos_ == start) fail("expected a name");
  return std::string(doc_.substr(start, pos_ - start));
}

std::string XmlScanner::read_attr_value() {
  if (pos_ >= doc_.size() || (doc_[pos_] != '"' && doc_[pos_] != '\'')) fail("expected quoted attribute value");
  const char quote = doc_[pos_++];
  std::string out;
  while (true) {
    if (pos_ >= doc_.size()) fail("unterminated attribute value");
    const char c = doc_[pos_];
    if (c == quote) {
      ++pos_;
      return out;
    }
    if (c == '<') fail("'<' inside attribute value");
    if (c != '&') {
      out.push_back(c);
      ++pos_;
      continue;
    }
    const auto semi = doc_.find(';', pos_);
    if (semi == std::string_view::npos || semi - pos_ > 10) fail("malformed entity");
    const auto ent = doc_.substr(pos_ + 1, semi - pos_ - 1);
    if (ent == "amp") out.push_back('&');
    else if (ent == "lt") out.push_back('<');
    else if (ent == "gt") out.push_back('>');
    else if (ent == "quot") out.push_back('"');
    else if (ent == "apos") out.push_back('\'');
    else if (ent.size() > 1 && ent[0] == '#') {
      std::uint32_t cp = 0;
      const bool hex = ent[1] == 'x' || ent[1] == 'X';
      const auto digits = ent.substr(hex ? 2 : 1);
      if (digits.empty()) fail("malformed character reference");
      for (char d : digits) {
        const int v = hex ? (std::isdigit(static_cast<unsigned char>(d)) ? d - '0'
                             : std::isxdigit(static_cast<unsigned char>(d))
                                 ? std::tolower(static_cast<unsigned char>(d)) - 'a' + 10
                                 : -1)
                          : (std::isdigit(static_cast<unsigned char>(d)) ? d - '0' : -1);
        if (v < 0) fail("malformed character reference");
        cp = cp * (hex ? 16 : 10) + static_cast<std::uint32_t>(v);
        if (cp > 0x10FFFF) fail("character reference out of range");
      }
      append_utf8(out, cp);
    } else {
      fail("unknown entity &" + std::string(ent) + ";");
    }
    pos_ = semi + 1;
  }
}

XmlEvent XmlScanner::next() {
  while (true) {
    const auto lt = doc_.find('<', pos_);
    if (lt == std::string_view::npos) {
      pos_ = doc_.size();
      if (!stack_.empty()) fail("unexpected end of document inside <" + stack_.back() + ">");
      if (!seen_root_) fail("document has no root element");
      return {XmlEvent::Kind::end_of_document, {}, {}, false, pos_};
    }
    if (stack_.empty() && seen_root_) {
      // Only whitespace may follow the root element besides comments/PIs.
      for (std::size_t i = pos_; i < lt; ++i) {
        if (!std::isspace(static_cast<unsigned char>(doc_[i]))) {
          pos_ = i;
          fail("content after root element");
        }
      }
    }
    pos_ = lt;
    if (starts_with("<!--")) {
      skip_past("-->", "comment");
      continue;
    }
    if (starts_with("<?")) {
      skip_past("?>", "processing instruction");
      continue;
    }
    if (starts_with("<![CDATA[")) {
      skip_past("]]>", "CDATA section");
      continue;
    }
    if (starts_with("<!")) {
      skip_past(">", "declaration");
      continue;
    }

    XmlEvent ev;
    ev.offset = pos_;
    ++pos_;
    if (pos_ < doc_.size() && doc_[pos_] == '/') {
      ++pos_;
      ev.kind = XmlEvent::Kind::close;
      ev.name = read_name();
      skip_ws();
      if (pos_ >= doc_.size() || doc_[pos_] != '>') fail("expected '>'");
      ++pos_;
      if (stack_.empty() || stack_.back() != ev.name) fail("mismatched closing tag </" + ev.name + ">");
      stack_.pop_back();
      return ev;
    }

    if (stack_.empty() && seen_root_) fail("multiple root elements");
    ev.kind = XmlEvent::Kind::open;
    ev.name = read_name();
    while (true) {
      skip_ws();
      if (pos_ >= doc_.size()) fail("unterminated start tag <" + ev.name + ">");
      if (doc_[pos_] == '>') {
        ++pos_;
        break;
      }
      if (starts_with("/>")) {
        pos_ += 2;
        ev.self_closing = true;
        break;
      }
      std::string key = read_name();
      skip_ws();
      if (pos_ >= doc_.size() || doc_[pos_] != '=') fail("expected '=' after attribute " + key);
      ++pos_;
      skip_ws();
      ev.attributes.emplace_back(std::move(key), read_attr_value());
    }
    seen_root_ = true;
    if (!ev.self_closing) stack_.push_back(ev.name);
    return ev;
  }
}

}  // namespace streetvae::detail
