#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace streetvae {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input document. `offset` is the byte position where parsing failed.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Caller asked for something that the API does not support (unknown format,
/// missing dependency file, backward on a non-scalar, ...).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Precondition on an argument value violated.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN/inf produced or consumed by a numerical routine, or a domain violation.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ProjectionError : public Error {
 public:
  using Error::Error;
};

class FetchError : public Error {
 public:
  FetchError(const std::string& what, int status, std::string endpoint)
      : Error(what + " [status " + std::to_string(status) + ", endpoint " + endpoint + "]"),
        status_(status),
        endpoint_(std::move(endpoint)) {}
  /// HTTP status, or 0 when no response was received.
  int status() const noexcept { return status_; }
  const std::string& endpoint() const noexcept { return endpoint_; }

 private:
  int status_;
  std::string endpoint_;
};

/// Sampling or network generation could not produce a valid result.
class GenerationError : public Error {
 public:
  using Error::Error;
};

/// Straight-line embedding has two crossing edges.
class NonPlanarError : public Error {
 public:
  NonPlanarError(std::size_t edge_a, std::size_t edge_b)
      : Error("non-planar embedding: edges " + std::to_string(edge_a) + " and " +
              std::to_string(edge_b) + " cross"),
        edge_a_(edge_a),
        edge_b_(edge_b) {}
  std::size_t edge_a() const noexcept { return edge_a_; }
  std::size_t edge_b() const noexcept { return edge_b_; }

 private:
  std::size_t edge_a_;
  std::size_t edge_b_;
};

}  // namespace streetvae
