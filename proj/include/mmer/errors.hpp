#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmer {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);

/// Raised by a tensor primitive when its inputs violate the shape rule.
class ShapeError : public std::invalid_argument {
 public:
  ShapeError(const std::string& primitive, const std::vector<Shape>& shapes,
             const std::string& detail);

  const std::string& primitive() const noexcept { return primitive_; }
  const std::vector<Shape>& shapes() const noexcept { return shapes_; }

 private:
  std::string primitive_;
  std::vector<Shape> shapes_;
};

/// Non-finite value seen while strict mode is active, or by a check that
/// requires finite data.
class NonFiniteError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Invalid hyperparameters or inconsistent model/config pairs.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed binary or text input. `offset` is the byte offset (binary
/// formats) or line number (text formats) where parsing stopped.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset);

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace mmer
