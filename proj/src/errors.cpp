#include "mmer/errors.hpp"

#include <sstream>

namespace mmer {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

namespace {

std::string format_shape_error(const std::string& primitive, const std::vector<Shape>& shapes,
                               const std::string& detail) {
  std::ostringstream os;
  os << primitive << ": " << detail << " [shapes:";
  for (const auto& s : shapes) os << ' ' << shape_str(s);
  os << ']';
  return os.str();
}

}  // namespace

ShapeError::ShapeError(const std::string& primitive, const std::vector<Shape>& shapes,
                       const std::string& detail)
    : std::invalid_argument(format_shape_error(primitive, shapes, detail)),
      primitive_(primitive),
      shapes_(shapes) {}

ParseError::ParseError(const std::string& what, std::size_t offset)
    : std::runtime_error(what + " (at offset " + std::to_string(offset) + ")"), offset_(offset) {}

}  // namespace mmer
