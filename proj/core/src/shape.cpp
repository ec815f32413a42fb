#include "ctl/shape.hpp"

#include <sstream>

#include "ctl/errors.hpp"

namespace ctl {

Shape::Shape(std::initializer_list<std::size_t> dims) : dims_(dims) { validate(); }

Shape::Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) { validate(); }

void Shape::validate() const {
  if (dims_.empty() || dims_.size() > kMaxRank) {
    throw DimensionError("tensor rank must be 1.." + std::to_string(kMaxRank) + ", got " +
                         std::to_string(dims_.size()));
  }
}

std::size_t Shape::numel() const {
  std::size_t n = 1;
  for (auto d : dims_) n *= d;
  return n;
}

std::size_t Shape::normalize_axis(int axis) const {
  const int r = static_cast<int>(rank());
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " + str());
  }
  return static_cast<std::size_t>(a);
}

std::size_t Shape::dim(int axis) const { return dims_[normalize_axis(axis)]; }

std::vector<std::size_t> Shape::strides() const {
  std::vector<std::size_t> s(dims_.size(), 1);
  for (std::size_t i = dims_.size(); i-- > 1;) s[i - 1] = s[i] * dims_[i];
  return s;
}

std::string Shape::str() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (i) os << 'x';
    os << dims_[i];
  }
  os << ']';
  return os.str();
}

}  // namespace ctl
