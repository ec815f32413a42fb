#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace ctl {

inline constexpr std::size_t kMaxRank = 4;

// Row-major extents of a dense tensor, rank 1..4.
class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<std::size_t> dims);
  explicit Shape(std::vector<std::size_t> dims);

  std::size_t rank() const { return dims_.size(); }
  std::size_t numel() const;
  std::size_t operator[](std::size_t axis) const { return dims_[axis]; }
  // Negative axes count from the back.
  std::size_t dim(int axis) const;
  std::size_t normalize_axis(int axis) const;

  const std::vector<std::size_t>& dims() const { return dims_; }
  std::vector<std::size_t> strides() const;
  std::string str() const;

  bool operator==(const Shape& other) const = default;

 private:
  void validate() const;
  std::vector<std::size_t> dims_;
};

}  // namespace ctl
