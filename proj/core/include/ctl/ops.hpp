#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "ctl/tensor.hpp"

namespace ctl {

// Element-wise arithmetic with right-aligned broadcasting (extent 1 stretches).
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);

template <typename T> Tensor<T> add_scalar(const Tensor<T>& x, T value);
template <typename T> Tensor<T> scale(const Tensor<T>& x, T factor);
template <typename T> Tensor<T> relu(const Tensor<T>& x);
template <typename T> Tensor<T> square(const Tensor<T>& x);
template <typename T> Tensor<T> sqrt(const Tensor<T>& x);
template <typename T> Tensor<T> pow_scalar(const Tensor<T>& x, T exponent);
// max(x, floor); the gradient is zero where the floor is active.
template <typename T> Tensor<T> clamp_min(const Tensor<T>& x, T floor);

template <typename T> Tensor<T> sum(const Tensor<T>& x, int axis, bool keepdim = false);
template <typename T> Tensor<T> sum_all(const Tensor<T>& x);
// Arithmetic mean along `axis`; backward spreads 1/extent.
template <typename T> Tensor<T> mean_pool(const Tensor<T>& x, int axis, bool keepdim = false);
template <typename T> Tensor<T> mean_all(const Tensor<T>& x);

// [.., m, k] x [.., k, n]. Leading batch extents must agree, or one side may
// be a plain matrix that is shared across the other side's batch.
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);
template <typename T> Tensor<T> unsqueeze(const Tensor<T>& x, int axis);
template <typename T> Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& axes);
template <typename T> Tensor<T> transpose_last2(const Tensor<T>& x);
template <typename T> Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b, int axis);
template <typename T> Tensor<T> broadcast_to(const Tensor<T>& x, const Shape& shape);

// Softmax along `axis`, computed with max subtraction.
template <typename T> Tensor<T> softmax(const Tensor<T>& x, int axis);
template <typename T> Tensor<T> log_softmax(const Tensor<T>& x, int axis);

// Divides each row (last axis) by its Euclidean norm; all-zero rows pass
// through unchanged.
template <typename T> Tensor<T> l2_normalize_rows(const Tensor<T>& x);

// x[.., Cin] * W[Cin, Cout] (+ b[Cout]) at every leading position.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const std::optional<Tensor<T>>& bias);

// Repeats each trailing r x c matrix into a reps x reps grid of identical
// blocks: [.., r, c] -> [.., reps*r, reps*c].
template <typename T> Tensor<T> tile_blocks(const Tensor<T>& a, std::size_t reps);

// out[i] = m[rows[i], cols[i]] for a matrix m.
template <typename T>
Tensor<T> pick(const Tensor<T>& m, const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols);

template <typename T>
void require_finite(const Tensor<T>& x, const char* what) {
  if (!all_finite<T>(x.data())) throw NumericError(std::string("non-finite values in ") + what);
}

}  // namespace ctl
