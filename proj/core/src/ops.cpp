#include "ctl/ops.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numeric>

namespace ctl {
namespace {

using Index4 = std::array<std::size_t, 4>;

struct BroadcastPlan {
  Shape out;
  Index4 dims{1, 1, 1, 1};
  Index4 stride_a{0, 0, 0, 0};
  Index4 stride_b{0, 0, 0, 0};
};

Index4 padded_dims(const Shape& s) {
  Index4 d{1, 1, 1, 1};
  const auto r = s.rank();
  for (std::size_t i = 0; i < r; ++i) d[4 - r + i] = s[i];
  return d;
}

Index4 broadcast_strides(const Index4& dims, const Index4& out) {
  Index4 s{0, 0, 0, 0};
  std::size_t acc = 1;
  for (std::size_t i = 4; i-- > 0;) {
    s[i] = (dims[i] == 1 && out[i] != 1) ? 0 : acc;
    acc *= dims[i];
  }
  return s;
}

BroadcastPlan plan_broadcast(const Shape& a, const Shape& b) {
  const auto da = padded_dims(a), db = padded_dims(b);
  BroadcastPlan p;
  for (std::size_t i = 0; i < 4; ++i) {
    if (da[i] != db[i] && da[i] != 1 && db[i] != 1) {
      throw DimensionError("cannot broadcast " + a.str() + " with " + b.str());
    }
    p.dims[i] = std::max(da[i], db[i]);
  }
  const auto r = std::max(a.rank(), b.rank());
  p.out = Shape(std::vector<std::size_t>(p.dims.begin() + static_cast<long>(4 - r), p.dims.end()));
  p.stride_a = broadcast_strides(da, p.dims);
  p.stride_b = broadcast_strides(db, p.dims);
  return p;
}

template <typename F>
void broadcast_loop(const BroadcastPlan& p, F&& f) {
  std::size_t o = 0;
  for (std::size_t i0 = 0; i0 < p.dims[0]; ++i0)
    for (std::size_t i1 = 0; i1 < p.dims[1]; ++i1)
      for (std::size_t i2 = 0; i2 < p.dims[2]; ++i2)
        for (std::size_t i3 = 0; i3 < p.dims[3]; ++i3, ++o) {
          const std::size_t ia = i0 * p.stride_a[0] + i1 * p.stride_a[1] + i2 * p.stride_a[2] + i3 * p.stride_a[3];
          const std::size_t ib = i0 * p.stride_b[0] + i1 * p.stride_b[1] + i2 * p.stride_b[2] + i3 * p.stride_b[3];
          f(o, ia, ib);
        }
}

// d(out)/d(a) and d(out)/d(b) for an element-wise binary op.
template <typename T, typename Fwd, typename DA, typename DB>
Tensor<T> binary(const Tensor<T>& a, const Tensor<T>& b, Fwd fwd, DA da, DB db) {
  auto plan = plan_broadcast(a.shape(), b.shape());
  std::vector<T> out(plan.out.numel());
  const auto x = a.data(), y = b.data();
  broadcast_loop(plan, [&](std::size_t o, std::size_t ia, std::size_t ib) { out[o] = fwd(x[ia], y[ib]); });
  auto shape = plan.out;
  return record_op<T>(std::move(shape), std::move(out), {a, b}, [a, b, plan, da, db](std::span<const T> g, std::span<const T>) {
    auto ga = grad_sink(a);
    auto gb = grad_sink(b);
    const auto x = a.data(), y = b.data();
    broadcast_loop(plan, [&](std::size_t o, std::size_t ia, std::size_t ib) {
      if (!ga.empty()) ga[ia] += g[o] * da(x[ia], y[ib]);
      if (!gb.empty()) gb[ib] += g[o] * db(x[ia], y[ib]);
    });
  });
}

// dydx(x, y) gives the local derivative from input and output.
template <typename T, typename Fwd, typename Deriv>
Tensor<T> unary(const Tensor<T>& x, Fwd fwd, Deriv dydx) {
  const auto in = x.data();
  std::vector<T> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  return record_op<T>(x.shape(), std::move(out), {x}, [x, dydx](std::span<const T> g, std::span<const T> y) {
    auto gx = grad_sink(x);
    const auto xv = x.data();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * dydx(xv[i], y[i]);
  });
}

struct AxisView {
  std::size_t outer = 1, n = 1, inner = 1;
};

AxisView axis_view(const Shape& s, std::size_t axis) {
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= s[i];
  v.n = s[axis];
  for (std::size_t i = axis + 1; i < s.rank(); ++i) v.inner *= s[i];
  return v;
}

Shape reduced_shape(const Shape& s, std::size_t axis, bool keepdim) {
  std::vector<std::size_t> dims = s.dims();
  if (keepdim || dims.size() == 1) {
    dims[axis] = 1;
  } else {
    dims.erase(dims.begin() + static_cast<long>(axis));
  }
  return Shape(std::move(dims));
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, [](T x, T y) { return x + y; }, [](T, T) { return T(1); }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, [](T x, T y) { return x - y; }, [](T, T) { return T(1); }, [](T, T) { return T(-1); });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, [](T x, T y) { return x * y; }, [](T, T y) { return y; }, [](T x, T) { return x; });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(
      a, b, [](T x, T y) { return x / y; }, [](T, T y) { return T(1) / y; },
      [](T x, T y) { return -x / (y * y); });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T value) {
  return unary(x, [value](T v) { return v + value; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  return unary(x, [factor](T v) { return v * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary(x, [](T v) { return v > T(0) ? v : T(0); }, [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> square(const Tensor<T>& x) {
  return unary(x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <typename T>
Tensor<T> sqrt(const Tensor<T>& x) {
  return unary(x, [](T v) { return std::sqrt(v); }, [](T, T y) { return T(0.5) / y; });
}

template <typename T>
Tensor<T> pow_scalar(const Tensor<T>& x, T exponent) {
  return unary(
      x, [exponent](T v) { return std::pow(v, exponent); },
      [exponent](T v, T) { return exponent * std::pow(v, exponent - T(1)); });
}

template <typename T>
Tensor<T> clamp_min(const Tensor<T>& x, T floor) {
  return unary(
      x, [floor](T v) { return v > floor ? v : floor; }, [floor](T v, T) { return v > floor ? T(1) : T(0); });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x, int axis, bool keepdim) {
  const auto ax = x.shape().normalize_axis(axis);
  const auto v = axis_view(x.shape(), ax);
  const auto in = x.data();
  std::vector<T> out(v.outer * v.inner, T(0));
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t j = 0; j < v.n; ++j)
      for (std::size_t i = 0; i < v.inner; ++i) out[o * v.inner + i] += in[(o * v.n + j) * v.inner + i];
  return record_op<T>(reduced_shape(x.shape(), ax, keepdim), std::move(out), {x}, [x, v](std::span<const T> g, std::span<const T>) {
    auto gx = grad_sink(x);
    for (std::size_t o = 0; o < v.outer; ++o)
      for (std::size_t j = 0; j < v.n; ++j)
        for (std::size_t i = 0; i < v.inner; ++i) gx[(o * v.n + j) * v.inner + i] += g[o * v.inner + i];
  });
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& x) {
  const auto in = x.data();
  T total = std::accumulate(in.begin(), in.end(), T(0));
  return record_op<T>(Shape{1}, {total}, {x}, [x](std::span<const T> g, std::span<const T>) {
    auto gx = grad_sink(x);
    for (auto& e : gx) e += g[0];
  });
}

template <typename T>
Tensor<T> mean_pool(const Tensor<T>& x, int axis, bool keepdim) {
  const auto n = x.shape().dim(axis);
  return scale(sum(x, axis, keepdim), T(1) / static_cast<T>(n));
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& x) {
  return scale(sum_all(x), T(1) / static_cast<T>(x.numel()));
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sa.rank() < 2 || sb.rank() < 2) {
    throw DimensionError("matmul needs rank >= 2 operands, got " + sa.str() + " and " + sb.str());
  }
  const std::size_t m = sa.dim(-2), k = sa.dim(-1), n = sb.dim(-1);
  if (sb.dim(-2) != k) throw DimensionError("matmul inner extents differ: " + sa.str() + " x " + sb.str());
  std::vector<std::size_t> out_dims;
  if (sa.rank() > 2 && sb.rank() > 2) {
    if (std::vector<std::size_t>(sa.dims().begin(), sa.dims().end() - 2) !=
        std::vector<std::size_t>(sb.dims().begin(), sb.dims().end() - 2)) {
      throw DimensionError("matmul batch extents differ: " + sa.str() + " x " + sb.str());
    }
  }
  const auto& lead = sa.rank() >= sb.rank() ? sa.dims() : sb.dims();
  out_dims.assign(lead.begin(), lead.end() - 2);
  out_dims.push_back(m);
  out_dims.push_back(n);
  const std::size_t batch_a = a.numel() / (m * k), batch_b = b.numel() / (k * n);
  const std::size_t batches = std::max(batch_a, batch_b);

  std::vector<T> out(batches * m * n, T(0));
  const auto A = a.data(), B = b.data();
  for (std::size_t bi = 0; bi < batches; ++bi) {
    const T* pa = A.data() + (batch_a > 1 ? bi * m * k : 0);
    const T* pb = B.data() + (batch_b > 1 ? bi * k * n : 0);
    T* pc = out.data() + bi * m * n;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        const T av = pa[i * k + p];
        if (av == T(0)) continue;
        const T* brow = pb + p * n;
        T* crow = pc + i * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
  }
  return record_op<T>(Shape(out_dims), std::move(out), {a, b},
                      [a, b, m, k, n, batch_a, batch_b, batches](std::span<const T> g, std::span<const T>) {
                        auto ga = grad_sink(a);
                        auto gb = grad_sink(b);
                        const auto A = a.data(), B = b.data();
                        std::vector<T> bt;  // B^T of the current batch, [n, k]
                        for (std::size_t bi = 0; bi < batches; ++bi) {
                          const std::size_t oa = batch_a > 1 ? bi * m * k : 0;
                          const std::size_t ob = batch_b > 1 ? bi * k * n : 0;
                          const T* pg = g.data() + bi * m * n;
                          if (!ga.empty()) {
                            // dA = G * B^T
                            if (bt.empty() || batch_b > 1) {
                              bt.resize(n * k);
                              for (std::size_t p = 0; p < k; ++p)
                                for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = B[ob + p * n + j];
                            }
                            for (std::size_t i = 0; i < m; ++i) {
                              T* arow = ga.data() + oa + i * k;
                              for (std::size_t j = 0; j < n; ++j) {
                                const T gv = pg[i * n + j];
                                if (gv == T(0)) continue;
                                const T* brow = bt.data() + j * k;
                                for (std::size_t p = 0; p < k; ++p) arow[p] += gv * brow[p];
                              }
                            }
                          }
                          if (!gb.empty()) {
                            // dB = A^T * G
                            for (std::size_t i = 0; i < m; ++i)
                              for (std::size_t p = 0; p < k; ++p) {
                                const T av = A[oa + i * k + p];
                                if (av == T(0)) continue;
                                for (std::size_t j = 0; j < n; ++j) gb[ob + p * n + j] += av * pg[i * n + j];
                              }
                          }
                        }
                      });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape.numel() != x.numel()) {
    throw DimensionError("cannot reshape " + x.shape().str() + " to " + shape.str());
  }
  std::vector<T> out(x.data().begin(), x.data().end());
  return record_op<T>(std::move(shape), std::move(out), {x}, [x](std::span<const T> g, std::span<const T>) {
    auto gx = grad_sink(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
  });
}

template <typename T>
Tensor<T> unsqueeze(const Tensor<T>& x, int axis) {
  auto dims = x.shape().dims();
  const int r = static_cast<int>(dims.size());
  const int a = axis < 0 ? axis + r + 1 : axis;
  if (a < 0 || a > r) throw DimensionError("unsqueeze axis out of range for " + x.shape().str());
  dims.insert(dims.begin() + a, 1);
  return reshape(x, Shape(std::move(dims)));
}

template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& axes) {
  const auto& s = x.shape();
  const auto r = s.rank();
  if (axes.size() != r) throw DimensionError("permute axes do not match rank of " + s.str());
  std::vector<bool> seen(r, false);
  std::vector<std::size_t> out_dims(r);
  for (std::size_t i = 0; i < r; ++i) {
    if (axes[i] >= r || seen[axes[i]]) throw DimensionError("permute axes are not a permutation");
    seen[axes[i]] = true;
    out_dims[i] = s[axes[i]];
  }
  const auto in_strides = s.strides();
  Index4 dims{1, 1, 1, 1}, strides{0, 0, 0, 0};
  for (std::size_t i = 0; i < r; ++i) {
    dims[4 - r + i] = out_dims[i];
    strides[4 - r + i] = in_strides[axes[i]];
  }
  std::vector<std::size_t> src(x.numel());
  std::size_t o = 0;
  for (std::size_t i0 = 0; i0 < dims[0]; ++i0)
    for (std::size_t i1 = 0; i1 < dims[1]; ++i1)
      for (std::size_t i2 = 0; i2 < dims[2]; ++i2)
        for (std::size_t i3 = 0; i3 < dims[3]; ++i3)
          src[o++] = i0 * strides[0] + i1 * strides[1] + i2 * strides[2] + i3 * strides[3];
  const auto in = x.data();
  std::vector<T> out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) out[i] = in[src[i]];
  return record_op<T>(Shape(out_dims), std::move(out), {x}, [x, src = std::move(src)](std::span<const T> g, std::span<const T>) {
    auto gx = grad_sink(x);
    for (std::size_t i = 0; i < src.size(); ++i) gx[src[i]] += g[i];
  });
}

template <typename T>
Tensor<T> transpose_last2(const Tensor<T>& x) {
  const auto r = x.rank();
  if (r < 2) throw DimensionError("transpose_last2 needs rank >= 2");
  std::vector<std::size_t> axes(r);
  std::iota(axes.begin(), axes.end(), 0);
  std::swap(axes[r - 1], axes[r - 2]);
  return permute(x, axes);
}

template <typename T>
Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b, int axis) {
  if (a.rank() != b.rank()) throw DimensionError("concat rank mismatch");
  const auto ax = a.shape().normalize_axis(axis);
  for (std::size_t i = 0; i < a.rank(); ++i) {
    if (i != ax && a.shape()[i] != b.shape()[i]) {
      throw DimensionError("concat extents differ: " + a.shape().str() + " vs " + b.shape().str());
    }
  }
  const auto va = axis_view(a.shape(), ax), vb = axis_view(b.shape(), ax);
  const std::size_t n = va.n + vb.n, inner = va.inner;
  auto dims = a.shape().dims();
  dims[ax] = n;
  std::vector<T> out(va.outer * n * inner);
  const auto A = a.data(), B = b.data();
  for (std::size_t o = 0; o < va.outer; ++o) {
    std::copy_n(A.begin() + static_cast<long>(o * va.n * inner), va.n * inner, out.begin() + static_cast<long>(o * n * inner));
    std::copy_n(B.begin() + static_cast<long>(o * vb.n * inner), vb.n * inner,
                out.begin() + static_cast<long>((o * n + va.n) * inner));
  }
  return record_op<T>(Shape(dims), std::move(out), {a, b}, [a, b, va, vb, n, inner](std::span<const T> g, std::span<const T>) {
    auto ga = grad_sink(a);
    auto gb = grad_sink(b);
    for (std::size_t o = 0; o < va.outer; ++o) {
      if (!ga.empty())
        for (std::size_t i = 0; i < va.n * inner; ++i) ga[o * va.n * inner + i] += g[o * n * inner + i];
      if (!gb.empty())
        for (std::size_t i = 0; i < vb.n * inner; ++i) gb[o * vb.n * inner + i] += g[(o * n + va.n) * inner + i];
    }
  });
}

template <typename T>
Tensor<T> broadcast_to(const Tensor<T>& x, const Shape& shape) {
  auto plan = plan_broadcast(x.shape(), shape);
  if (!(plan.out == shape)) throw DimensionError("cannot broadcast " + x.shape().str() + " to " + shape.str());
  std::vector<T> out(shape.numel());
  const auto in = x.data();
  broadcast_loop(plan, [&](std::size_t o, std::size_t ia, std::size_t) { out[o] = in[ia]; });
  return record_op<T>(shape, std::move(out), {x}, [x, plan](std::span<const T> g, std::span<const T>) {
    auto gx = grad_sink(x);
    broadcast_loop(plan, [&](std::size_t o, std::size_t ia, std::size_t) { gx[ia] += g[o]; });
  });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis) {
  const auto v = axis_view(x.shape(), x.shape().normalize_axis(axis));
  const auto in = x.data();
  std::vector<T> out(in.size());
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t i = 0; i < v.inner; ++i) {
      const std::size_t base = o * v.n * v.inner + i;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j < v.n; ++j) mx = std::max(mx, in[base + j * v.inner]);
      T z = T(0);
      for (std::size_t j = 0; j < v.n; ++j) z += (out[base + j * v.inner] = std::exp(in[base + j * v.inner] - mx));
      for (std::size_t j = 0; j < v.n; ++j) out[base + j * v.inner] /= z;
    }
  return record_op<T>(x.shape(), std::move(out), {x}, [x, v](std::span<const T> g, std::span<const T> yv) {
                                  auto gx = grad_sink(x);
                                                                    for (std::size_t o = 0; o < v.outer; ++o)
                                    for (std::size_t i = 0; i < v.inner; ++i) {
                                      const std::size_t base = o * v.n * v.inner + i;
                                      T dot = T(0);
                                      for (std::size_t j = 0; j < v.n; ++j)
                                        dot += g[base + j * v.inner] * yv[base + j * v.inner];
                                      for (std::size_t j = 0; j < v.n; ++j) {
                                        const auto e = base + j * v.inner;
                                        gx[e] += yv[e] * (g[e] - dot);
                                      }
                                    }
                                });
}

template <typename T>
Tensor<T> log_softmax(const Tensor<T>& x, int axis) {
  const auto v = axis_view(x.shape(), x.shape().normalize_axis(axis));
  const auto in = x.data();
  std::vector<T> out(in.size());
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t i = 0; i < v.inner; ++i) {
      const std::size_t base = o * v.n * v.inner + i;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j < v.n; ++j) mx = std::max(mx, in[base + j * v.inner]);
      T z = T(0);
      for (std::size_t j = 0; j < v.n; ++j) z += std::exp(in[base + j * v.inner] - mx);
      const T lz = mx + std::log(z);
      for (std::size_t j = 0; j < v.n; ++j) out[base + j * v.inner] = in[base + j * v.inner] - lz;
    }
  return record_op<T>(x.shape(), std::move(out), {x}, [x, v](std::span<const T> g, std::span<const T> yv) {
                                  auto gx = grad_sink(x);
                                                                    for (std::size_t o = 0; o < v.outer; ++o)
                                    for (std::size_t i = 0; i < v.inner; ++i) {
                                      const std::size_t base = o * v.n * v.inner + i;
                                      T gsum = T(0);
                                      for (std::size_t j = 0; j < v.n; ++j) gsum += g[base + j * v.inner];
                                      for (std::size_t j = 0; j < v.n; ++j) {
                                        const auto e = base + j * v.inner;
                                        gx[e] += g[e] - std::exp(yv[e]) * gsum;
                                      }
                                    }
                                });
}

template <typename T>
Tensor<T> l2_normalize_rows(const Tensor<T>& x) {
  const std::size_t n = x.shape().dim(-1);
  const std::size_t rows = x.numel() / n;
  const auto in = x.data();
  std::vector<T> out(in.begin(), in.end());
  std::vector<T> norms(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    T ss = T(0);
    for (std::size_t j = 0; j < n; ++j) ss += in[r * n + j] * in[r * n + j];
    norms[r] = std::sqrt(ss);
    if (norms[r] > T(0))
      for (std::size_t j = 0; j < n; ++j) out[r * n + j] /= norms[r];
  }
  return record_op<T>(x.shape(), std::move(out), {x}, [x, n, rows, norms = std::move(norms)](std::span<const T> g, std::span<const T> yv) {
        auto gx = grad_sink(x);
                for (std::size_t r = 0; r < rows; ++r) {
          const std::size_t base = r * n;
          if (!(norms[r] > T(0))) {
            for (std::size_t j = 0; j < n; ++j) gx[base + j] += g[base + j];
            continue;
          }
          T dot = T(0);
          for (std::size_t j = 0; j < n; ++j) dot += yv[base + j] * g[base + j];
          for (std::size_t j = 0; j < n; ++j) gx[base + j] += (g[base + j] - yv[base + j] * dot) / norms[r];
        }
      });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const std::optional<Tensor<T>>& bias) {
  if (weight.rank() != 2) throw DimensionError("linear weight must be a matrix, got " + weight.shape().str());
  const std::size_t cin = weight.shape()[0], cout = weight.shape()[1];
  if (x.shape().dim(-1) != cin) {
    throw DimensionError("linear expects last extent " + std::to_string(cin) + ", got " + x.shape().str());
  }
  if (bias && (bias->rank() != 1 || bias->shape()[0] != cout)) {
    throw DimensionError("linear bias must have extent " + std::to_string(cout));
  }
  const std::size_t rows = x.numel() / cin;
  auto y = matmul(reshape(x, Shape{rows, cin}), weight);
  if (bias) y = add(y, *bias);
  auto dims = x.shape().dims();
  dims.back() = cout;
  return reshape(y, Shape(std::move(dims)));
}

template <typename T>
Tensor<T> tile_blocks(const Tensor<T>& a, std::size_t reps) {
  if (a.rank() < 2) throw DimensionError("tile_blocks expects a matrix, got " + a.shape().str());
  if (reps == 0) throw DimensionError("tile_blocks needs reps >= 1");
  const std::size_t r = a.shape().dim(-2), c = a.shape().dim(-1);
  const std::size_t R = r * reps, C = c * reps;
  const std::size_t batches = a.numel() / (r * c);
  auto dims = a.shape().dims();
  dims[dims.size() - 2] = R;
  dims.back() = C;
  const auto in = a.data();
  std::vector<T> out(batches * R * C);
  for (std::size_t b = 0; b < batches; ++b)
    for (std::size_t i = 0; i < R; ++i)
      for (std::size_t j = 0; j < C; ++j) out[(b * R + i) * C + j] = in[(b * r + i % r) * c + (j % c)];
  return record_op<T>(Shape(dims), std::move(out), {a}, [a, r, c, R, C, batches](std::span<const T> g, std::span<const T>) {
    auto ga = grad_sink(a);
    for (std::size_t b = 0; b < batches; ++b)
      for (std::size_t i = 0; i < R; ++i)
        for (std::size_t j = 0; j < C; ++j) ga[(b * r + i % r) * c + (j % c)] += g[(b * R + i) * C + j];
  });
}

template <typename T>
Tensor<T> pick(const Tensor<T>& m, const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols) {
  if (m.rank() != 2) throw DimensionError("pick expects a matrix");
  if (rows.size() != cols.size() || rows.empty()) throw DimensionError("pick index lists must be equal and non-empty");
  const std::size_t nr = m.shape()[0], nc = m.shape()[1];
  std::vector<T> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= nr || cols[i] >= nc) throw DimensionError("pick index out of range");
    out[i] = m.data()[rows[i] * nc + cols[i]];
  }
  return record_op<T>(Shape{rows.size()}, std::move(out), {m}, [m, rows, cols, nc](std::span<const T> g, std::span<const T>) {
    auto gm = grad_sink(m);
    for (std::size_t i = 0; i < rows.size(); ++i) gm[rows[i] * nc + cols[i]] += g[i];
  });
}

#define CTL_INSTANTIATE_OPS(T)                                                                          \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> div(const Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                                  \
  template Tensor<T> scale(const Tensor<T>&, T);                                                       \
  template Tensor<T> relu(const Tensor<T>&);                                                           \
  template Tensor<T> square(const Tensor<T>&);                                                         \
  template Tensor<T> sqrt(const Tensor<T>&);                                                           \
  template Tensor<T> pow_scalar(const Tensor<T>&, T);                                                  \
  template Tensor<T> clamp_min(const Tensor<T>&, T);                                                   \
  template Tensor<T> sum(const Tensor<T>&, int, bool);                                                 \
  template Tensor<T> sum_all(const Tensor<T>&);                                                        \
  template Tensor<T> mean_pool(const Tensor<T>&, int, bool);                                           \
  template Tensor<T> mean_all(const Tensor<T>&);                                                       \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                       \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                                 \
  template Tensor<T> unsqueeze(const Tensor<T>&, int);                                                 \
  template Tensor<T> permute(const Tensor<T>&, const std::vector<std::size_t>&);                       \
  template Tensor<T> transpose_last2(const Tensor<T>&);                                                \
  template Tensor<T> concat(const Tensor<T>&, const Tensor<T>&, int);                                  \
  template Tensor<T> broadcast_to(const Tensor<T>&, const Shape&);                                     \
  template Tensor<T> softmax(const Tensor<T>&, int);                                                   \
  template Tensor<T> log_softmax(const Tensor<T>&, int);                                               \
  template Tensor<T> l2_normalize_rows(const Tensor<T>&);                                              \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const std::optional<Tensor<T>>&);      \
  template Tensor<T> tile_blocks(const Tensor<T>&, std::size_t);                                       \
  template Tensor<T> pick(const Tensor<T>&, const std::vector<std::size_t>&, const std::vector<std::size_t>&);

CTL_INSTANTIATE_OPS(float)
CTL_INSTANTIATE_OPS(double)

}  // namespace ctl
