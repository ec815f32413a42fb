#include "ctl/adam.hpp"

#include <cmath>
#include <string>

namespace ctl {

template <typename T>
void adam_step(std::vector<Tensor<T>>& params, AdamState<T>& state) {
  if (state.step < 0) throw std::invalid_argument("adam step counter must be non-negative");
  if (state.first_moment.empty() && state.second_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.numel(), T(0));
      state.second_moment.emplace_back(p.numel(), T(0));
    }
  }
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw DimensionError("adam state holds " + std::to_string(state.first_moment.size()) +
                         " moment buffers for " + std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.first_moment[i].size() != params[i].numel() || state.second_moment[i].size() != params[i].numel()) {
      throw DimensionError("adam moment buffer " + std::to_string(i) + " does not match parameter shape " +
                           params[i].shape().str());
    }
  }

  ++state.step;
  const auto& o = state.options;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (!p.has_grad()) continue;
    auto theta = p.mutable_data();
    const auto grad = p.grad();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < theta.size(); ++j) {
      const double g = static_cast<double>(grad[j]) + o.weight_decay * static_cast<double>(theta[j]);
      const double mj = o.beta1 * static_cast<double>(m[j]) + (1.0 - o.beta1) * g;
      const double vj = o.beta2 * static_cast<double>(v[j]) + (1.0 - o.beta2) * g * g;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double update = o.lr * (mj / c1) / (std::sqrt(vj / c2) + o.eps);
      theta[j] = static_cast<T>(static_cast<double>(theta[j]) - update);
    }
  }
}

double step_decay_lr(double base_lr, std::int64_t epoch, std::int64_t every, double factor) {
  if (every <= 0) return base_lr;
  return base_lr * std::pow(factor, static_cast<double>(epoch / every));
}

template void adam_step<float>(std::vector<Tensor<float>>&, AdamState<float>&);
template void adam_step<double>(std::vector<Tensor<double>>&, AdamState<double>&);

}  // namespace ctl
