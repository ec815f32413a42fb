#pragma once

#include <cstdint>
#include <vector>

#include "ctl/tensor.hpp"

namespace ctl {

struct AdamOptions {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 5e-4;  // added to the gradient as weight_decay * theta
};

template <typename T>
struct AdamState {
  AdamOptions options;
  std::int64_t step = 0;
  std::vector<std::vector<T>> first_moment;   // one buffer per parameter
  std::vector<std::vector<T>> second_moment;
};

// One bias-corrected Adam update over `params` using their accumulated grads.
// Parameters without a gradient are left untouched. Moment buffers are
// allocated on the first call and must match the parameters afterwards.
template <typename T>
void adam_step(std::vector<Tensor<T>>& params, AdamState<T>& state);

template <typename T>
void zero_grads(std::vector<Tensor<T>>& params) {
  for (auto& p : params) p.zero_grad();
}

// Step decay: lr * factor^floor(epoch / every). every == 0 disables decay.
double step_decay_lr(double base_lr, std::int64_t epoch, std::int64_t every, double factor);

}  // namespace ctl
