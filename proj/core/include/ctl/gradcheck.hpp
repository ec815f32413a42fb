#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

#include "ctl/nn.hpp"

namespace ctl {

struct GradcheckOptions {
  double step = 1e-5;              // central-difference half width h
  double tolerance = 1e-4;         // max allowed relative error
  double abs_floor = 1e-4;         // denominator floor for near-zero gradients
  std::size_t samples_per_tensor = 0;  // 0 checks every element
  std::uint64_t seed = 7;
};

struct GradcheckReport {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t elements_checked = 0;
  bool finite = true;
  bool passed = false;
  std::string message;
};

// Compares the tape gradient of a scalar function against central differences
// (f(theta + h) - f(theta - h)) / 2h, element by element. The relative error of
// one element is |a - n| / max(|a|, |n|, abs_floor).
GradcheckReport gradcheck(const std::function<Tensord()>& f, const NamedTensors<double>& params,
                          const GradcheckOptions& options = {});

}  // namespace ctl
