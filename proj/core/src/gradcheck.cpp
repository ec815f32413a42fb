#include "ctl/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace ctl {

GradcheckReport gradcheck(const std::function<Tensord()>& f, const NamedTensors<double>& params,
                          const GradcheckOptions& options) {
  GradcheckReport report;
  std::vector<std::vector<double>> analytic;
  try {
    for (auto [name, p] : params) p.zero_grad();
    GradTape<double> tape;
    {
      TapeScope<double> scope(tape);
      auto loss = f();
      if (!all_finite<double>(loss.data())) throw NumericError("loss is not finite");
      tape.backward(loss);
    }
    for (const auto& [name, p] : params) {
      if (p.has_grad()) {
        analytic.emplace_back(p.grad().begin(), p.grad().end());
      } else {
        analytic.emplace_back(p.numel(), 0.0);
      }
    }
  } catch (const NumericError& e) {
    report.finite = false;
    report.message = e.what();
    return report;
  }

  std::mt19937_64 rng(options.seed);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto p = params[pi].second;
    auto values = p.mutable_data();
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), 0);
    if (options.samples_per_tensor > 0 && idx.size() > options.samples_per_tensor) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(options.samples_per_tensor);
      std::sort(idx.begin(), idx.end());
    }
    for (auto i : idx) {
      const double saved = values[i];
      values[i] = saved + options.step;
      const double up = f().item();
      values[i] = saved - options.step;
      const double down = f().item();
      values[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        report.finite = false;
        report.message = "non-finite loss while perturbing " + params[pi].first;
        return report;
      }
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic[pi][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.abs_floor});
      const double rel = std::abs(a - numeric) / denom;
      ++report.elements_checked;
      if (report.worst_tensor.empty() || rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_tensor = params[pi].first;
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  report.passed = report.finite && report.max_rel_error < options.tolerance;
  std::ostringstream os;
  os << "checked " << report.elements_checked << " elements, max relative error " << report.max_rel_error;
  if (!report.worst_tensor.empty()) {
    os << " at " << report.worst_tensor << "[" << report.worst_index << "] (analytic " << report.worst_analytic
       << ", numeric " << report.worst_numeric << ")";
  }
  report.message = os.str();
  return report;
}

}  // namespace ctl
