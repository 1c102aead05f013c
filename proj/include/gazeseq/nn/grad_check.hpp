#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gazeseq/nn/param.hpp"

namespace gazeseq::nn {

struct GradCheckConfig {
  double step = 1e-5;
  std::size_t samples_per_tensor = 200;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  Eigen::Index worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
  double loss = 0.0;
  // Coordinates whose disagreement exceeds both the 1e-4 relative tolerance and the resolution
  // of a central difference of the loss (a few units in the last place divided by 2h).
  std::size_t beyond_rounding = 0;
};

/// Compares analytic gradients against central differences.
///
/// `loss_fn(with_grad)` must be deterministic. When `with_grad` is true it must zero and then
/// populate every Param::grad before returning the loss; when false it only evaluates the loss.
/// Coordinates are sampled without replacement, or all of them for small tensors.
inline GradCheckReport grad_check(const std::function<double(bool)>& loss_fn,
                                  std::span<Param* const> params, const GradCheckConfig& cfg = {}) {
  const double base = loss_fn(true);
  if (!std::isfinite(base)) throw Error("grad_check: non-finite loss");

  std::vector<Matrix> analytic;
  analytic.reserve(params.size());
  for (const Param* p : params) analytic.push_back(p->grad);

  std::mt19937_64 rng(cfg.seed);
  GradCheckReport report;
  report.loss = base;
  const double ulp = std::nextafter(std::abs(base), INFINITY) - std::abs(base);
  const double resolution = 4.0 * ulp / (2.0 * cfg.step);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Param& p = *params[pi];
    std::vector<Eigen::Index> coords(static_cast<std::size_t>(p.size()));
    std::iota(coords.begin(), coords.end(), Eigen::Index{0});
    if (coords.size() > cfg.samples_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(cfg.samples_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    for (Eigen::Index idx : coords) {
      double& w = p.value.data()[idx];
      const double saved = w;
      w = saved + cfg.step;
      const double up = loss_fn(false);
      w = saved - cfg.step;
      const double down = loss_fn(false);
      w = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) throw Error("grad_check: non-finite loss");
      const double numeric = (up - down) / (2.0 * cfg.step);
      const double a = analytic[pi].data()[idx];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      ++report.coordinates;
      if (std::abs(a - numeric) > 1e-4 * std::max(std::abs(a), std::abs(numeric)) + resolution) {
        ++report.beyond_rounding;
      }
      if (report.worst_index < 0 || rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = p.name;
        report.worst_index = idx;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  // Leave the gradients as the analytic pass produced them.
  for (std::size_t pi = 0; pi < params.size(); ++pi) params[pi]->grad = analytic[pi];
  return report;
}

}  // namespace gazeseq::nn
