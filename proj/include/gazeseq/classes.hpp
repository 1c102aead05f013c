#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "gazeseq/scenario.hpp"

namespace gazeseq {

/// Angular bins partitioning the yaw range into gaze classes.
struct ClassBins {
  std::vector<double> edges;  // n_classes + 1, strictly increasing

  std::size_t n_classes() const { return edges.empty() ? 0 : edges.size() - 1; }

  static ClassBins equal_width(double min_deg, double max_deg, std::size_t n) {
    if (n == 0 || !(min_deg < max_deg)) throw Error("invalid class bin range");
    ClassBins b;
    b.edges.resize(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
      b.edges[i] = min_deg + (max_deg - min_deg) * static_cast<double>(i) / static_cast<double>(n);
    }
    b.edges.back() = max_deg;
    return b;
  }

  void validate() const {
    if (edges.size() < 3) throw Error("class bins need at least two classes");
    for (std::size_t i = 1; i < edges.size(); ++i) {
      if (!(edges[i - 1] < edges[i])) throw Error("class bin edges must be strictly increasing");
    }
  }

  double center(std::size_t cls) const {
    if (cls >= n_classes()) throw Error("class index out of range");
    return 0.5 * (edges[cls] + edges[cls + 1]);
  }
};

/// Default bins: n_classes equal-width bins over the convention's [min_deg, max_deg].
inline ClassBins default_bins(const ScenarioSpec& spec) {
  return ClassBins::equal_width(spec.convention.min_deg, spec.convention.max_deg,
                                static_cast<std::size_t>(spec.n_classes));
}

/// Clamps to the bin range, then returns i with edges[i] <= yaw < edges[i+1]; the top edge
/// belongs to the last class.
inline std::size_t angle_to_class(double yaw_deg, const ClassBins& bins) {
  if (std::isnan(yaw_deg)) throw Error("angle_to_class: yaw is NaN");
  const double y = std::clamp(yaw_deg, bins.edges.front(), bins.edges.back());
  auto it = std::upper_bound(bins.edges.begin(), bins.edges.end(), y);
  const auto idx = static_cast<std::size_t>(it - bins.edges.begin());
  return std::min(idx == 0 ? 0 : idx - 1, bins.n_classes() - 1);
}

}  // namespace gazeseq
