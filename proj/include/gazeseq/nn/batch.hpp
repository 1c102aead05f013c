#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gazeseq/nn/ops.hpp"
#include "gazeseq/nn/tensor.hpp"
#include "gazeseq/preprocess.hpp"

namespace gazeseq::nn {

/// A batch of windows laid out time-major: steps[t] is a B x 24 matrix holding frame t of
/// every window in the batch.
struct Batch {
  std::vector<Matrix> steps;

  Eigen::Index size() const { return steps.empty() ? 0 : steps.front().rows(); }
  std::size_t seq_len() const { return steps.size(); }
};

inline Batch make_batch(std::span<const WindowBytes* const> windows) {
  Batch b;
  const auto n = static_cast<Eigen::Index>(windows.size());
  b.steps.assign(kSeqLen, Matrix::Zero(n, static_cast<Eigen::Index>(kNumFeatures)));
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& w = *windows[static_cast<std::size_t>(r)];
    for (std::size_t t = 0; t < kSeqLen; ++t) {
      for (std::size_t f = 0; f < kNumFeatures; ++f) {
        b.steps[t](r, static_cast<Eigen::Index>(f)) = w[t * kNumFeatures + f];
      }
    }
  }
  return b;
}

inline Batch make_batch(const WindowBytes& window) {
  const WindowBytes* p = &window;
  return make_batch(std::span<const WindowBytes* const>(&p, 1));
}

/// Single real-valued window (rows = time steps, cols = features).
inline Batch make_batch(const Matrix& window) {
  Batch b;
  b.steps.reserve(static_cast<std::size_t>(window.rows()));
  for (Eigen::Index t = 0; t < window.rows(); ++t) b.steps.push_back(window.row(t));
  return b;
}

/// One-hot target-weight matrix for a single class.
inline Matrix one_hot(std::size_t n_classes, std::size_t target) {
  Matrix m = Matrix::Zero(1, static_cast<Eigen::Index>(n_classes));
  m(0, static_cast<Eigen::Index>(target)) = 1.0;
  return m;
}

/// Weighted cross-entropy over a batch: each row of `weights` holds per-class sample counts
/// for the corresponding window. Returns the loss averaged over total weight and writes the
/// gradient with respect to the logits.
inline double weighted_cross_entropy(const Matrix& probs, const Matrix& weights, Matrix& grad_logits) {
  if (probs.rows() != weights.rows() || probs.cols() != weights.cols()) {
    throw Error("target weights do not match the output shape");
  }
  const double total = weights.sum();
  if (!(total > 0.0)) throw Error("target weights must sum to a positive value");
  double loss = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    const double w = weights.data()[i];
    if (w != 0.0) loss -= w * std::log(probs.data()[i] + kLogFloor);
  }
  const Eigen::VectorXd row_weight = weights.rowwise().sum();
  grad_logits = (probs.array().colwise() * row_weight.array()).matrix() - weights;
  grad_logits /= total;
  return loss / total;
}

}  // namespace gazeseq::nn
