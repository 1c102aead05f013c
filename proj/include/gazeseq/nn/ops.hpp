#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>

#include "gazeseq/nn/tensor.hpp"

namespace gazeseq::nn {

inline constexpr double kLogFloor = 1e-12;

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double sigmoid_grad(double x) {
  const double s = sigmoid(x);
  return s * (1.0 - s);
}

inline double tanh_grad(double x) {
  const double t = std::tanh(x);
  return 1.0 - t * t;
}

/// Swish / SiLU: x * sigmoid(x).
inline double silu(double x) { return x * sigmoid(x); }

inline double silu_grad(double x) {
  const double s = sigmoid(x);
  return s + x * s * (1.0 - s);
}

/// Elementwise logistic over a whole matrix with the vectorized exponential; saturates to
/// exactly 0 or 1 instead of overflowing.
inline Matrix sigmoid_of(const Eigen::Ref<const Matrix>& x) {
  return (1.0 + (-x.array()).exp()).inverse().matrix();
}

/// Elementwise tanh over a whole matrix.
inline Matrix tanh_of(const Eigen::Ref<const Matrix>& x) {
  return x.array().tanh().matrix();
}

/// Max-shifted softmax. Throws on non-finite logits.
inline Vector stable_softmax(const Vector& logits) {
  require_finite(logits, "softmax logits");
  if (logits.size() == 0) throw Error("softmax of an empty vector");
  const double shift = logits.maxCoeff();
  Vector out = (logits.array() - shift).exp().matrix();
  out /= out.sum();
  return out;
}

/// Row-wise stable softmax, in place.
inline void softmax_rows(Matrix& logits) {
  require_finite(logits, "softmax logits");
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    const double shift = row.maxCoeff();
    row = (row.array() - shift).exp().matrix();
    row /= row.sum();
  }
}

struct CrossEntropy {
  double loss = 0.0;
  Vector grad_logits;  // probs - onehot(target)
};

/// Categorical cross-entropy of a softmax output against a class index.
/// The gradient is with respect to the logits that produced `probs`.
inline CrossEntropy cross_entropy(const Vector& probs, std::size_t target) {
  if (target >= static_cast<std::size_t>(probs.size())) {
    throw Error("cross_entropy: target " + std::to_string(target) + " out of range");
  }
  CrossEntropy ce;
  ce.loss = -std::log(probs[static_cast<Eigen::Index>(target)] + kLogFloor);
  ce.grad_logits = probs;
  ce.grad_logits[static_cast<Eigen::Index>(target)] -= 1.0;
  return ce;
}

/// Inverted-dropout mask: zeros with probability `rate`, survivors scaled by 1/(1-rate).
inline Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, std::uint64_t seed) {
  if (rate < 0.0 || rate >= 1.0) throw Error("dropout rate must lie in [0, 1)");
  Matrix mask(rows, cols);
  if (rate == 0.0) {
    mask.setOnes();
    return mask;
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    mask.data()[i] = u(rng) < rate ? 0.0 : keep_scale;
  }
  return mask;
}

inline Matrix dropout_apply(const Matrix& x, double rate, Mode mode, std::uint64_t seed) {
  if (rate < 0.0 || rate >= 1.0) throw Error("dropout rate must lie in [0, 1)");
  if (mode == Mode::eval || rate == 0.0) return x;
  return x.cwiseProduct(dropout_mask(x.rows(), x.cols(), rate, seed));
}

/// Glorot/Xavier uniform initialization of a fan_in x fan_out shaped kernel.
inline void glorot_uniform(Matrix& w, double fan_in, double fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
}

/// Orthogonal initialization (QR of a Gaussian matrix, sign-corrected).
inline void orthogonal(Matrix& w, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  const Eigen::Index rows = w.rows(), cols = w.cols();
  const bool tall = rows >= cols;
  Eigen::MatrixXd a(tall ? rows : cols, tall ? cols : rows);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = n(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(a.rows(), a.cols());
  const Eigen::MatrixXd r = qr.matrixQR();
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    if (r(j, j) < 0) q.col(j) *= -1.0;
  }
  if (tall) {
    w = q;
  } else {
    w = q.transpose();
  }
}

}  // namespace gazeseq::nn
