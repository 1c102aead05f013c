#pragma once

#include <cmath>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "gazeseq/nn/tensor.hpp"

namespace gazeseq::nn {

/// A trainable tensor with its gradient and Adam moments.
struct Param {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix m;
  Matrix v;

  Param() = default;
  Param(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)),
        value(Matrix::Zero(rows, cols)),
        grad(Matrix::Zero(rows, cols)),
        m(Matrix::Zero(rows, cols)),
        v(Matrix::Zero(rows, cols)) {}

  Eigen::Index size() const { return value.size(); }
  void zero_grad() { grad.setZero(); }
};

using ParamList = std::vector<Param*>;
using ConstParamList = std::vector<const Param*>;

inline std::size_t count_parameters(std::span<const Param* const> params) {
  std::size_t n = 0;
  for (const Param* p : params) n += static_cast<std::size_t>(p->size());
  return n;
}

struct RegConfig {
  double l1 = 1e-5;
  double l2 = 1e-4;
  std::set<std::string> applies_to;
};

struct Penalty {
  double value = 0.0;
  Matrix grad;  // increment to add to Param::grad
};

/// l1 * sum|w| + l2 * sum w^2, with gradient l1 * sign(w) + 2 * l2 * w (sign(0) = 0).
inline Penalty l1l2_penalty(const Param& param, const RegConfig& cfg) {
  if (cfg.l1 < 0.0 || cfg.l2 < 0.0) throw Error("regularizer factors must be non-negative");
  const auto& w = param.value;
  Penalty p;
  p.value = cfg.l1 * w.cwiseAbs().sum() + cfg.l2 * w.squaredNorm();
  p.grad = cfg.l1 * w.unaryExpr([](double x) { return static_cast<double>((x > 0) - (x < 0)); }) +
           2.0 * cfg.l2 * w;
  return p;
}

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update at step `t` (1-based). Gradients are zeroed afterwards.
inline void adam_step(std::span<Param* const> params, const AdamConfig& cfg, std::uint64_t t) {
  if (t == 0) throw Error("adam_step: step counter must start at 1");
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (Param* p : params) {
    require_finite(p->grad, p->name.c_str());
    p->m = cfg.beta1 * p->m + (1.0 - cfg.beta1) * p->grad;
    p->v = cfg.beta2 * p->v + (1.0 - cfg.beta2) * p->grad.cwiseAbs2();
    p->value.array() -=
        cfg.lr * (p->m.array() / c1) / ((p->v.array() / c2).sqrt() + cfg.eps);
    p->zero_grad();
  }
}

}  // namespace gazeseq::nn
