#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "gazeseq/nn/batch.hpp"
#include "gazeseq/nn/ops.hpp"
#include "gazeseq/nn/param.hpp"

namespace gazeseq {

using nn::Matrix;

inline constexpr Eigen::Index kLstmUnits = 32;
inline constexpr Eigen::Index kDenseUnits = 32;
inline constexpr double kLstmDropout = 0.2;

/// One direction of an LSTM layer. Gates are packed (i, f, g, o) along the 4h axis:
/// z = W x + U h + b, c' = f*c + i*g, h' = o*tanh(c').
struct LstmCellParams {
  nn::Param W;  // 4h x d
  nn::Param U;  // 4h x h
  nn::Param b;  // 1 x 4h

  LstmCellParams() = default;
  LstmCellParams(const std::string& prefix, Eigen::Index input_dim, Eigen::Index units)
      : W(prefix + ".W", 4 * units, input_dim), U(prefix + ".U", 4 * units, units), b(prefix + ".b", 1, 4 * units) {}

  Eigen::Index units() const { return U.value.cols(); }
  Eigen::Index input_dim() const { return W.value.cols(); }

  void init(std::mt19937_64& rng) {
    const auto h = units();
    Matrix wt(input_dim(), 4 * h);
    nn::glorot_uniform(wt, static_cast<double>(input_dim()), static_cast<double>(4 * h), rng);
    W.value = wt.transpose();
    Matrix ut(h, 4 * h);
    nn::orthogonal(ut, rng);
    U.value = ut.transpose();
    b.value.setZero();
    b.value.block(0, h, 1, h).setOnes();  // forget gate
  }
};

struct LstmState {
  Eigen::VectorXd h;
  Eigen::VectorXd c;
};

/// Single LSTM step for one sample.
inline LstmState lstm_cell_step(const LstmCellParams& p, const Eigen::VectorXd& x, const Eigen::VectorXd& h_prev,
                                const Eigen::VectorXd& c_prev) {
  const auto h = p.units();
  if (x.size() != p.input_dim() || h_prev.size() != h || c_prev.size() != h) {
    throw Error("lstm_cell_step: shape mismatch");
  }
  const Eigen::VectorXd z = p.W.value * x + p.U.value * h_prev + p.b.value.row(0).transpose();
  LstmState s;
  s.c.resize(h);
  s.h.resize(h);
  for (Eigen::Index k = 0; k < h; ++k) {
    const double i = nn::sigmoid(z[k]);
    const double f = nn::sigmoid(z[h + k]);
    const double g = std::tanh(z[2 * h + k]);
    const double o = nn::sigmoid(z[3 * h + k]);
    s.c[k] = f * c_prev[k] + i * g;
    s.h[k] = o * std::tanh(s.c[k]);
  }
  return s;
}

namespace detail {

/// Activations of one direction over a sequence, indexed by time step.
struct DirectionCache {
  bool reverse = false;
  std::vector<Matrix> gates;  // B x 4h post-activation (i, f, g, o)
  std::vector<Matrix> c;
  std::vector<Matrix> tanh_c;
  std::vector<Matrix> h;
};

inline DirectionCache run_direction(const LstmCellParams& p, const std::vector<Matrix>& xs, bool reverse) {
  const auto T = xs.size();
  const auto B = xs.front().rows();
  const auto H = p.units();
  DirectionCache cache;
  cache.reverse = reverse;
  cache.gates.resize(T);
  cache.c.resize(T);
  cache.tanh_c.resize(T);
  cache.h.resize(T);
  Matrix h_prev = Matrix::Zero(B, H), c_prev = Matrix::Zero(B, H);
  const Matrix Wt = p.W.value.transpose();
  const Matrix Ut = p.U.value.transpose();
  for (std::size_t s = 0; s < T; ++s) {
    const std::size_t t = reverse ? T - 1 - s : s;
    Matrix z = xs[t] * Wt;
    z.noalias() += h_prev * Ut;
    z.rowwise() += p.b.value.row(0);
    z.leftCols(2 * H) = nn::sigmoid_of(z.leftCols(2 * H));
    z.middleCols(2 * H, H) = nn::tanh_of(z.middleCols(2 * H, H));
    z.rightCols(H) = nn::sigmoid_of(z.rightCols(H));
    Matrix c = z.middleCols(H, H).cwiseProduct(c_prev) + z.leftCols(H).cwiseProduct(z.middleCols(2 * H, H));
    Matrix tc = nn::tanh_of(c);
    Matrix h = z.rightCols(H).cwiseProduct(tc);
    cache.gates[t] = std::move(z);
    cache.c[t] = c;
    cache.tanh_c[t] = std::move(tc);
    cache.h[t] = h;
    h_prev = std::move(h);
    c_prev = std::move(c);
  }
  return cache;
}

/// Backpropagation through time for one direction. `dh[t]` is the gradient arriving at the
/// output of step t (empty matrices mean zero). Accumulates parameter gradients and returns the
/// gradient with respect to each input step.
inline std::vector<Matrix> backprop_direction(LstmCellParams& p, const DirectionCache& cache,
                                              const std::vector<Matrix>& xs, const std::vector<Matrix>& dh) {
  const auto T = xs.size();
  const auto B = xs.front().rows();
  const auto H = p.units();
  std::vector<Matrix> dx(T);
  Matrix dh_next = Matrix::Zero(B, H), dc_next = Matrix::Zero(B, H);
  Matrix dz(B, 4 * H);
  for (std::size_t s = T; s-- > 0;) {
    const std::size_t t = cache.reverse ? T - 1 - s : s;
    const bool first = s == 0;
    const std::size_t t_prev = cache.reverse ? t + 1 : t - 1;  // valid only when !first
    Matrix dht = dh_next;
    if (dh[t].size() != 0) dht += dh[t];
    const Matrix& g = cache.gates[t];
    const Matrix& tc = cache.tanh_c[t];
    for (Eigen::Index r = 0; r < B; ++r) {
      for (Eigen::Index k = 0; k < H; ++k) {
        const double gi = g(r, k), gf = g(r, H + k), gg = g(r, 2 * H + k), go = g(r, 3 * H + k);
        const double c_prev = first ? 0.0 : cache.c[t_prev](r, k);
        const double dc = dht(r, k) * go * (1.0 - tc(r, k) * tc(r, k)) + dc_next(r, k);
        dz(r, k) = dc * gg * gi * (1.0 - gi);
        dz(r, H + k) = dc * c_prev * gf * (1.0 - gf);
        dz(r, 2 * H + k) = dc * gi * (1.0 - gg * gg);
        dz(r, 3 * H + k) = dht(r, k) * tc(r, k) * go * (1.0 - go);
        dc_next(r, k) = dc * gf;
      }
    }
    p.W.grad.noalias() += dz.transpose() * xs[t];
    if (!first) p.U.grad.noalias() += dz.transpose() * cache.h[t_prev];
    p.b.grad += dz.colwise().sum();
    dx[t] = dz * p.W.value;
    dh_next = dz * p.U.value;
  }
  return dx;
}

inline std::vector<Matrix> concat_directions(const DirectionCache& fwd, const DirectionCache& bwd) {
  std::vector<Matrix> out(fwd.h.size());
  for (std::size_t t = 0; t < out.size(); ++t) {
    out[t].resize(fwd.h[t].rows(), fwd.h[t].cols() + bwd.h[t].cols());
    out[t] << fwd.h[t], bwd.h[t];
  }
  return out;
}

}  // namespace detail

/// A bidirectional pair sharing one input sequence.
struct BiLstmLayer {
  LstmCellParams fwd;
  LstmCellParams bwd;

  /// Full output sequence: step t is [forward h_t, backward h_t].
  std::vector<Matrix> sequence(const std::vector<Matrix>& xs) const {
    return detail::concat_directions(detail::run_direction(fwd, xs, false), detail::run_direction(bwd, xs, true));
  }
};

/// Two stacked bidirectional LSTM layers (the second returns final states only), dropout,
/// a sigmoid dense layer and a softmax head.
class LstmGazeModel {
 public:
  BiLstmLayer layer1;
  BiLstmLayer layer2;
  nn::Param dense_w;  // 64 x 32
  nn::Param dense_b;  // 1 x 32
  nn::Param head_w;   // 32 x n_classes
  nn::Param head_b;   // 1 x n_classes
  nn::RegConfig reg;
  double dropout_rate = kLstmDropout;

  static constexpr std::uint8_t kArchId = 1;
  static constexpr const char* kArchName = "lstm";

  explicit LstmGazeModel(std::size_t n_classes = 6, std::uint64_t seed = 0)
      : dense_w("dense.W", 2 * kLstmUnits, kDenseUnits),
        dense_b("dense.b", 1, kDenseUnits),
        head_w("head.W", kDenseUnits, static_cast<Eigen::Index>(n_classes)),
        head_b("head.b", 1, static_cast<Eigen::Index>(n_classes)) {
    if (n_classes < 2) throw Error("LstmGazeModel needs at least two classes");
    const auto d = static_cast<Eigen::Index>(kNumFeatures);
    layer1 = {LstmCellParams("lstm1.fwd", d, kLstmUnits), LstmCellParams("lstm1.bwd", d, kLstmUnits)};
    layer2 = {LstmCellParams("lstm2.fwd", 2 * kLstmUnits, kLstmUnits),
              LstmCellParams("lstm2.bwd", 2 * kLstmUnits, kLstmUnits)};
    reg.applies_to = {layer2.fwd.W.name, layer2.bwd.W.name};

    std::mt19937_64 rng(nn::mix_seed(seed, kArchId));
    layer1.fwd.init(rng);
    layer1.bwd.init(rng);
    layer2.fwd.init(rng);
    layer2.bwd.init(rng);
    nn::glorot_uniform(dense_w.value, 2.0 * kLstmUnits, kDenseUnits, rng);
    nn::glorot_uniform(head_w.value, kDenseUnits, static_cast<double>(n_classes), rng);

    const std::size_t expected = n_classes == 6 ? 41702 : n_classes == 7 ? 41735 : 0;
    if (expected != 0 && param_count() != expected) throw Error("LSTM parameter count mismatch");
  }

  std::size_t n_classes() const { return static_cast<std::size_t>(head_b.value.cols()); }

  /// Documented parameter order; weight files and the optimizer follow it.
  nn::ParamList params() {
    return {&layer1.fwd.W, &layer1.fwd.U, &layer1.fwd.b, &layer1.bwd.W, &layer1.bwd.U, &layer1.bwd.b,
            &layer2.fwd.W, &layer2.fwd.U, &layer2.fwd.b, &layer2.bwd.W, &layer2.bwd.U, &layer2.bwd.b,
            &dense_w,      &dense_b,      &head_w,       &head_b};
  }
  nn::ConstParamList params() const {
    auto list = const_cast<LstmGazeModel*>(this)->params();
    return {list.begin(), list.end()};
  }
  std::size_t param_count() const {
    const auto list = params();
    return nn::count_parameters(list);
  }

  /// Class probabilities, one row per window. Eval mode unless stated.
  Matrix forward(const nn::Batch& x, nn::Mode mode = nn::Mode::eval, std::uint64_t seed = 0) const {
    return run(x, mode, seed).probs;
  }

  Matrix predict(const nn::Batch& x) const { return forward(x); }

  /// Loss (weighted cross-entropy plus the layer-2 kernel penalty) without touching gradients.
  double loss(const nn::Batch& x, const Matrix& target_weights, nn::Mode mode = nn::Mode::eval,
              std::uint64_t seed = 0) const {
    const auto st = run(x, mode, seed);
    Matrix dlogits;
    return nn::weighted_cross_entropy(st.probs, target_weights, dlogits) + penalty();
  }

  /// Zeroes all gradients, then fills them with d(loss)/d(param); returns the loss.
  double loss_and_gradients(const nn::Batch& x, const Matrix& target_weights, nn::Mode mode = nn::Mode::train,
                            std::uint64_t seed = 0) {
    for (auto* p : params()) p->zero_grad();
    auto st = run(x, mode, seed);
    Matrix dlogits;
    double value = nn::weighted_cross_entropy(st.probs, target_weights, dlogits);

    head_w.grad.noalias() += st.hidden.transpose() * dlogits;
    head_b.grad += dlogits.colwise().sum();
    Matrix dpre = (dlogits * head_w.value.transpose()).cwiseProduct(
        st.hidden.cwiseProduct((1.0 - st.hidden.array()).matrix()));
    dense_w.grad.noalias() += st.dropped.transpose() * dpre;
    dense_b.grad += dpre.colwise().sum();
    Matrix dfinal = (dpre * dense_w.value.transpose()).cwiseProduct(st.mask);

    const std::size_t T = x.seq_len();
    std::vector<Matrix> dh_f(T), dh_b(T);
    dh_f[T - 1] = dfinal.leftCols(kLstmUnits);
    dh_b[0] = dfinal.rightCols(kLstmUnits);
    const auto dy_f = detail::backprop_direction(layer2.fwd, st.l2f, st.y1, dh_f);
    const auto dy_b = detail::backprop_direction(layer2.bwd, st.l2b, st.y1, dh_b);

    std::vector<Matrix> d1_f(T), d1_b(T);
    for (std::size_t t = 0; t < T; ++t) {
      Matrix dy = dy_f[t] + dy_b[t];
      d1_f[t] = dy.leftCols(kLstmUnits);
      d1_b[t] = dy.rightCols(kLstmUnits);
    }
    detail::backprop_direction(layer1.fwd, st.l1f, x.steps, d1_f);
    detail::backprop_direction(layer1.bwd, st.l1b, x.steps, d1_b);

    for (auto* p : params()) {
      if (reg.applies_to.contains(p->name)) {
        auto pen = nn::l1l2_penalty(*p, reg);
        value += pen.value;
        p->grad += pen.grad;
      }
    }
    if (!std::isfinite(value)) throw Error("LSTM loss is not finite");
    return value;
  }

  double penalty() const {
    double total = 0.0;
    for (const auto* p : params()) {
      if (reg.applies_to.contains(p->name)) total += nn::l1l2_penalty(*p, reg).value;
    }
    return total;
  }

 private:
  struct ForwardState {
    detail::DirectionCache l1f, l1b, l2f, l2b;
    std::vector<Matrix> y1;
    Matrix mask, dropped, hidden, probs;
  };

  ForwardState run(const nn::Batch& x, nn::Mode mode, std::uint64_t seed) const {
    if (x.seq_len() == 0 || x.steps.front().cols() != layer1.fwd.input_dim()) {
      throw Error("LSTM input must have 24 features per step");
    }
    ForwardState st;
    st.l1f = detail::run_direction(layer1.fwd, x.steps, false);
    st.l1b = detail::run_direction(layer1.bwd, x.steps, true);
    st.y1 = detail::concat_directions(st.l1f, st.l1b);
    st.l2f = detail::run_direction(layer2.fwd, st.y1, false);
    st.l2b = detail::run_direction(layer2.bwd, st.y1, true);

    const auto B = x.size();
    Matrix final_state(B, 2 * kLstmUnits);
    final_state << st.l2f.h.back(), st.l2b.h.front();
    if (mode == nn::Mode::train && dropout_rate > 0.0) {
      st.mask = nn::dropout_mask(B, 2 * kLstmUnits, dropout_rate, seed);
    } else {
      st.mask = Matrix::Ones(B, 2 * kLstmUnits);
    }
    st.dropped = final_state.cwiseProduct(st.mask);
    st.hidden = st.dropped * dense_w.value;
    st.hidden.rowwise() += dense_b.value.row(0);
    st.hidden = st.hidden.unaryExpr([](double v) { return nn::sigmoid(v); });
    st.probs = st.hidden * head_w.value;
    st.probs.rowwise() += head_b.value.row(0);
    nn::softmax_rows(st.probs);
    return st;
  }
};

}  // namespace gazeseq
