#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gazeseq/nn/batch.hpp"
#include "gazeseq/nn/ops.hpp"
#include "gazeseq/nn/param.hpp"

namespace gazeseq {

using nn::Matrix;

inline constexpr Eigen::Index kModelDim = 24;
inline constexpr Eigen::Index kHeads = 4;
inline constexpr Eigen::Index kHeadDim = kModelDim / kHeads;
inline constexpr Eigen::Index kFeedForward = 1024;
inline constexpr std::size_t kEncoderBlocks = 2;
inline constexpr double kLayerNormEps = 1e-9;

static_assert(kModelDim % kHeads == 0);

/// Row layout used throughout: a batch of B windows is a (B*T) x 24 matrix, window b occupying
/// rows [b*T, (b+1)*T). Projections use y = x W + b with W shaped in x out.
struct EncoderBlockParams {
  nn::Param wq, bq, wk, bk, wv, bv, wo, bo;
  nn::Param ln1_gain, ln1_bias, ln2_gain, ln2_bias;
  nn::Param ff1_w, ff1_b, ff2_w, ff2_b;

  EncoderBlockParams() = default;
  explicit EncoderBlockParams(const std::string& p)
      : wq(p + ".attn.Wq", kModelDim, kModelDim), bq(p + ".attn.bq", 1, kModelDim),
        wk(p + ".attn.Wk", kModelDim, kModelDim), bk(p + ".attn.bk", 1, kModelDim),
        wv(p + ".attn.Wv", kModelDim, kModelDim), bv(p + ".attn.bv", 1, kModelDim),
        wo(p + ".attn.Wo", kModelDim, kModelDim), bo(p + ".attn.bo", 1, kModelDim),
        ln1_gain(p + ".ln1.gain", 1, kModelDim), ln1_bias(p + ".ln1.bias", 1, kModelDim),
        ln2_gain(p + ".ln2.gain", 1, kModelDim), ln2_bias(p + ".ln2.bias", 1, kModelDim),
        ff1_w(p + ".ffn.W1", kModelDim, kFeedForward), ff1_b(p + ".ffn.b1", 1, kFeedForward),
        ff2_w(p + ".ffn.W2", kFeedForward, kModelDim), ff2_b(p + ".ffn.b2", 1, kModelDim) {}

  void init(std::mt19937_64& rng) {
    for (nn::Param* w : {&wq, &wk, &wv, &wo, &ff1_w, &ff2_w}) {
      nn::glorot_uniform(w->value, static_cast<double>(w->value.rows()), static_cast<double>(w->value.cols()), rng);
    }
    ln1_gain.value.setOnes();
    ln2_gain.value.setOnes();
  }

  nn::ParamList params() {
    return {&wq, &bq, &wk, &bk, &wv, &bv, &wo, &bo, &ln1_gain, &ln1_bias,
            &ln2_gain, &ln2_bias, &ff1_w, &ff1_b, &ff2_w, &ff2_b};
  }
};

/// Fixed sinusoidal position table, T x dim.
inline Matrix sinusoidal_positions(Eigen::Index T, Eigen::Index dim) {
  Matrix pe(T, dim);
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index i = 0; i < dim; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(dim));
      pe(t, i) = std::sin(static_cast<double>(t) * freq);
      if (i + 1 < dim) pe(t, i + 1) = std::cos(static_cast<double>(t) * freq);
    }
  }
  return pe;
}

namespace detail {

inline Matrix affine(const Matrix& x, const nn::Param& w, const nn::Param& b) {
  Matrix y = x * w.value;
  y.rowwise() += b.value.row(0);
  return y;
}

inline void affine_backward(const Matrix& x, const Matrix& dy, nn::Param& w, nn::Param& b) {
  w.grad.noalias() += x.transpose() * dy;
  b.grad += dy.colwise().sum();
}

struct LayerNormCache {
  Matrix xhat;
  Eigen::VectorXd inv_std;
};

inline Matrix layer_norm(const Matrix& x, const nn::Param& gain, const nn::Param& bias, LayerNormCache& cache) {
  const auto n = static_cast<double>(x.cols());
  cache.xhat.resize(x.rows(), x.cols());
  cache.inv_std.resize(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).sum() / n;
    const double var = (x.row(r).array() - mean).square().sum() / n;
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.inv_std[r] = inv;
    cache.xhat.row(r) = (x.row(r).array() - mean) * inv;
  }
  Matrix y = cache.xhat.array().rowwise() * gain.value.row(0).array();
  y.rowwise() += bias.value.row(0);
  return y;
}

inline Matrix layer_norm_backward(const Matrix& dy, const LayerNormCache& cache, nn::Param& gain, nn::Param& bias) {
  gain.grad += dy.cwiseProduct(cache.xhat).colwise().sum();
  bias.grad += dy.colwise().sum();
  const auto n = static_cast<double>(dy.cols());
  const Matrix dxhat = dy.array().rowwise() * gain.value.row(0).array();
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const double mean_d = dxhat.row(r).sum() / n;
    const double mean_dx = dxhat.row(r).dot(cache.xhat.row(r)) / n;
    dx.row(r) = cache.inv_std[r] * (dxhat.row(r).array() - mean_d - cache.xhat.row(r).array() * mean_dx);
  }
  return dx;
}

struct AttentionCache {
  Matrix q, k, v, concat;
  std::vector<Matrix> probs;  // per (window, head): T x T
};

inline Matrix attention(const EncoderBlockParams& blk, const Matrix& x, Eigen::Index T, AttentionCache& cache) {
  cache.q = affine(x, blk.wq, blk.bq);
  // The key bias shifts every score in a query row by the same amount, which softmax cancels
  // exactly; leaving it out keeps that cancellation exact in floating point too.
  cache.k = x * blk.wk.value;
  cache.v = affine(x, blk.wv, blk.bv);
  const Eigen::Index B = x.rows() / T;
  const double scale = 1.0 / std::sqrt(static_cast<double>(kHeadDim));
  cache.concat.resize(x.rows(), kModelDim);
  cache.probs.resize(static_cast<std::size_t>(B * kHeads));
  for (Eigen::Index b = 0; b < B; ++b) {
    for (Eigen::Index h = 0; h < kHeads; ++h) {
      const auto qh = cache.q.block(b * T, h * kHeadDim, T, kHeadDim);
      const auto kh = cache.k.block(b * T, h * kHeadDim, T, kHeadDim);
      const auto vh = cache.v.block(b * T, h * kHeadDim, T, kHeadDim);
      Matrix s = (qh * kh.transpose()) * scale;
      nn::softmax_rows(s);
      cache.concat.block(b * T, h * kHeadDim, T, kHeadDim).noalias() = s * vh;
      cache.probs[static_cast<std::size_t>(b * kHeads + h)] = std::move(s);
    }
  }
  return affine(cache.concat, blk.wo, blk.bo);
}

inline Matrix attention_backward(EncoderBlockParams& blk, const Matrix& x, Eigen::Index T,
                                 const AttentionCache& cache, const Matrix& dout) {
  affine_backward(cache.concat, dout, blk.wo, blk.bo);
  const Matrix dconcat = dout * blk.wo.value.transpose();
  const Eigen::Index B = x.rows() / T;
  const double scale = 1.0 / std::sqrt(static_cast<double>(kHeadDim));
  Matrix dq(x.rows(), kModelDim), dk(x.rows(), kModelDim), dv(x.rows(), kModelDim);
  for (Eigen::Index b = 0; b < B; ++b) {
    for (Eigen::Index h = 0; h < kHeads; ++h) {
      const Matrix& a = cache.probs[static_cast<std::size_t>(b * kHeads + h)];
      const auto qh = cache.q.block(b * T, h * kHeadDim, T, kHeadDim);
      const auto kh = cache.k.block(b * T, h * kHeadDim, T, kHeadDim);
      const auto vh = cache.v.block(b * T, h * kHeadDim, T, kHeadDim);
      const auto doh = dconcat.block(b * T, h * kHeadDim, T, kHeadDim);
      const Matrix da = doh * vh.transpose();
      dv.block(b * T, h * kHeadDim, T, kHeadDim).noalias() = a.transpose() * doh;
      Matrix ds = a.cwiseProduct(da);
      const Eigen::VectorXd row_dot = ds.rowwise().sum();
      ds -= (a.array().colwise() * row_dot.array()).matrix();
      ds *= scale;
      dq.block(b * T, h * kHeadDim, T, kHeadDim).noalias() = ds * kh;
      dk.block(b * T, h * kHeadDim, T, kHeadDim).noalias() = ds.transpose() * qh;
    }
  }
  affine_backward(x, dq, blk.wq, blk.bq);
  blk.wk.grad.noalias() += x.transpose() * dk;
  affine_backward(x, dv, blk.wv, blk.bv);
  Matrix dx = dq * blk.wq.value.transpose();
  dx.noalias() += dk * blk.wk.value.transpose();
  dx.noalias() += dv * blk.wv.value.transpose();
  return dx;
}

struct BlockCache {
  Matrix input;
  AttentionCache attn;
  LayerNormCache ln1, ln2;
  Matrix x1, ff_pre, ff_sig, ff_act;
};

inline Matrix encoder_block(const EncoderBlockParams& blk, const Matrix& x, Eigen::Index T, BlockCache& c) {
  c.input = x;
  Matrix r1 = x + attention(blk, x, T, c.attn);
  c.x1 = layer_norm(r1, blk.ln1_gain, blk.ln1_bias, c.ln1);
  c.ff_pre = affine(c.x1, blk.ff1_w, blk.ff1_b);
  c.ff_sig = nn::sigmoid_of(c.ff_pre);
  c.ff_act = c.ff_pre.cwiseProduct(c.ff_sig);
  Matrix r2 = c.x1 + affine(c.ff_act, blk.ff2_w, blk.ff2_b);
  return layer_norm(r2, blk.ln2_gain, blk.ln2_bias, c.ln2);
}

inline Matrix encoder_block_backward(EncoderBlockParams& blk, Eigen::Index T, const BlockCache& c, const Matrix& dy) {
  const Matrix dr2 = layer_norm_backward(dy, c.ln2, blk.ln2_gain, blk.ln2_bias);
  affine_backward(c.ff_act, dr2, blk.ff2_w, blk.ff2_b);
  Matrix dff = dr2 * blk.ff2_w.value.transpose();
  // d silu / dx = s + x s (1 - s) with s = sigmoid(x)
  dff.array() *= c.ff_sig.array() + c.ff_pre.array() * c.ff_sig.array() * (1.0 - c.ff_sig.array());
  affine_backward(c.x1, dff, blk.ff1_w, blk.ff1_b);
  Matrix dx1 = dr2;
  dx1.noalias() += dff * blk.ff1_w.value.transpose();
  const Matrix dr1 = layer_norm_backward(dx1, c.ln1, blk.ln1_gain, blk.ln1_bias);
  return dr1 + attention_backward(blk, c.input, T, c.attn, dr1);
}

inline Matrix stack_rows(const nn::Batch& x) {
  const Eigen::Index B = x.size();
  const auto T = static_cast<Eigen::Index>(x.seq_len());
  Matrix out(B * T, x.steps.front().cols());
  for (Eigen::Index b = 0; b < B; ++b) {
    for (Eigen::Index t = 0; t < T; ++t) out.row(b * T + t) = x.steps[static_cast<std::size_t>(t)].row(b);
  }
  return out;
}

}  // namespace detail

/// Multi-head self-attention of one block over a single T x 24 sequence.
/// If `attention_rows` is given it receives the per-head T x T attention matrices.
inline Matrix mha_forward(const EncoderBlockParams& blk, const Matrix& x, std::vector<Matrix>* attention_rows = nullptr) {
  if (x.cols() != kModelDim) throw Error("mha_forward: input must have 24 columns");
  detail::AttentionCache cache;
  Matrix out = detail::attention(blk, x, x.rows(), cache);
  if (attention_rows) *attention_rows = cache.probs;
  return out;
}

/// Window + sinusoidal positions -> 2 post-norm encoder blocks -> max over time -> softmax head.
class TransformerGazeModel {
 public:
  std::vector<EncoderBlockParams> blocks;
  nn::Param head_w;  // 24 x n_classes
  nn::Param head_b;  // 1 x n_classes
  Matrix positional;
  bool use_positional = true;

  static constexpr std::uint8_t kArchId = 2;
  static constexpr const char* kArchName = "transformer";

  explicit TransformerGazeModel(std::size_t n_classes = 6, std::uint64_t seed = 0)
      : head_w("head.W", kModelDim, static_cast<Eigen::Index>(n_classes)),
        head_b("head.b", 1, static_cast<Eigen::Index>(n_classes)),
        positional(sinusoidal_positions(static_cast<Eigen::Index>(kSeqLen), kModelDim)) {
    if (n_classes < 2) throw Error("TransformerGazeModel needs at least two classes");
    std::mt19937_64 rng(nn::mix_seed(seed, kArchId));
    for (std::size_t i = 0; i < kEncoderBlocks; ++i) {
      blocks.emplace_back("enc" + std::to_string(i + 1));
      blocks.back().init(rng);
    }
    nn::glorot_uniform(head_w.value, static_cast<double>(kModelDim), static_cast<double>(n_classes), rng);
  }

  std::size_t n_classes() const { return static_cast<std::size_t>(head_b.value.cols()); }

  nn::ParamList params() {
    nn::ParamList list;
    for (auto& b : blocks) {
      auto bp = b.params();
      list.insert(list.end(), bp.begin(), bp.end());
    }
    list.push_back(&head_w);
    list.push_back(&head_b);
    return list;
  }
  nn::ConstParamList params() const {
    auto list = const_cast<TransformerGazeModel*>(this)->params();
    return {list.begin(), list.end()};
  }
  std::size_t param_count() const {
    const auto list = params();
    return nn::count_parameters(list);
  }

  Matrix forward(const nn::Batch& x, nn::Mode = nn::Mode::eval, std::uint64_t = 0) const {
    return run(x).probs;
  }
  Matrix predict(const nn::Batch& x) const { return forward(x); }

  /// Pooled 24-dimensional encoder summary per window (before the head).
  Matrix pooled(const nn::Batch& x) const { return run(x).pooled; }

  double loss(const nn::Batch& x, const Matrix& target_weights, nn::Mode = nn::Mode::eval, std::uint64_t = 0) const {
    const auto st = run(x);
    Matrix dlogits;
    return nn::weighted_cross_entropy(st.probs, target_weights, dlogits);
  }

  double loss_and_gradients(const nn::Batch& x, const Matrix& target_weights, nn::Mode = nn::Mode::train,
                            std::uint64_t = 0) {
    for (auto* p : params()) p->zero_grad();
    auto st = run(x);
    Matrix dlogits;
    const double value = nn::weighted_cross_entropy(st.probs, target_weights, dlogits);
    detail::affine_backward(st.pooled, dlogits, head_w, head_b);
    const Matrix dpooled = dlogits * head_w.value.transpose();

    // Max-pool routes each pooled coordinate's gradient to its arg-max time step only.
    Matrix dy = Matrix::Zero(st.encoded.rows(), st.encoded.cols());
    for (Eigen::Index b = 0; b < dpooled.rows(); ++b) {
      for (Eigen::Index j = 0; j < dpooled.cols(); ++j) {
        dy(b * st.T + st.argmax(b, j), j) = dpooled(b, j);
      }
    }
    for (std::size_t i = blocks.size(); i-- > 0;) {
      dy = detail::encoder_block_backward(blocks[i], st.T, st.blocks[i], dy);
    }
    if (!std::isfinite(value)) throw Error("Transformer loss is not finite");
    return value;
  }

 private:
  struct ForwardState {
    Eigen::Index T = 0;
    std::vector<detail::BlockCache> blocks;
    Matrix encoded, pooled, probs;
    Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> argmax;
  };

  ForwardState run(const nn::Batch& x) const {
    if (x.seq_len() != kSeqLen || x.steps.front().cols() != kModelDim) {
      throw Error("Transformer input must be 30 x 24 windows");
    }
    ForwardState st;
    st.T = static_cast<Eigen::Index>(x.seq_len());
    Matrix h = detail::stack_rows(x);
    const Eigen::Index B = x.size();
    if (use_positional) {
      for (Eigen::Index b = 0; b < B; ++b) h.middleRows(b * st.T, st.T) += positional;
    }
    st.blocks.resize(blocks.size());
    for (std::size_t i = 0; i < blocks.size(); ++i) h = detail::encoder_block(blocks[i], h, st.T, st.blocks[i]);
    st.encoded = std::move(h);

    st.pooled.resize(B, kModelDim);
    st.argmax.resize(B, kModelDim);
    for (Eigen::Index b = 0; b < B; ++b) {
      for (Eigen::Index j = 0; j < kModelDim; ++j) {
        Eigen::Index best = 0;
        double v = st.encoded(b * st.T, j);
        for (Eigen::Index t = 1; t < st.T; ++t) {
          if (st.encoded(b * st.T + t, j) > v) {  // ties keep the lowest index
            v = st.encoded(b * st.T + t, j);
            best = t;
          }
        }
        st.pooled(b, j) = v;
        st.argmax(b, j) = best;
      }
    }
    st.probs = detail::affine(st.pooled, head_w, head_b);
    nn::softmax_rows(st.probs);
    return st;
  }
};

}  // namespace gazeseq
