#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gazeseq/model.hpp"
#include "gazeseq/nn/batch.hpp"
#include "gazeseq/preprocess.hpp"

namespace gazeseq {


struct TrainConfig {
  Arch arch = Arch::lstm;
  double lr = 0.001;
  std::size_t max_epochs = 100;
  std::size_t patience = 10;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  double val_fraction = 0.1;

  void validate() const {
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw Error("learning rate must be a finite non-negative number");
    if (max_epochs == 0) throw Error("max_epochs must be positive");
    if (patience == 0 || patience >= max_epochs) throw Error("patience must lie in [1, max_epochs)");
    if (batch_size == 0) throw Error("batch_size must be positive");
    if (!(val_fraction > 0.0 && val_fraction < 0.5)) throw Error("val_fraction must lie in (0, 0.5)");
  }
};

/// Distinct windows with per-class sample counts. Identical windows recur across participants
/// (everyone sees the same scene), so training and evaluation work on this compressed form;
/// a batch of entries is the same objective as the batch of all samples they stand for.
struct WindowTable {
  std::vector<WindowBytes> windows;
  Matrix counts;  // windows.size() x n_classes

  std::size_t size() const { return windows.size(); }
  double total() const { return counts.sum(); }
};

inline WindowTable tabulate(std::span<const SequenceSample* const> samples, std::size_t n_classes) {
  std::map<WindowBytes, std::size_t> index;
  std::vector<std::vector<double>> rows;
  WindowTable t;
  for (const auto* s : samples) {
    if (s->target >= n_classes) throw Error("sample target out of range");
    auto [it, inserted] = index.try_emplace(s->features, t.windows.size());
    if (inserted) {
      t.windows.push_back(s->features);
      rows.emplace_back(n_classes, 0.0);
    }
    rows[it->second][s->target] += 1.0;
  }
  t.counts.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n_classes));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < n_classes; ++c) t.counts(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return t;
}

/// Zero-based rank of `target` when classes are ordered by descending probability, equal
/// probabilities ordered by lower class index first.
inline std::size_t class_rank(const Eigen::Ref<const Eigen::RowVectorXd>& probs, std::size_t target) {
  const double pt = probs[static_cast<Eigen::Index>(target)];
  std::size_t rank = 0;
  for (Eigen::Index c = 0; c < probs.size(); ++c) {
    if (probs[c] > pt || (probs[c] == pt && static_cast<std::size_t>(c) < target)) ++rank;
  }
  return rank;
}

/// Class indices ordered by descending probability (ties: lower index first).
inline std::vector<std::size_t> ranked_classes(const Eigen::Ref<const Eigen::RowVectorXd>& probs) {
  std::vector<std::size_t> order(static_cast<std::size_t>(probs.size()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return probs[static_cast<Eigen::Index>(a)] > probs[static_cast<Eigen::Index>(b)];
  });
  return order;
}

inline Matrix predict_windows(const GazeModel& model, std::span<const WindowBytes> windows,
                              std::size_t chunk = 256) {
  Matrix probs(static_cast<Eigen::Index>(windows.size()), static_cast<Eigen::Index>(model.n_classes()));
  std::vector<const WindowBytes*> ptrs;
  for (std::size_t begin = 0; begin < windows.size(); begin += chunk) {
    const std::size_t end = std::min(windows.size(), begin + chunk);
    ptrs.clear();
    for (std::size_t i = begin; i < end; ++i) ptrs.push_back(&windows[i]);
    probs.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin)) =
        model.forward(nn::make_batch(ptrs));
  }
  return probs;
}

/// Top-k accuracy for k = 1..n_classes over a window table.
inline std::vector<double> topk_curve(const GazeModel& model, const WindowTable& table) {
  const auto n = model.n_classes();
  if (table.size() == 0) throw Error("cannot evaluate an empty sample set");
  if (static_cast<std::size_t>(table.counts.cols()) != n) throw Error("class count mismatch");
  const Matrix probs = predict_windows(model, table.windows);
  std::vector<double> hits(n, 0.0);
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const double w = table.counts(r, static_cast<Eigen::Index>(c));
      if (w != 0.0) hits[class_rank(probs.row(r), c)] += w;
    }
  }
  const double total = table.total();
  std::vector<double> curve(n);
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    acc += hits[k];
    curve[k] = acc / total;
  }
  curve.back() = 1.0;
  return curve;
}

inline double evaluate_topk(const GazeModel& model, std::span<const SequenceSample* const> samples, std::size_t k) {
  if (k < 1 || k > model.n_classes()) {
    throw Error("k must lie in [1, " + std::to_string(model.n_classes()) + "]");
  }
  if (samples.empty()) throw Error("cannot evaluate an empty sample set");
  return topk_curve(model, tabulate(samples, model.n_classes()))[k - 1];
}

inline double evaluate_topk(const GazeModel& model, const std::vector<SequenceSample>& samples, std::size_t k) {
  std::vector<const SequenceSample*> ptrs;
  for (const auto& s : samples) ptrs.push_back(&s);
  return evaluate_topk(model, ptrs, k);
}

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_top1 = 0.0;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;
  double best_val_top1 = -1.0;
  std::size_t train_samples = 0;
  std::size_t val_samples = 0;

  std::size_t epochs_run() const { return epochs.size(); }
  double best_train_loss() const { return best_epoch == 0 ? 0.0 : epochs[best_epoch - 1].train_loss; }
};

struct TrainResult {
  GazeModel model;
  TrainLog log;
};

/// Stratified validation carve-out: within each class a seeded shuffle picks
/// round(val_fraction * count) samples; at least one sample is held out overall.
inline std::vector<bool> stratified_validation_mask(std::span<const SequenceSample* const> samples,
                                                    std::size_t n_classes, double fraction, std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> by_class(n_classes);
  for (std::size_t i = 0; i < samples.size(); ++i) by_class[samples[i]->target].push_back(i);
  std::mt19937_64 rng(nn::mix_seed(seed, 0x7a1));
  std::vector<bool> is_val(samples.size(), false);
  std::size_t chosen = 0;
  for (auto& idx : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    // Every class keeps at least one training sample.
    const auto rounded = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
    const std::size_t take = idx.empty() ? 0 : std::min(rounded, idx.size() - 1);
    for (std::size_t j = 0; j < take; ++j) {
      is_val[idx[j]] = true;
      ++chosen;
    }
  }
  if (chosen == 0) {
    const auto largest = std::max_element(by_class.begin(), by_class.end(),
                                          [](const auto& a, const auto& b) { return a.size() < b.size(); });
    is_val[largest->front()] = true;
  }
  return is_val;
}

/// Mini-batch Adam with per-epoch reshuffling, early stopping on validation top-1 (strict
/// improvement, `patience` epochs), returning the best-validation parameters.
inline TrainResult train_model(std::span<const SequenceSample* const> samples, std::size_t n_classes,
                               const TrainConfig& cfg,
                               const std::function<void(const EpochLog&)>& on_epoch = {}) {
  cfg.validate();
  if (samples.size() < 2) throw Error("empty training split");
  const auto is_val = stratified_validation_mask(samples, n_classes, cfg.val_fraction, cfg.seed);
  std::vector<const SequenceSample*> fit, val;
  for (std::size_t i = 0; i < samples.size(); ++i) (is_val[i] ? val : fit).push_back(samples[i]);
  if (fit.empty()) throw Error("empty training split");

  const WindowTable train_table = tabulate(fit, n_classes);
  const WindowTable val_table = tabulate(val, n_classes);

  GazeModel model(cfg.arch, n_classes, cfg.seed);
  TrainResult result{model, {}};
  result.log.train_samples = fit.size();
  result.log.val_samples = val.size();

  auto params = model.params();
  const nn::AdamConfig adam{cfg.lr};
  std::mt19937_64 shuffle_rng(nn::mix_seed(cfg.seed, 0x5a0f));
  std::vector<std::size_t> order(train_table.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<const WindowBytes*> batch_windows;
  std::uint64_t step = 0;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0, weight_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      batch_windows.clear();
      Matrix targets(static_cast<Eigen::Index>(end - begin), static_cast<Eigen::Index>(n_classes));
      for (std::size_t i = begin; i < end; ++i) {
        batch_windows.push_back(&train_table.windows[order[i]]);
        targets.row(static_cast<Eigen::Index>(i - begin)) = train_table.counts.row(static_cast<Eigen::Index>(order[i]));
      }
      ++step;
      const double l = model.loss_and_gradients(nn::make_batch(batch_windows), targets, nn::Mode::train,
                                                nn::mix_seed(cfg.seed, step));
      adam_step(params, adam, step);
      const double w = targets.sum();
      loss_sum += l * w;
      weight_sum += w;
    }
    EpochLog entry{epoch, loss_sum / weight_sum, topk_curve(model, val_table)[0]};
    result.log.epochs.push_back(entry);
    if (on_epoch) on_epoch(entry);
    if (entry.val_top1 > result.log.best_val_top1) {
      result.log.best_val_top1 = entry.val_top1;
      result.log.best_epoch = epoch;
      result.model = model;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

inline TrainResult train_model(const SequenceDataset& ds, const TrainConfig& cfg) {
  std::vector<const SequenceSample*> ptrs;
  for (const auto& s : ds.samples) ptrs.push_back(&s);
  return train_model(ptrs, ds.n_classes, cfg);
}

struct TopK {
  double top1 = 0.0, top2 = 0.0, top3 = 0.0;
};

struct FoldReport {
  std::size_t fold = 0;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  TopK train;
  TopK test;
  double final_loss = 0.0;
  std::size_t train_samples = 0;
  std::size_t test_samples = 0;
};

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation over folds
};

struct KfoldSummary {
  std::map<std::string, MetricSummary> metrics;  // "train.top1", ..., "test.top3", "epochs"
};

struct KfoldResult {
  std::vector<FoldReport> folds;
  KfoldSummary summary;
  std::vector<GazeModel> models;  // one per fold, in fold order
};

inline TopK to_topk(const std::vector<double>& curve) {
  auto at = [&](std::size_t k) { return curve[std::min(k, curve.size()) - 1]; };
  return {at(1), at(2), at(3)};
}

inline MetricSummary summarize(const std::vector<double>& values) {
  MetricSummary s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / n);
  return s;
}

inline KfoldSummary summarize(const std::vector<FoldReport>& folds) {
  std::map<std::string, std::vector<double>> cols;
  for (const auto& f : folds) {
    cols["train.top1"].push_back(f.train.top1);
    cols["train.top2"].push_back(f.train.top2);
    cols["train.top3"].push_back(f.train.top3);
    cols["test.top1"].push_back(f.test.top1);
    cols["test.top2"].push_back(f.test.top2);
    cols["test.top3"].push_back(f.test.top3);
    cols["epochs"].push_back(static_cast<double>(f.epochs_run));
    cols["final_loss"].push_back(f.final_loss);
  }
  KfoldSummary s;
  for (const auto& [name, values] : cols) s.metrics[name] = summarize(values);
  return s;
}

/// For fold i in 0..k-1: train on every other fold, test on fold i.
inline KfoldResult run_kfold(const SequenceDataset& ds, const TrainConfig& cfg, std::size_t k = 10,
                             bool keep_models = false,
                             const std::function<void(const FoldReport&)>& on_fold = {}) {
  if (ds.samples.empty()) throw Error("empty dataset");
  std::vector<std::size_t> fold_sizes(k, 0);
  for (const auto& s : ds.samples) {
    if (s.fold >= k) throw Error("sample fold " + std::to_string(s.fold) + " outside 0.." + std::to_string(k - 1));
    ++fold_sizes[s.fold];
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (fold_sizes[i] == 0) throw Error("missing folds: fold " + std::to_string(i) + " has no samples");
  }
  KfoldResult out;
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<const SequenceSample*> train, test;
    for (const auto& s : ds.samples) (s.fold == i ? test : train).push_back(&s);
    TrainConfig fold_cfg = cfg;
    fold_cfg.seed = nn::mix_seed(cfg.seed, i);
    auto trained = train_model(train, ds.n_classes, fold_cfg);
    FoldReport r;
    r.fold = i;
    r.epochs_run = trained.log.epochs_run();
    r.best_epoch = trained.log.best_epoch;
    r.train = to_topk(topk_curve(trained.model, tabulate(train, ds.n_classes)));
    r.test = to_topk(topk_curve(trained.model, tabulate(test, ds.n_classes)));
    r.final_loss = trained.log.best_train_loss();
    r.train_samples = train.size();
    r.test_samples = test.size();
    if (on_fold) on_fold(r);
    out.folds.push_back(r);
    if (keep_models) out.models.push_back(std::move(trained.model));
  }
  out.summary = summarize(out.folds);
  return out;
}

}  // namespace gazeseq
