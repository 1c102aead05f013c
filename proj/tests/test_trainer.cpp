#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "gazeseq/model.hpp"
#include "gazeseq/trainer.hpp"

using namespace gazeseq;
using nn::Matrix;

namespace {

// Model whose output ignores the input: zero head weights and log-probabilities as bias.
GazeModel fixed_output_model(const std::vector<double>& probs) {
  LstmGazeModel m(probs.size(), 0);
  m.head_w.value.setZero();
  for (std::size_t c = 0; c < probs.size(); ++c) m.head_b.value(0, static_cast<Eigen::Index>(c)) = std::log(probs[c]);
  return GazeModel(std::move(m));
}

SequenceSample sample_with_target(std::size_t target) {
  SequenceSample s;
  s.target = static_cast<std::uint8_t>(target);
  return s;
}

// Target = the single active class-indicator among features 0..n-1 at frame 29; every other
// cell is noise drawn from features n..23 and earlier frames.
SequenceDataset separable_dataset(std::size_t n, std::size_t n_classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution noise(0.3);
  SequenceDataset ds;
  ds.n_classes = n_classes;
  for (std::size_t i = 0; i < n; ++i) {
    SequenceSample s;
    const std::size_t c = i % n_classes;
    for (std::size_t t = 0; t < kSeqLen; ++t) {
      for (std::size_t f = 0; f < kNumFeatures; ++f) {
        if (t + 1 < kSeqLen) continue;  // history stays silent
        s.features[t * kNumFeatures + f] = f < n_classes ? (f == c ? 1 : 0) : (noise(rng) ? 1 : 0);
      }
    }
    s.target = static_cast<std::uint8_t>(c);
    s.participant_id = static_cast<std::uint32_t>(i);
    s.fold = static_cast<std::uint16_t>(i % 10);
    ds.samples.push_back(s);
  }
  return ds;
}

std::vector<const SequenceSample*> pointers(const SequenceDataset& ds) {
  std::vector<const SequenceSample*> p;
  for (const auto& s : ds.samples) p.push_back(&s);
  return p;
}

std::string weight_bytes(const GazeModel& m) {
  std::ostringstream os;
  write_weights(os, m);
  return os.str();
}

}  // namespace

TEST(EvaluateTopK, FullRankIsAlwaysOne) {
  const auto model = fixed_output_model({0.1, 0.2, 0.3, 0.1, 0.2, 0.1});
  std::vector<SequenceSample> samples;
  for (std::size_t c = 0; c < 6; ++c) samples.push_back(sample_with_target(c));
  EXPECT_DOUBLE_EQ(evaluate_topk(model, samples, 6), 1.0);
}

TEST(EvaluateTopK, TargetRankedSecond) {
  const auto model = fixed_output_model({0.5, 0.3, 0.1, 0.05, 0.03, 0.02});
  const std::vector<SequenceSample> one{sample_with_target(1)};
  EXPECT_DOUBLE_EQ(evaluate_topk(model, one, 1), 0.0);
  EXPECT_DOUBLE_EQ(evaluate_topk(model, one, 2), 1.0);
}

TEST(EvaluateTopK, FourSamplesWithRanksOneToFour) {
  const auto model = fixed_output_model({0.4, 0.25, 0.15, 0.1, 0.06, 0.04});
  const std::vector<SequenceSample> four{sample_with_target(0), sample_with_target(1), sample_with_target(2),
                                         sample_with_target(3)};
  EXPECT_DOUBLE_EQ(evaluate_topk(model, four, 3), 0.75);
}

TEST(EvaluateTopK, TiesRankLowerClassFirst) {
  const auto model = fixed_output_model({0.2, 0.2, 0.2, 0.2, 0.1, 0.1});
  EXPECT_DOUBLE_EQ(evaluate_topk(model, std::vector<SequenceSample>{sample_with_target(0)}, 1), 1.0);
  EXPECT_DOUBLE_EQ(evaluate_topk(model, std::vector<SequenceSample>{sample_with_target(3)}, 3), 0.0);
  EXPECT_DOUBLE_EQ(evaluate_topk(model, std::vector<SequenceSample>{sample_with_target(3)}, 4), 1.0);
}

TEST(EvaluateTopK, InvalidArgumentsRejected) {
  const auto model = fixed_output_model({0.5, 0.5});
  const std::vector<SequenceSample> one{sample_with_target(0)};
  EXPECT_THROW(evaluate_topk(model, one, 0), Error);
  EXPECT_THROW(evaluate_topk(model, one, 3), Error);
  EXPECT_THROW(evaluate_topk(model, std::vector<SequenceSample>{}, 1), Error);
}

TEST(TopKCurve, DuplicateWindowsCountedByMultiplicity) {
  auto ds = separable_dataset(12, 3, 1);
  ds.samples.push_back(ds.samples[0]);
  ds.samples.push_back(ds.samples[0]);
  const GazeModel model(Arch::lstm, 3, 4);
  const auto ptrs = pointers(ds);
  const auto table = tabulate(ptrs, 3);
  EXPECT_EQ(table.size(), 12u);
  EXPECT_DOUBLE_EQ(table.total(), 14.0);
  double hits = 0.0;
  for (const auto& s : ds.samples) {
    const Matrix p = model.forward(nn::make_batch(s.features));
    hits += class_rank(p.row(0), s.target) == 0 ? 1.0 : 0.0;
  }
  EXPECT_DOUBLE_EQ(topk_curve(model, table)[0], hits / 14.0);
}

TEST(TrainConfig, InvariantsEnforced) {
  TrainConfig c;
  c.patience = 100;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.val_fraction = 0.5;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  EXPECT_NO_THROW(c.validate());
}

TEST(TrainModel, FrozenValidationStopsAtEpochEleven) {
  auto ds = separable_dataset(40, 4, 2);
  for (auto& s : ds.samples) s = ds.samples[s.target];  // duplicates only
  TrainConfig cfg;
  cfg.lr = 0.0;
  cfg.seed = 3;
  const auto result = train_model(pointers(ds), 4, cfg);
  EXPECT_EQ(result.log.epochs_run(), 11u);
  EXPECT_EQ(result.log.best_epoch, 1u);
}

TEST(TrainModel, SeparableToyReachesPerfectValidation) {
  const auto ds = separable_dataset(240, 6, 5);
  TrainConfig cfg;
  cfg.seed = 1;
  cfg.val_fraction = 0.2;
  const auto result = train_model(pointers(ds), 6, cfg);
  EXPECT_DOUBLE_EQ(result.log.best_val_top1, 1.0);
  EXPECT_LT(result.log.best_epoch, 100u);
}

TEST(TrainModel, ReturnsBestValidationEpochParameters) {
  const auto ds = separable_dataset(120, 6, 6);
  TrainConfig cfg;
  cfg.seed = 2;
  cfg.max_epochs = 15;
  cfg.patience = 3;
  cfg.val_fraction = 0.25;
  const auto ptrs = pointers(ds);
  const auto result = train_model(ptrs, 6, cfg);
  double best = 0.0;
  for (const auto& e : result.log.epochs) best = std::max(best, e.val_top1);
  EXPECT_EQ(result.log.best_val_top1, best);

  const auto mask = stratified_validation_mask(ptrs, 6, cfg.val_fraction, cfg.seed);
  std::vector<const SequenceSample*> val;
  for (std::size_t i = 0; i < ptrs.size(); ++i) {
    if (mask[i]) val.push_back(ptrs[i]);
  }
  EXPECT_EQ(val.size(), result.log.val_samples);
  EXPECT_DOUBLE_EQ(evaluate_topk(result.model, val, 1), best);
}

TEST(TrainModel, SameSeedGivesIdenticalWeightBytes) {
  const auto ds = separable_dataset(60, 3, 7);
  TrainConfig cfg;
  cfg.seed = 9;
  cfg.max_epochs = 4;
  cfg.patience = 2;
  for (Arch arch : {Arch::lstm, Arch::transformer}) {
    cfg.arch = arch;
    const auto a = train_model(pointers(ds), 3, cfg);
    const auto b = train_model(pointers(ds), 3, cfg);
    EXPECT_EQ(weight_bytes(a.model), weight_bytes(b.model)) << arch_name(arch);
  }
}

TEST(TrainModel, EmptySplitRejected) {
  TrainConfig cfg;
  EXPECT_THROW(train_model(std::vector<const SequenceSample*>{}, 6, cfg), Error);
}

TEST(StratifiedValidation, PerClassFractionAndNeverWholeClass) {
  auto ds = separable_dataset(103, 3, 8);
  ds.samples.push_back(ds.samples[0]);
  const auto ptrs = pointers(ds);
  const auto mask = stratified_validation_mask(ptrs, 3, 0.1, 1);
  std::vector<std::size_t> total(3, 0), val(3, 0);
  for (std::size_t i = 0; i < ptrs.size(); ++i) {
    ++total[ptrs[i]->target];
    if (mask[i]) ++val[ptrs[i]->target];
  }
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_EQ(val[c], static_cast<std::size_t>(std::lround(0.1 * static_cast<double>(total[c]))));
    EXPECT_LT(val[c], total[c]);
  }
}

TEST(RunKfold, TestFoldsPartitionTheDataset) {
  const auto ds = separable_dataset(200, 4, 9);
  TrainConfig cfg;
  cfg.max_epochs = 2;
  cfg.patience = 1;
  const auto r = run_kfold(ds, cfg, 10, true);
  ASSERT_EQ(r.folds.size(), 10u);
  ASSERT_EQ(r.models.size(), 10u);
  std::size_t tested = 0;
  for (const auto& f : r.folds) {
    tested += f.test_samples;
    EXPECT_EQ(f.test_samples + f.train_samples, ds.samples.size());
    EXPECT_LE(f.test.top1, f.test.top2);
    EXPECT_LE(f.test.top2, f.test.top3);
    EXPECT_LE(f.test.top3, 1.0);
    EXPECT_LE(f.train.top1, f.train.top2);
    EXPECT_LE(f.train.top2, f.train.top3);
  }
  EXPECT_EQ(tested, ds.samples.size());
  EXPECT_EQ(r.summary.metrics.count("test.top1"), 1u);
}

TEST(RunKfold, MissingFoldRejected) {
  auto ds = separable_dataset(50, 2, 10);
  for (auto& s : ds.samples) {
    if (s.fold == 4) s.fold = 3;
  }
  TrainConfig cfg;
  cfg.max_epochs = 2;
  cfg.patience = 1;
  EXPECT_THROW(run_kfold(ds, cfg, 10), Error);
}

TEST(Summarize, PopulationMeanAndStd) {
  const auto s = summarize(std::vector<double>{0.5, 0.7});
  EXPECT_DOUBLE_EQ(s.mean, 0.6);
  EXPECT_NEAR(s.std, 0.1, 1e-15);
}

TEST(WeightsFile, RoundTripGivesBitwiseIdenticalOutput) {
  for (Arch arch : {Arch::lstm, Arch::transformer}) {
    for (std::size_t n : {6u, 7u}) {
      const GazeModel m(arch, n, 21);
      const std::string bytes = weight_bytes(m);
      std::istringstream is(bytes);
      const GazeModel back = read_weights(is);
      EXPECT_EQ(back.arch(), arch);
      EXPECT_EQ(weight_bytes(back), bytes);
      WindowBytes w{};
      for (std::size_t i = 0; i < w.size(); i += 7) w[i] = 1;
      EXPECT_EQ(back.forward(nn::make_batch(w)), m.forward(nn::make_batch(w)));
    }
  }
}

TEST(WeightsFile, HeaderFieldsAndLstmCounts) {
  const std::string bytes = weight_bytes(GazeModel(Arch::lstm, 6, 0));
  EXPECT_EQ(bytes.substr(0, 4), "GZWT");
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 1u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[9]), 6u);
  std::uint32_t count = 0;
  std::memcpy(&count, bytes.data() + 10, 4);
  EXPECT_EQ(count, 41702u);
  EXPECT_EQ(GazeModel(Arch::lstm, 7, 0).param_count(), 41735u);
}

TEST(WeightsFile, CorruptFilesRejected) {
  const std::string bytes = weight_bytes(GazeModel(Arch::lstm, 6, 0));
  auto rejects = [](std::string b) {
    std::istringstream is(b);
    EXPECT_THROW(read_weights(is), Error);
  };
  rejects(bytes.substr(0, bytes.size() - 8));
  rejects(bytes + "x");
  std::string wrong_arch = bytes;
  wrong_arch[8] = 9;
  rejects(wrong_arch);
  std::string wrong_count = bytes;
  wrong_count[10] = 0;
  rejects(wrong_count);
  std::string nan_value = bytes;
  const double nan = std::nan("");
  std::memcpy(nan_value.data() + nan_value.size() - 8, &nan, 8);
  rejects(nan_value);
}

TEST(ParseArch, KnownAndUnknownNames) {
  EXPECT_EQ(parse_arch("lstm"), Arch::lstm);
  EXPECT_EQ(parse_arch("transformer"), Arch::transformer);
  EXPECT_THROW(parse_arch("warp"), Error);
}
