#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gazeseq/binary_io.hpp"
#include "gazeseq/classes.hpp"
#include "gazeseq/oracle.hpp"
#include "gazeseq/scenario.hpp"

namespace gazeseq {

inline constexpr std::size_t kWindowCells = kSeqLen * kNumFeatures;
using WindowBytes = std::array<std::uint8_t, kWindowCells>;

/// A 30-frame window of the 24 stimulus indicators and the gaze class at its last frame.
struct SequenceSample {
  WindowBytes features{};
  std::uint8_t target = 0;
  std::uint32_t participant_id = 0;
  std::uint16_t fold = 0;
  std::int32_t start = -1;  // first frame in the source matrix; -1 when unknown

  std::uint8_t at(std::size_t frame, std::size_t feature) const {
    return features[frame * kNumFeatures + feature];
  }
  bool operator==(const SequenceSample&) const = default;
};

/// Per-frame matrix and labels the samples were cut from; needed for jittered oversampling.
struct DatasetSource {
  FeatureMatrix matrix;
  std::map<std::uint32_t, std::vector<std::uint8_t>> labels;
};

struct SequenceDataset {
  std::vector<SequenceSample> samples;
  std::size_t n_classes = 0;
  std::string scenario_id;
  std::optional<DatasetSource> source;

  std::vector<std::size_t> class_histogram() const {
    std::vector<std::size_t> h(n_classes, 0);
    for (const auto& s : samples) {
      if (s.target >= n_classes) throw Error("sample target out of range");
      ++h[s.target];
    }
    return h;
  }
};

inline std::vector<std::uint8_t> label_trace(const GazeTrace& trace, const ClassBins& bins) {
  std::vector<std::uint8_t> out;
  out.reserve(trace.yaw_deg.size());
  for (double y : trace.yaw_deg) out.push_back(static_cast<std::uint8_t>(angle_to_class(y, bins)));
  return out;
}

inline WindowBytes extract_window(const FeatureMatrix& m, std::size_t start, std::size_t len = kSeqLen) {
  if (len != kSeqLen) throw Error("only 30-frame windows are supported");
  if (start + len > m.rows) throw Error("window exceeds matrix rows");
  WindowBytes w{};
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      w[t * kNumFeatures + f] = static_cast<std::uint8_t>(m.feature(start + t, f));
    }
  }
  return w;
}

struct WindowizeResult {
  std::vector<SequenceSample> samples;
  std::optional<std::string> warning;
};

/// Sample j covers frames j..j+len-1 (time column dropped) and takes labels[j+len-1].
inline WindowizeResult windowize(const FeatureMatrix& matrix, const std::vector<std::uint8_t>& labels,
                                 std::size_t len = kSeqLen, std::size_t stride = 1,
                                 std::uint32_t participant_id = 0) {
  if (matrix.rows != labels.size()) throw Error("windowize: matrix rows and label count differ");
  if (stride == 0) throw Error("windowize: stride must be positive");
  WindowizeResult r;
  if (matrix.rows < len) {
    r.warning = "only " + std::to_string(matrix.rows) + " frames; need " + std::to_string(len);
    return r;
  }
  for (std::size_t j = 0; j + len <= matrix.rows; j += stride) {
    SequenceSample s;
    s.features = extract_window(matrix, j, len);
    s.target = labels[j + len - 1];
    s.participant_id = participant_id;
    s.start = static_cast<std::int32_t>(j);
    r.samples.push_back(s);
  }
  return r;
}

/// Windows every trace against the scenario matrix, in (participant, window) order.
inline SequenceDataset build_dataset(const ScenarioSpec& spec, const std::vector<GazeTrace>& traces,
                                     const ClassBins& bins) {
  SequenceDataset ds;
  ds.n_classes = bins.n_classes();
  ds.scenario_id = spec.id;
  DatasetSource src;
  src.matrix = rasterize(spec);
  std::vector<const GazeTrace*> ordered;
  for (const auto& t : traces) ordered.push_back(&t);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const GazeTrace* a, const GazeTrace* b) { return a->participant_id < b->participant_id; });
  for (const GazeTrace* t : ordered) {
    if (t->yaw_deg.size() != src.matrix.rows) throw Error("trace length does not match scenario frames");
    auto labels = label_trace(*t, bins);
    auto win = windowize(src.matrix, labels, kSeqLen, 1, t->participant_id);
    ds.samples.insert(ds.samples.end(), win.samples.begin(), win.samples.end());
    if (!src.labels.emplace(t->participant_id, std::move(labels)).second) {
      throw Error("duplicate participant id " + std::to_string(t->participant_id));
    }
  }
  ds.source = std::move(src);
  return ds;
}

/// Oversamples every class up to the largest class count. New samples re-extract a source
/// window shifted by +-1 or +-2 frames whose label is still the sample's class; classes with no
/// such neighbour fall back to exact copies.
inline SequenceDataset augment_balance(const SequenceDataset& dataset, std::uint64_t seed) {
  const auto hist = dataset.class_histogram();
  for (std::size_t c = 0; c < hist.size(); ++c) {
    if (hist[c] == 0) throw Error("class " + std::to_string(c) + " unrepresented");
  }
  const std::size_t target_count = *std::max_element(hist.begin(), hist.end());
  SequenceDataset out = dataset;
  if (std::all_of(hist.begin(), hist.end(), [&](std::size_t h) { return h == target_count; })) return out;
  if (!dataset.source) throw Error("augment_balance: dataset has no source matrix");
  const auto& src = *dataset.source;
  const long max_start = static_cast<long>(src.matrix.rows) - static_cast<long>(kSeqLen);

  struct Candidate {
    std::size_t sample;
    long start;
  };
  for (std::size_t c = 0; c < hist.size(); ++c) {
    const std::size_t deficit = target_count - hist[c];
    if (deficit == 0) continue;
    std::vector<Candidate> cands, copies;
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
      const auto& s = dataset.samples[i];
      if (s.target != c || s.start < 0) continue;
      copies.push_back({i, s.start});
      const auto lab = src.labels.find(s.participant_id);
      if (lab == src.labels.end()) continue;
      for (long d : {-2L, -1L, 1L, 2L}) {
        const long ns = s.start + d;
        if (ns < 0 || ns > max_start) continue;
        if (lab->second[static_cast<std::size_t>(ns) + kSeqLen - 1] == c) cands.push_back({i, ns});
      }
    }
    if (cands.empty()) cands = copies;
    if (cands.empty()) throw Error("class " + std::to_string(c) + " has no re-extractable samples");
    std::mt19937_64 rng(nn::mix_seed(seed, c));
    std::uniform_int_distribution<std::size_t> pick(0, cands.size() - 1);
    for (std::size_t n = 0; n < deficit; ++n) {
      const auto& cand = cands[pick(rng)];
      SequenceSample s = dataset.samples[cand.sample];
      s.features = extract_window(src.matrix, static_cast<std::size_t>(cand.start));
      s.start = static_cast<std::int32_t>(cand.start);
      out.samples.push_back(s);
    }
  }
  return out;
}

/// Assigns folds from a seeded permutation: position p in the permutation gets fold p mod k,
/// so fold sizes differ by at most one. With `group_by_participant`, whole participants are
/// permuted instead of samples.
inline SequenceDataset kfold_split(const SequenceDataset& dataset, std::size_t k, std::uint64_t seed,
                                   bool group_by_participant = false) {
  if (k < 2 || k > 65535) throw Error("kfold_split: k must lie in [2, 65535]");
  SequenceDataset out = dataset;
  std::mt19937_64 rng(nn::mix_seed(seed, 0xf01d));
  if (!group_by_participant) {
    if (dataset.samples.size() < k) {
      throw Error("kfold_split: " + std::to_string(dataset.samples.size()) + " samples for " +
                  std::to_string(k) + " folds");
    }
    std::vector<std::size_t> perm(dataset.samples.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t p = 0; p < perm.size(); ++p) out.samples[perm[p]].fold = static_cast<std::uint16_t>(p % k);
    return out;
  }
  std::vector<std::uint32_t> ids;
  for (const auto& s : dataset.samples) ids.push_back(s.participant_id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (ids.size() < k) throw Error("kfold_split: fewer participants than folds");
  std::shuffle(ids.begin(), ids.end(), rng);
  std::map<std::uint32_t, std::uint16_t> fold_of;
  for (std::size_t p = 0; p < ids.size(); ++p) fold_of[ids[p]] = static_cast<std::uint16_t>(p % k);
  for (auto& s : out.samples) s.fold = fold_of.at(s.participant_id);
  return out;
}

// ---- GZDS dataset file -------------------------------------------------------------------

inline constexpr std::uint32_t kDatasetVersion = 1;

inline void write_dataset(std::ostream& out, const SequenceDataset& ds) {
  io::write_magic(out, "GZDS");
  io::write_le<std::uint32_t>(out, kDatasetVersion);
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.samples.size()));
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(kSeqLen));
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(kNumFeatures));
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.n_classes));
  for (const auto& s : ds.samples) {
    out.write(reinterpret_cast<const char*>(s.features.data()), static_cast<std::streamsize>(s.features.size()));
    io::write_le<std::uint8_t>(out, s.target);
    io::write_le<std::uint16_t>(out, s.fold);
    io::write_le<std::uint32_t>(out, s.participant_id);
  }
  if (!out) throw Error("failed writing dataset");
}

inline SequenceDataset read_dataset(std::istream& in) {
  io::expect_magic(in, "GZDS", "GZDS dataset");
  if (io::read_le<std::uint32_t>(in) != kDatasetVersion) throw Error("unsupported GZDS version");
  const auto n = io::read_le<std::uint32_t>(in);
  if (io::read_le<std::uint32_t>(in) != kSeqLen) throw Error("GZDS sequence length must be 30");
  if (io::read_le<std::uint32_t>(in) != kNumFeatures) throw Error("GZDS feature count must be 24");
  SequenceDataset ds;
  ds.n_classes = io::read_le<std::uint32_t>(in);
  if (ds.n_classes < 2 || ds.n_classes > 255) throw Error("GZDS class count out of range");
  ds.samples.resize(n);
  for (auto& s : ds.samples) {
    if (!in.read(reinterpret_cast<char*>(s.features.data()), static_cast<std::streamsize>(s.features.size()))) {
      throw Error("unexpected end of file");
    }
    s.target = io::read_le<std::uint8_t>(in);
    s.fold = io::read_le<std::uint16_t>(in);
    s.participant_id = io::read_le<std::uint32_t>(in);
    if (s.target >= ds.n_classes) throw Error("GZDS sample target out of range");
  }
  return ds;
}

inline void save_dataset(const SequenceDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_dataset(out, ds);
}

inline SequenceDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_dataset(in);
}

/// One row per (sample, frame): sample,frame,f0..f23,target,fold.
inline void write_dataset_csv(std::ostream& out, const SequenceDataset& ds) {
  out << "sample,frame";
  for (std::size_t f = 0; f < kNumFeatures; ++f) out << ",f" << f;
  out << ",target,fold\n";
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    for (std::size_t t = 0; t < kSeqLen; ++t) {
      out << i << ',' << t;
      for (std::size_t f = 0; f < kNumFeatures; ++f) out << ',' << static_cast<int>(s.at(t, f));
      out << ',' << static_cast<int>(s.target) << ',' << s.fold << '\n';
    }
  }
}

}  // namespace gazeseq
