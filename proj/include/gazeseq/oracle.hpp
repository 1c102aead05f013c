#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gazeseq/classes.hpp"
#include "gazeseq/nn/tensor.hpp"
#include "gazeseq/scenario.hpp"

namespace gazeseq {

/// A synthetic participant: stimulus priorities plus timing and motor habits.
struct Persona {
  std::array<double, kNumStimuli> weights{};
  double latency_s = 0.3;
  double dwell_min_s = 1.0;
  double head_turn_prob = 1.0;
  double noise_deg = 0.0;
  double boredom_rate = 0.0;

  double weight(Stimulus s) const { return weights[static_cast<std::size_t>(s)]; }
  double& weight(Stimulus s) { return weights[static_cast<std::size_t>(s)]; }

  void validate() const {
    for (double w : weights) {
      if (!(w >= 0.0)) throw Error("persona weights must be non-negative");
    }
    if (!(latency_s >= 0.0) || !(dwell_min_s >= 0.0)) throw Error("persona timings must be non-negative");
    if (!(head_turn_prob >= 0.0 && head_turn_prob <= 1.0)) throw Error("head_turn_prob must lie in [0, 1]");
    if (!(noise_deg >= 0.0)) throw Error("noise_deg must be non-negative");
    if (!(boredom_rate >= 0.0)) throw Error("boredom_rate must be non-negative");
  }
  bool operator==(const Persona&) const = default;
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// Sampling ranges for sample_persona.
struct PersonaRanges {
  Range human_weight{1.0, 2.0};
  Range nonhuman_weight{0.2, 0.9};
  Range latency_s{0.2, 0.6};
  Range dwell_min_s{0.5, 1.5};
  Range noise_deg{0.0, 5.0};
  Range head_turn_prob{0.6, 1.0};
  Range boredom_rate{0.0, 0.02};
  double speaking_bonus = 0.3;
};

inline Persona sample_persona(std::uint64_t seed, const PersonaRanges& r = {}) {
  std::mt19937_64 rng(nn::mix_seed(seed, 0x9e75));
  auto draw = [&rng](Range range) {
    return std::uniform_real_distribution<double>(range.lo, range.hi)(rng);
  };
  Persona p;
  for (const auto& e : kStimulusCatalog) {
    p.weight(e.kind) = draw(is_human(e.kind) ? r.human_weight : r.nonhuman_weight);
  }
  // A speaking variant always outranks its silent counterpart by the fixed bonus.
  for (const auto& e : kStimulusCatalog) {
    if (auto silent = silent_variant(e.kind)) p.weight(e.kind) = p.weight(*silent) + r.speaking_bonus;
  }
  p.latency_s = draw(r.latency_s);
  p.dwell_min_s = draw(r.dwell_min_s);
  p.noise_deg = draw(r.noise_deg);
  p.head_turn_prob = draw(r.head_turn_prob);
  p.boredom_rate = draw(r.boredom_rate);
  return p;
}

/// One participant's yaw series at 10 Hz.
struct GazeTrace {
  std::uint32_t participant_id = 0;
  std::string scenario_id;
  std::vector<double> yaw_deg;

  bool operator==(const GazeTrace&) const = default;
};

/// Per-frame internal state of the arbitration model, for inspection and tests.
struct SimulationLog {
  std::vector<int> candidate;  // highest-priority active event, -1 if none
  std::vector<int> target;     // event currently fixated, -1 for straight ahead
};

struct Simulation {
  GazeTrace trace;
  SimulationLog log;
};

namespace detail {

inline int arbitrate(const ScenarioSpec& spec, const Persona& persona, double ts) {
  int best = -1;
  for (std::size_t i = 0; i < spec.events.size(); ++i) {
    const auto& e = spec.events[i];
    if (!(e.start_s <= ts && ts < e.end_s)) continue;
    if (best < 0) {
      best = static_cast<int>(i);
      continue;
    }
    const auto& b = spec.events[static_cast<std::size_t>(best)];
    const double we = persona.weight(e.kind), wb = persona.weight(b.kind);
    if (we > wb || (we == wb && e.start_s > b.start_s)) best = static_cast<int>(i);
  }
  return best;
}

}  // namespace detail

/// Runs the priority-arbitration gaze model over a scenario.
///
/// Every frame draws the same three random numbers (boredom, head-turn, jitter) whether or not
/// they are used, so runs that differ in one persona field share their random sequence.
inline Simulation simulate(const ScenarioSpec& spec, const Persona& persona, std::uint64_t seed,
                           std::uint32_t participant_id = 0) {
  require_valid(spec);
  persona.validate();
  const auto& conv = spec.convention;
  const std::size_t frames = spec.frames();
  const auto latency = static_cast<long>(std::llround(persona.latency_s * spec.frame_hz));
  const auto dwell = static_cast<long>(std::llround(persona.dwell_min_s * spec.frame_hz));

  std::mt19937_64 rng(nn::mix_seed(seed, participant_id));
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  Simulation sim;
  sim.trace.participant_id = participant_id;
  sim.trace.scenario_id = spec.id;
  sim.trace.yaw_deg.resize(frames);
  sim.log.candidate.resize(frames);
  sim.log.target.resize(frames);

  int pending = -1;
  long pending_since = 0;
  int current = -1;
  long fixation_start = 0;
  int bored_of = -1;
  double head_yaw = conv.straight_ahead_deg;

  for (std::size_t f = 0; f < frames; ++f) {
    const auto t = static_cast<long>(f);
    const double u_bored = uniform(rng);
    const double u_head = uniform(rng);
    const double z = normal(rng);

    const int cand = detail::arbitrate(spec, persona, frame_time(f, spec.frame_hz));
    if (cand != pending) {
      pending = cand;
      pending_since = t;
      bored_of = -1;
    }

    if (current >= 0 && persona.boredom_rate > 0.0) {
      const double elapsed_s = static_cast<double>(t - fixation_start) / spec.frame_hz;
      const double hazard = std::min(1.0, persona.boredom_rate * elapsed_s) / spec.frame_hz;
      if (u_bored < hazard) {
        bored_of = current;
        current = -1;
        fixation_start = t;
        head_yaw = conv.straight_ahead_deg;
      }
    }

    const int desired = (pending == bored_of) ? -1 : pending;
    if (desired != current) {
      const bool dwell_ok = current < 0 || (t - fixation_start) >= dwell;
      const bool latency_ok = desired < 0 || (t - pending_since) >= latency;
      if (dwell_ok && latency_ok) {
        current = desired;
        fixation_start = t;
        if (current < 0) {
          head_yaw = conv.straight_ahead_deg;
        } else {
          const double src = spec.events[static_cast<std::size_t>(current)].source_yaw_deg;
          // Peripheral targets are sometimes followed with the eyes only.
          if (!is_peripheral(conv, src) || u_head < persona.head_turn_prob) head_yaw = src;
        }
      }
    }

    sim.log.candidate[f] = cand;
    sim.log.target[f] = current;
    sim.trace.yaw_deg[f] = conv.clamp(head_yaw + persona.noise_deg * z);
  }
  return sim;
}

inline GazeTrace simulate_trace(const ScenarioSpec& spec, const Persona& persona, std::uint64_t seed,
                                std::uint32_t participant_id = 0) {
  return simulate(spec, persona, seed, participant_id).trace;
}

struct PopulationStats {
  std::vector<double> mean;
  std::vector<double> std;  // population convention (divide by N)
};

inline PopulationStats population_stats(const std::vector<GazeTrace>& traces) {
  if (traces.empty()) throw Error("population_stats: no traces");
  const std::size_t n = traces.front().yaw_deg.size();
  for (const auto& tr : traces) {
    if (tr.yaw_deg.size() != n) throw Error("population_stats: mismatched trace lengths");
    if (tr.scenario_id != traces.front().scenario_id) throw Error("population_stats: mixed scenarios");
  }
  PopulationStats s;
  s.mean.assign(n, 0.0);
  s.std.assign(n, 0.0);
  const double count = static_cast<double>(traces.size());
  for (std::size_t f = 0; f < n; ++f) {
    double sum = 0.0;
    for (const auto& tr : traces) sum += tr.yaw_deg[f];
    const double mean = sum / count;
    double sq = 0.0;
    for (const auto& tr : traces) sq += (tr.yaw_deg[f] - mean) * (tr.yaw_deg[f] - mean);
    s.mean[f] = mean;
    s.std[f] = std::sqrt(sq / count);
  }
  return s;
}

struct BayesReference {
  std::vector<std::vector<double>> distribution;  // per frame, per class
  double top1 = 0.0;
  double top3 = 0.0;
};

/// Per-frame empirical class distribution over a population and the accuracy any classifier
/// that sees only the scene could reach: mean of the largest (top-1) and three largest (top-3)
/// class probabilities. Frames before `first_frame` are skipped.
inline BayesReference bayes_reference_from_traces(const std::vector<GazeTrace>& traces,
                                                  const ClassBins& bins, std::size_t first_frame = 0) {
  if (traces.empty()) throw Error("bayes_reference: empty population");
  const std::size_t n = traces.front().yaw_deg.size();
  for (const auto& tr : traces) {
    if (tr.yaw_deg.size() != n) throw Error("bayes_reference: mismatched trace lengths");
  }
  if (first_frame >= n) throw Error("bayes_reference: no frames to evaluate");
  const std::size_t k = bins.n_classes();
  BayesReference ref;
  ref.distribution.assign(n, std::vector<double>(k, 0.0));
  const double w = 1.0 / static_cast<double>(traces.size());
  for (const auto& tr : traces) {
    for (std::size_t f = 0; f < n; ++f) ref.distribution[f][angle_to_class(tr.yaw_deg[f], bins)] += w;
  }
  double top1 = 0.0, top3 = 0.0;
  for (std::size_t f = first_frame; f < n; ++f) {
    auto d = ref.distribution[f];
    std::sort(d.begin(), d.end(), std::greater<>());
    top1 += d[0];
    for (std::size_t i = 0; i < std::min<std::size_t>(3, d.size()); ++i) top3 += d[i];
  }
  const double frames = static_cast<double>(n - first_frame);
  ref.top1 = top1 / frames;
  ref.top3 = std::min(1.0, top3 / frames);
  return ref;
}

/// Simulates persona i with seeds[i] as participant i and summarizes the population.
inline std::vector<GazeTrace> simulate_population(const ScenarioSpec& spec, const std::vector<Persona>& personas,
                                                  const std::vector<std::uint64_t>& seeds) {
  if (personas.empty()) throw Error("empty population");
  if (personas.size() != seeds.size()) throw Error("personas and seeds differ in length");
  std::vector<GazeTrace> traces;
  traces.reserve(personas.size());
  for (std::size_t i = 0; i < personas.size(); ++i) {
    traces.push_back(simulate_trace(spec, personas[i], seeds[i], static_cast<std::uint32_t>(i)));
  }
  return traces;
}

inline BayesReference bayes_reference(const ScenarioSpec& spec, const std::vector<Persona>& personas,
                                      const std::vector<std::uint64_t>& seeds, std::size_t first_frame = 0) {
  return bayes_reference_from_traces(simulate_population(spec, personas, seeds), default_bins(spec),
                                     first_frame);
}

}  // namespace gazeseq
