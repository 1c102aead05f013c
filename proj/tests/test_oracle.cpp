#include <algorithm>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "gazeseq/builtin_scenarios.hpp"
#include "gazeseq/classes.hpp"
#include "gazeseq/oracle_io.hpp"

using namespace gazeseq;

namespace {

ScenarioSpec empty_s1(double duration = 10.0) {
  auto s = builtin_s1();
  s.id = "custom";
  s.duration_s = duration;
  s.events.clear();
  return s;
}

Persona calm_persona() {
  Persona p;
  for (const auto& e : kStimulusCatalog) p.weight(e.kind) = is_human(e.kind) ? 2.0 : 1.0;
  p.latency_s = 0.3;
  p.dwell_min_s = 1.0;
  p.head_turn_prob = 1.0;
  p.noise_deg = 0.0;
  p.boredom_rate = 0.0;
  return p;
}

GazeTrace constant_trace(std::uint32_t id, std::vector<double> yaw) { return GazeTrace{id, "s1", std::move(yaw)}; }

}  // namespace

TEST(SamplePersona, DeterministicPerSeed) { EXPECT_EQ(sample_persona(7), sample_persona(7)); }

TEST(SamplePersona, HumanWeightsDominateNonhumanByDefault) {
  for (std::uint64_t seed = 0; seed < 41; ++seed) {
    const auto p = sample_persona(seed);
    double min_h = 1e9, max_n = -1e9;
    for (const auto& e : kStimulusCatalog) {
      if (is_human(e.kind)) {
        min_h = std::min(min_h, p.weight(e.kind));
      } else {
        max_n = std::max(max_n, p.weight(e.kind));
      }
    }
    EXPECT_GT(min_h, max_n) << seed;
    EXPECT_NO_THROW(p.validate());
  }
}

TEST(SamplePersona, FortyOneSeedsGiveDistinctPersonas) {
  std::vector<Persona> ps;
  for (std::uint64_t seed = 0; seed <= 40; ++seed) ps.push_back(sample_persona(seed));
  for (std::size_t i = 0; i < ps.size(); ++i) {
    for (std::size_t j = i + 1; j < ps.size(); ++j) EXPECT_FALSE(ps[i] == ps[j]);
  }
}

TEST(SamplePersona, SpeakingVariantsCarryFixedBonus) {
  const auto p = sample_persona(3);
  EXPECT_NEAR(p.weight(Stimulus::waving_speaking) - p.weight(Stimulus::waving_silent), 0.3, 1e-12);
}

TEST(SimulateTrace, NoEventsGivesStraightAhead) {
  const auto trace = simulate_trace(empty_s1(), calm_persona(), 5);
  ASSERT_EQ(trace.yaw_deg.size(), 100u);
  for (double y : trace.yaw_deg) EXPECT_EQ(y, 180.0);
}

TEST(SimulateTrace, SingleHumanEventSteppedByHand) {
  auto s = empty_s1(10.0);
  s.events.push_back({std::string("p1"), Stimulus::standing_silent, 0.0, 5.0, 150.0});
  const auto trace = simulate_trace(s, calm_persona(), 1);
  for (std::size_t f = 0; f < 100; ++f) {
    const double expected = (f >= 3 && f <= 49) ? 150.0 : 180.0;
    EXPECT_EQ(trace.yaw_deg[f], expected) << "frame " << f;
  }
}

TEST(SimulateTrace, HumanOutranksSimultaneousNonhuman) {
  auto s = empty_s1(6.0);
  s.events.push_back({std::string("p1"), Stimulus::standing_silent, 0.0, 5.0, 150.0});
  s.events.push_back({std::nullopt, Stimulus::alarm, 0.0, 5.0, 240.0});
  const auto trace = simulate_trace(s, calm_persona(), 2);
  EXPECT_EQ(trace.yaw_deg[10], 150.0);
}

TEST(SimulateTrace, EqualWeightsPreferMostRecentStart) {
  auto s = empty_s1(6.0);
  s.events.push_back({std::string("p1"), Stimulus::standing_silent, 0.0, 5.0, 150.0});
  s.events.push_back({std::string("p2"), Stimulus::standing_silent, 1.0, 5.0, 200.0});
  const auto sim = simulate(s, calm_persona(), 2);
  EXPECT_EQ(sim.log.candidate[5], 0);
  EXPECT_EQ(sim.log.candidate[15], 1);
}

TEST(SimulateTrace, DeterministicAndWithinConventionRange) {
  const auto spec = builtin_s1();
  const auto persona = sample_persona(11);
  const auto a = simulate_trace(spec, persona, 99, 4);
  EXPECT_EQ(a, simulate_trace(spec, persona, 99, 4));
  EXPECT_EQ(a.yaw_deg.size(), rasterize(spec).rows);
  for (double y : a.yaw_deg) {
    EXPECT_GE(y, spec.convention.min_deg);
    EXPECT_LE(y, spec.convention.max_deg);
  }
}

TEST(SimulateTrace, PostLatencyYawEqualsSourceForCleanPersona) {
  auto s = empty_s1(10.0);
  s.events.push_back({std::nullopt, Stimulus::door, 2.0, 7.0, 250.0});
  auto p = calm_persona();
  p.latency_s = 0.5;
  const auto trace = simulate_trace(s, p, 3);
  for (std::size_t f = 25; f < 70; ++f) EXPECT_EQ(trace.yaw_deg[f], 250.0);
}

TEST(SimulateTrace, EyesOnlyPersonaLeavesPeripheralYawUnchanged) {
  auto s = empty_s1(10.0);
  s.events.push_back({std::nullopt, Stimulus::door, 2.0, 7.0, 250.0});
  auto p = calm_persona();
  p.head_turn_prob = 0.0;
  for (double y : simulate_trace(s, p, 3).yaw_deg) EXPECT_EQ(y, 180.0);
}

TEST(SimulateProperty, HumanDominantPersonaTargetsHumanWhenBothActive) {
  const auto spec = builtin_s1();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto persona = sample_persona(seed);
    const auto sim = simulate(spec, persona, seed);
    for (std::size_t f = 0; f < sim.log.candidate.size(); ++f) {
      bool human = false, nonhuman = false;
      for (const auto& e : spec.events) {
        if (e.start_s <= frame_time(f) && frame_time(f) < e.end_s) (is_human(e.kind) ? human : nonhuman) = true;
      }
      if (human && nonhuman) {
        ASSERT_GE(sim.log.candidate[f], 0);
        EXPECT_TRUE(is_human(spec.events[static_cast<std::size_t>(sim.log.candidate[f])].kind)) << f;
      }
    }
  }
}

TEST(SimulateProperty, StraightAheadFramesGrowWithBoredom) {
  const auto spec = builtin_s1();
  auto p = sample_persona(4);
  p.noise_deg = 0.0;
  p.head_turn_prob = 1.0;
  std::size_t previous = 0;
  for (double rate : {0.0, 0.01, 0.05, 0.2, 1.0}) {
    p.boredom_rate = rate;
    const auto sim = simulate(spec, p, 8);
    const auto ahead = static_cast<std::size_t>(std::count(sim.log.target.begin(), sim.log.target.end(), -1));
    EXPECT_GE(ahead, previous) << rate;
    previous = ahead;
  }
}

TEST(PopulationStats, IdenticalTracesHaveZeroStd) {
  const auto t = constant_trace(0, {170.0, 180.0, 200.0});
  const auto s = population_stats({t, t, t});
  for (double v : s.std) EXPECT_EQ(v, 0.0);
}

TEST(PopulationStats, TwoPointPopulationConvention) {
  const auto s = population_stats({constant_trace(0, {170.0}), constant_trace(1, {190.0})});
  EXPECT_DOUBLE_EQ(s.mean[0], 180.0);
  EXPECT_DOUBLE_EQ(s.std[0], 10.0);
}

TEST(PopulationStats, MismatchedLengthsRejected) {
  EXPECT_THROW(population_stats({constant_trace(0, {1.0}), constant_trace(1, {1.0, 2.0})}), Error);
}

TEST(PopulationStats, DefaultS1PopulationStaysNearStraightAhead) {
  const auto spec = builtin_s1();
  std::vector<Persona> personas;
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t i = 0; i <= 40; ++i) {
    personas.push_back(sample_persona(i));
    seeds.push_back(i);
  }
  const auto stats = population_stats(simulate_population(spec, personas, seeds));
  const auto near = std::count_if(stats.mean.begin(), stats.mean.end(), [](double m) { return std::abs(m - 180.0) <= 30.0; });
  EXPECT_GE(static_cast<double>(near), 0.7 * static_cast<double>(stats.mean.size()));
}

TEST(BayesReference, SingleDeterministicPersonaIsPerfect) {
  const auto ref = bayes_reference(builtin_s1(), {calm_persona()}, {1});
  EXPECT_DOUBLE_EQ(ref.top1, 1.0);
}

TEST(BayesReference, TwoDisagreeingPersonasGiveOneHalf) {
  const auto bins = ClassBins::equal_width(90, 270, 6);
  const auto ref = bayes_reference_from_traces(
      {constant_trace(0, {100.0, 260.0, 100.0}), constant_trace(1, {260.0, 100.0, 260.0})}, bins);
  EXPECT_DOUBLE_EQ(ref.top1, 0.5);
  EXPECT_DOUBLE_EQ(ref.top3, 1.0);
}

TEST(BayesReference, BoundsAreNested) {
  std::vector<Persona> personas;
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t i = 0; i < 8; ++i) {
    personas.push_back(sample_persona(i));
    seeds.push_back(i);
  }
  const auto ref = bayes_reference(builtin_s2(), personas, seeds, kSeqLen - 1);
  EXPECT_LE(ref.top1, ref.top3);
  EXPECT_LE(ref.top3, 1.0);
  EXPECT_GT(ref.top1, 0.0);
  EXPECT_THROW(bayes_reference(builtin_s2(), {}, {}), Error);
}

TEST(TraceCsv, RoundTripIsExact) {
  const auto spec = builtin_s2();
  std::vector<GazeTrace> traces{simulate_trace(spec, sample_persona(1), 1, 0),
                                simulate_trace(spec, sample_persona(2), 2, 1)};
  std::stringstream ss;
  write_traces_csv(ss, traces);
  EXPECT_EQ(read_traces_csv(ss, spec.id), traces);
}

TEST(TraceCsv, MalformedInputRejected) {
  std::stringstream bad_header("pid,frame,yaw\n0,0,1\n");
  EXPECT_THROW(read_traces_csv(bad_header, "s1"), Error);
  std::stringstream gap("participant_id,frame,yaw_deg\n0,0,1\n0,2,1\n");
  EXPECT_THROW(read_traces_csv(gap, "s1"), Error);
  std::stringstream junk("participant_id,frame,yaw_deg\n0,0,abc\n");
  EXPECT_THROW(read_traces_csv(junk, "s1"), Error);
}

TEST(PersonaJson, RoundTripIsExact) {
  std::vector<PopulationMember> members{{0, 10, 10, sample_persona(10)}, {1, 11, 11, sample_persona(11)}};
  const auto back = population_from_json(json::parse(population_to_json(members).dump()));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].persona, members[1].persona);
  EXPECT_EQ(back[1].persona_seed, 11u);
}
