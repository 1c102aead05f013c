#pragma once

#include <algorithm>
#include <array>
#include <string>

#include "gazeseq/scenario.hpp"

namespace gazeseq {

namespace detail {

inline double source_yaw_s1(Stimulus s) {
  switch (s) {
    case Stimulus::footsteps: return 120.0;
    case Stimulus::tv_news:
    case Stimulus::tv_static: return 240.0;
    case Stimulus::door: return 100.0;
    case Stimulus::phone_ring: return 260.0;
    case Stimulus::object_fall: return 130.0;
    case Stimulus::doorbell: return 105.0;
    case Stimulus::alarm: return 250.0;
    default: return 180.0;
  }
}

inline double source_yaw_s2(Stimulus s) {
  switch (s) {
    case Stimulus::object_fall: return 165.0;
    case Stimulus::screen_on: return 15.0;
    case Stimulus::tv_news:
    case Stimulus::tv_static: return 20.0;
    case Stimulus::door: return 170.0;
    case Stimulus::knock: return 160.0;
    case Stimulus::phone_alert: return 130.0;
    case Stimulus::phone_ring: return 30.0;
    default: return 90.0;
  }
}

inline constexpr std::array<Stimulus, 13> kHumanCycle{
    Stimulus::entering,          Stimulus::standing_speaking,     Stimulus::waving_silent,
    Stimulus::conversing,        Stimulus::moving_right,          Stimulus::pointing,
    Stimulus::arms_crossed_speaking, Stimulus::exiting,           Stimulus::standing_silent,
    Stimulus::waving_speaking,   Stimulus::moving_left,           Stimulus::moving_ahead,
    Stimulus::arms_crossed_silent,
};

inline double round_tenth(double x) { return std::round(x * 10.0) / 10.0; }

}  // namespace detail

/// Animated scenario: three characters, 48 five-second segments (240 s), 6 gaze classes.
/// Characters sit near the centre of the field of view; non-human sources sit in the corners.
inline ScenarioSpec builtin_s1() {
  using detail::round_tenth;
  ScenarioSpec s;
  s.id = "s1";
  s.duration_s = 240.0;
  s.frame_hz = kFrameHz;
  s.n_classes = 6;
  s.persons = {"p1", "p2", "p3"};
  s.human_feature_names = {"present", "speaking", "moving", "waving", "arms-crossed", "pointing"};
  s.nonhuman_feature_names = {"footsteps", "tv", "door", "phone-ring", "object-fall", "chime"};
  s.convention = AngleConvention{180.0, 90.0, 270.0, Direction::right};

  const std::array<double, 3> person_yaw{155.0, 182.0, 212.0};
  const std::array<Stimulus, 8> nonhuman{Stimulus::footsteps,  Stimulus::tv_news,
                                         Stimulus::door,       Stimulus::tv_static,
                                         Stimulus::phone_ring, Stimulus::object_fall,
                                         Stimulus::doorbell,   Stimulus::alarm};
  std::size_t h = 0, n = 0;
  for (std::size_t k = 0; k < 48; ++k) {
    const double base = 5.0 * static_cast<double>(k);
    if (k % 3 != 2) {
      const Stimulus kind = detail::kHumanCycle[h % detail::kHumanCycle.size()];
      const std::size_t who = h % 3;
      const double start = round_tenth(base + 0.5 * static_cast<double>(h % 3));
      const double end = round_tenth(start + 3.5 + 0.5 * static_cast<double>(h % 2));
      s.events.push_back({s.persons[who], kind, start, end, person_yaw[who]});
      if (kind == Stimulus::conversing) {
        const std::size_t other = (who + 1) % 3;
        s.events.push_back({s.persons[other], kind, start, end, person_yaw[other]});
      } else if (h % 2 == 1) {
        const std::size_t other = (who + 2) % 3;
        const Stimulus second = detail::kHumanCycle[(h + 5) % detail::kHumanCycle.size()];
        s.events.push_back({s.persons[other], second, round_tenth(base + 1.0),
                            round_tenth(base + 4.5), person_yaw[other]});
      }
      ++h;
    }
    if (k % 2 == 0 || k % 3 == 2) {
      const Stimulus kind = nonhuman[n % nonhuman.size()];
      const double start = round_tenth(base + 1.0 + 0.5 * static_cast<double>(n % 3));
      const double end = round_tenth(start + 2.0 + 0.5 * static_cast<double>(n % 3));
      s.events.push_back({std::nullopt, kind, start, end, detail::source_yaw_s1(kind)});
      ++n;
    }
  }
  return s;
}

/// Filmed scenario: four people, roughly two minutes (120 s), 7 gaze classes, with behaviors
/// that overlap segment boundaries.
inline ScenarioSpec builtin_s2() {
  using detail::round_tenth;
  ScenarioSpec s;
  s.id = "s2";
  s.duration_s = 120.0;
  s.frame_hz = kFrameHz;
  s.n_classes = 7;
  s.persons = {"p1", "p2", "p3", "p4"};
  s.human_feature_names = {"present", "speaking", "moving", "gesturing"};
  s.nonhuman_feature_names = {"object-fall", "screen-on", "tv-news", "tv-static",
                              "door",        "knock",     "phone-alert", "phone-ring"};
  s.convention = AngleConvention{90.0, 0.0, 180.0, Direction::right};

  const std::array<double, 4> person_yaw{45.0, 74.0, 112.0, 150.0};
  // Every fourth segment has no people active, so far-left and far-right sources get attention.
  const std::array<Stimulus, 6> solo{Stimulus::screen_on, Stimulus::door,      Stimulus::tv_news,
                                     Stimulus::knock,     Stimulus::tv_static, Stimulus::object_fall};
  const std::array<Stimulus, 4> mixed{Stimulus::phone_alert, Stimulus::phone_ring, Stimulus::object_fall,
                                      Stimulus::screen_on};
  std::size_t n = 0, m = 0;
  for (std::size_t k = 0; k < 24; ++k) {
    const double base = 5.0 * static_cast<double>(k);
    if (k % 4 == 3) {
      const Stimulus kind = solo[n++ % solo.size()];
      const double start = round_tenth(base + 0.5);
      s.events.push_back({std::nullopt, kind, start, round_tenth(start + 3.0), detail::source_yaw_s2(kind)});
      continue;
    }
    const std::size_t who = k % 4;
    const Stimulus kind = detail::kHumanCycle[k % detail::kHumanCycle.size()];
    const double start = round_tenth(base + 0.3 * static_cast<double>(k % 4));
    const double end = std::min(s.duration_s, round_tenth(start + 4.0 + 0.8 * static_cast<double>(k % 3)));
    s.events.push_back({s.persons[who], kind, start, end, person_yaw[who]});
    if (kind == Stimulus::conversing) {
      const std::size_t other = (who + 1) % 4;
      s.events.push_back({s.persons[other], kind, start, end, person_yaw[other]});
    }
    if (k % 3 != 0) {
      const std::size_t other = (k + 3) % 4;
      const Stimulus second = detail::kHumanCycle[(k + 6) % detail::kHumanCycle.size()];
      s.events.push_back({s.persons[other], second, round_tenth(base + 1.5), round_tenth(base + 4.5),
                          person_yaw[other]});
    }
    if (k % 2 == 0) {
      const Stimulus nh = mixed[m++ % mixed.size()];
      const double nh_start = round_tenth(base + 0.8 + 0.4 * static_cast<double>(m % 3));
      s.events.push_back({std::nullopt, nh, nh_start, round_tenth(nh_start + 2.5), detail::source_yaw_s2(nh)});
    }
  }
  return s;
}

inline ScenarioSpec builtin_scenario(const std::string& id) {
  if (id == "s1") return builtin_s1();
  if (id == "s2") return builtin_s2();
  throw Error("unknown built-in scenario '" + id + "'");
}

}  // namespace gazeseq
