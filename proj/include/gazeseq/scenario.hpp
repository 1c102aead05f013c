#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gazeseq/nn/tensor.hpp"

namespace gazeseq {

inline constexpr int kFrameHz = 10;
inline constexpr double kFramePeriod = 0.1;
inline constexpr std::size_t kSeqLen = 30;
inline constexpr std::size_t kNumFeatures = 24;
inline constexpr std::size_t kMatrixCols = kNumFeatures + 1;

enum class StimulusCategory { human, nonhuman };

enum class Stimulus : std::uint8_t {
  // human
  standing_silent,
  standing_speaking,
  moving_right,
  moving_left,
  moving_ahead,
  waving_silent,
  waving_speaking,
  arms_crossed_silent,
  arms_crossed_speaking,
  conversing,
  entering,
  exiting,
  pointing,
  // non-human
  footsteps,
  tv_news,
  tv_static,
  door,
  phone_ring,
  object_fall,
  doorbell,
  alarm,
  knock,
  phone_alert,
  screen_on,
};

inline constexpr std::size_t kNumStimuli = 24;

struct StimulusInfo {
  Stimulus kind;
  std::string_view name;
  StimulusCategory category;
};

inline constexpr std::array<StimulusInfo, kNumStimuli> kStimulusCatalog{{
    {Stimulus::standing_silent, "standing-silent", StimulusCategory::human},
    {Stimulus::standing_speaking, "standing-speaking", StimulusCategory::human},
    {Stimulus::moving_right, "moving-right", StimulusCategory::human},
    {Stimulus::moving_left, "moving-left", StimulusCategory::human},
    {Stimulus::moving_ahead, "moving-ahead", StimulusCategory::human},
    {Stimulus::waving_silent, "waving-silent", StimulusCategory::human},
    {Stimulus::waving_speaking, "waving-speaking", StimulusCategory::human},
    {Stimulus::arms_crossed_silent, "arms-crossed-silent", StimulusCategory::human},
    {Stimulus::arms_crossed_speaking, "arms-crossed-speaking", StimulusCategory::human},
    {Stimulus::conversing, "conversing", StimulusCategory::human},
    {Stimulus::entering, "entering", StimulusCategory::human},
    {Stimulus::exiting, "exiting", StimulusCategory::human},
    {Stimulus::pointing, "pointing", StimulusCategory::human},
    {Stimulus::footsteps, "footsteps", StimulusCategory::nonhuman},
    {Stimulus::tv_news, "tv-news", StimulusCategory::nonhuman},
    {Stimulus::tv_static, "tv-static", StimulusCategory::nonhuman},
    {Stimulus::door, "door", StimulusCategory::nonhuman},
    {Stimulus::phone_ring, "phone-ring", StimulusCategory::nonhuman},
    {Stimulus::object_fall, "object-fall", StimulusCategory::nonhuman},
    {Stimulus::doorbell, "doorbell", StimulusCategory::nonhuman},
    {Stimulus::alarm, "alarm", StimulusCategory::nonhuman},
    {Stimulus::knock, "knock", StimulusCategory::nonhuman},
    {Stimulus::phone_alert, "phone-alert", StimulusCategory::nonhuman},
    {Stimulus::screen_on, "screen-on", StimulusCategory::nonhuman},
}};

constexpr const StimulusInfo& info(Stimulus s) { return kStimulusCatalog[static_cast<std::size_t>(s)]; }
constexpr std::string_view to_string(Stimulus s) { return info(s).name; }
constexpr bool is_human(Stimulus s) { return info(s).category == StimulusCategory::human; }

inline std::optional<Stimulus> find_stimulus(std::string_view name) {
  for (const auto& e : kStimulusCatalog) {
    if (e.name == name) return e.kind;
  }
  return std::nullopt;
}

/// Throws on names outside the closed catalog.
inline Stimulus parse_stimulus(std::string_view name) {
  if (auto s = find_stimulus(name)) return *s;
  throw Error("unknown stimulus kind '" + std::string(name) + "'");
}

/// Speaking variants carry an implicit "speaking" attribute on top of their silent behavior.
constexpr bool is_speaking_variant(Stimulus s) {
  return s == Stimulus::standing_speaking || s == Stimulus::waving_speaking ||
         s == Stimulus::arms_crossed_speaking;
}

constexpr std::optional<Stimulus> silent_variant(Stimulus s) {
  switch (s) {
    case Stimulus::standing_speaking: return Stimulus::standing_silent;
    case Stimulus::waving_speaking: return Stimulus::waving_silent;
    case Stimulus::arms_crossed_speaking: return Stimulus::arms_crossed_silent;
    default: return std::nullopt;
  }
}

enum class Direction { right, left };

struct AngleConvention {
  double straight_ahead_deg = 180.0;
  double min_deg = 90.0;
  double max_deg = 270.0;
  Direction positive_direction = Direction::right;

  double clamp(double yaw) const { return std::clamp(yaw, min_deg, max_deg); }
  bool operator==(const AngleConvention&) const = default;
};

struct TimedEvent {
  std::optional<std::string> entity;
  Stimulus kind = Stimulus::standing_silent;
  double start_s = 0.0;
  double end_s = 0.0;
  double source_yaw_deg = 0.0;

  bool operator==(const TimedEvent&) const = default;
};

struct ScenarioSpec {
  std::string id = "custom";
  double duration_s = 0.0;
  int frame_hz = kFrameHz;
  int n_classes = 6;
  std::vector<std::string> persons;
  std::vector<std::string> human_feature_names;
  std::vector<std::string> nonhuman_feature_names;
  std::vector<TimedEvent> events;
  AngleConvention convention;

  std::size_t frames() const { return static_cast<std::size_t>(std::llround(duration_s * frame_hz)); }
  bool operator==(const ScenarioSpec&) const = default;
};

/// Frame t covers [t/hz, (t+1)/hz). Dividing (rather than multiplying by 0.1) keeps the grid
/// exact at decimal boundaries such as 0.3 s.
inline double frame_time(std::size_t frame, int hz = kFrameHz) {
  return static_cast<double>(frame) / static_cast<double>(hz);
}

namespace detail {

// Attribute groups a human stimulus sets, each listing alternative feature names in order of
// preference. The first alternative present in the scenario's feature list is used.
inline std::vector<std::vector<std::string_view>> human_attributes(Stimulus s) {
  using G = std::vector<std::vector<std::string_view>>;
  switch (s) {
    case Stimulus::standing_silent: return G{{"present"}};
    case Stimulus::standing_speaking: return G{{"present"}, {"speaking"}};
    case Stimulus::moving_right:
    case Stimulus::moving_left:
    case Stimulus::moving_ahead:
    case Stimulus::entering:
    case Stimulus::exiting: return G{{"present"}, {"moving"}};
    case Stimulus::waving_silent: return G{{"present"}, {"waving", "gesturing"}};
    case Stimulus::waving_speaking: return G{{"present"}, {"waving", "gesturing"}, {"speaking"}};
    case Stimulus::arms_crossed_silent: return G{{"present"}, {"arms-crossed", "gesturing"}};
    case Stimulus::arms_crossed_speaking:
      return G{{"present"}, {"arms-crossed", "gesturing"}, {"speaking"}};
    case Stimulus::conversing: return G{{"present"}, {"speaking"}};
    case Stimulus::pointing: return G{{"present"}, {"pointing", "gesturing"}};
    default: return {};
  }
}

// Merged non-human column names used when a scenario lacks a column for the exact kind.
inline std::string_view nonhuman_alias(Stimulus s) {
  switch (s) {
    case Stimulus::tv_news:
    case Stimulus::tv_static: return "tv";
    case Stimulus::doorbell:
    case Stimulus::alarm: return "chime";
    case Stimulus::screen_on: return "screen";
    default: return {};
  }
}

template <typename C>
std::optional<std::size_t> index_of(const C& names, std::string_view n) {
  auto it = std::find(names.begin(), names.end(), n);
  if (it == names.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names.begin());
}

}  // namespace detail

/// Feature columns (0-based over the 24 stimulus indicators) an event switches on.
/// Empty if the event cannot be represented in this scenario's layout.
inline std::vector<std::size_t> event_columns(const ScenarioSpec& spec, Stimulus kind,
                                              const std::optional<std::string>& entity) {
  std::vector<std::size_t> cols;
  const std::size_t per_person = spec.human_feature_names.size();
  if (is_human(kind)) {
    if (!entity) return cols;
    auto person = detail::index_of(spec.persons, *entity);
    if (!person) return cols;
    for (const auto& group : detail::human_attributes(kind)) {
      for (std::string_view alt : group) {
        if (auto f = detail::index_of(spec.human_feature_names, alt)) {
          cols.push_back(*person * per_person + *f);
          break;
        }
      }
    }
  } else {
    const std::size_t base = spec.persons.size() * per_person;
    auto f = detail::index_of(spec.nonhuman_feature_names, to_string(kind));
    if (!f && !detail::nonhuman_alias(kind).empty()) {
      f = detail::index_of(spec.nonhuman_feature_names, detail::nonhuman_alias(kind));
    }
    if (f) cols.push_back(base + *f);
  }
  return cols;
}

inline std::vector<std::size_t> event_columns(const ScenarioSpec& spec, const TimedEvent& e) {
  return event_columns(spec, e.kind, e.entity);
}

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

namespace detail {
inline std::string fmt_num(double x) {
  std::ostringstream os;
  os << x;
  return os.str();
}
}  // namespace detail

/// Reports every violated scenario invariant. Violations are data; this never throws.
inline ValidationReport validate_scenario(const ScenarioSpec& spec) {
  ValidationReport r;
  auto add = [&](std::string msg) { r.violations.push_back(std::move(msg)); };
  const bool builtin = spec.id == "s1" || spec.id == "s2";

  if (spec.frame_hz != kFrameHz) add("frame_hz " + std::to_string(spec.frame_hz) + " ≠ 10");
  if (!(spec.duration_s > 0.0) || !std::isfinite(spec.duration_s)) add("duration must be positive");
  const std::size_t n_feat =
      spec.persons.size() * spec.human_feature_names.size() + spec.nonhuman_feature_names.size();
  if (n_feat != kNumFeatures) add("feature count " + std::to_string(n_feat) + " ≠ 24");
  if (builtin) {
    const int expected = spec.id == "s1" ? 6 : 7;
    if (spec.n_classes != expected) {
      add("n_classes " + std::to_string(spec.n_classes) + " ≠ " + std::to_string(expected) +
          " for built-in " + spec.id);
    }
  } else if (spec.n_classes < 2 || spec.n_classes > 255) {
    add("n_classes must lie in [2, 255]");
  }

  auto check_unique = [&](const std::vector<std::string>& names, const char* what) {
    std::set<std::string> seen;
    for (const auto& n : names) {
      if (n.empty()) add(std::string("empty name in ") + what);
      if (!seen.insert(n).second) add(std::string("duplicate ") + what + " '" + n + "'");
    }
  };
  check_unique(spec.persons, "person");
  check_unique(spec.human_feature_names, "human feature");
  check_unique(spec.nonhuman_feature_names, "non-human feature");

  const auto& c = spec.convention;
  if (!(c.min_deg < c.straight_ahead_deg && c.straight_ahead_deg < c.max_deg)) {
    add("angle convention requires min_deg < straight_ahead_deg < max_deg");
  }
  if (builtin && c.max_deg - c.min_deg != 180.0) add("angle range must span 180 degrees");

  constexpr double kTol = 1e-9;
  for (std::size_t i = 0; i < spec.events.size(); ++i) {
    const auto& e = spec.events[i];
    const std::string tag = "event " + std::to_string(i) + ": ";
    if (e.end_s < e.start_s) {
      add(tag + "negative duration");
    } else if (e.end_s == e.start_s) {
      add(tag + "zero duration");
    } else if (e.end_s - e.start_s < kFramePeriod - kTol) {
      add(tag + "shorter than one frame");
    }
    if (e.start_s < 0.0) add(tag + "starts before 0");
    if (e.end_s > spec.duration_s + kTol) add(tag + "ends after scenario duration");
    if (e.source_yaw_deg < c.min_deg || e.source_yaw_deg > c.max_deg) {
      add(tag + "source yaw " + detail::fmt_num(e.source_yaw_deg) + " outside [" +
          detail::fmt_num(c.min_deg) + ", " + detail::fmt_num(c.max_deg) + "]");
    }
    if (is_human(e.kind)) {
      if (!e.entity) {
        add(tag + "human stimulus without entity");
      } else if (!detail::index_of(spec.persons, *e.entity)) {
        add(tag + "unknown entity '" + *e.entity + "'");
      }
    }
    if ((!is_human(e.kind) || (e.entity && detail::index_of(spec.persons, *e.entity))) &&
        event_columns(spec, e).empty()) {
      add(tag + "kind '" + std::string(to_string(e.kind)) + "' has no feature column");
    }
  }
  return r;
}

inline void require_valid(const ScenarioSpec& spec) {
  auto report = validate_scenario(spec);
  if (!report.ok()) throw Error("invalid scenario '" + spec.id + "': " + report.violations.front());
}

/// Column labels for the 24 stimulus indicators: persons blocked in roster order, then non-human.
inline std::vector<std::string> feature_layout(const ScenarioSpec& spec) {
  require_valid(spec);
  std::vector<std::string> labels;
  labels.reserve(kNumFeatures);
  for (const auto& p : spec.persons) {
    for (const auto& f : spec.human_feature_names) labels.push_back(p + "." + f);
  }
  for (const auto& f : spec.nonhuman_feature_names) labels.push_back("nh." + f);
  return labels;
}

/// T x 25 scene-properties matrix: column 0 is the frame index, columns 1..24 are binary
/// stimulus indicators.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::vector<std::int32_t> cells;  // row-major, rows x kMatrixCols

  static FeatureMatrix zeros(std::size_t t) {
    FeatureMatrix m;
    m.rows = t;
    m.cells.assign(t * kMatrixCols, 0);
    for (std::size_t r = 0; r < t; ++r) m.cells[r * kMatrixCols] = static_cast<std::int32_t>(r);
    return m;
  }
  std::int32_t at(std::size_t row, std::size_t col) const { return cells[row * kMatrixCols + col]; }
  std::int32_t& at(std::size_t row, std::size_t col) { return cells[row * kMatrixCols + col]; }
  /// Stimulus feature f (0-based, excludes the time column).
  std::int32_t feature(std::size_t row, std::size_t f) const { return at(row, f + 1); }
  bool operator==(const FeatureMatrix&) const = default;
};

/// Frame t has a feature set iff a mapped event satisfies start <= t/10 < end.
inline FeatureMatrix rasterize(const ScenarioSpec& spec) {
  require_valid(spec);
  auto m = FeatureMatrix::zeros(spec.frames());
  for (const auto& e : spec.events) {
    const auto cols = event_columns(spec, e);
    for (std::size_t t = 0; t < m.rows; ++t) {
      const double ts = frame_time(t, spec.frame_hz);
      if (e.start_s <= ts && ts < e.end_s) {
        for (std::size_t c : cols) m.at(t, c + 1) = 1;
      }
    }
  }
  return m;
}

/// True for directions more than `half_width` degrees away from straight ahead.
inline bool is_peripheral(const AngleConvention& c, double yaw, double half_width = 30.0) {
  return std::abs(yaw - c.straight_ahead_deg) > half_width;
}

}  // namespace gazeseq
