#pragma once

#include <chrono>
#include <cmath>
#include <deque>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gazeseq/classes.hpp"
#include "gazeseq/model.hpp"
#include "gazeseq/oracle_io.hpp"
#include "gazeseq/preprocess.hpp"
#include "gazeseq/trainer.hpp"

namespace gazeseq {

enum class Phase { on, off };

struct StreamEvent {
  double t_s = 0.0;
  std::optional<std::string> entity;
  Stimulus kind = Stimulus::standing_silent;
  Phase phase = Phase::on;
  double source_yaw_deg = 0.0;
};

struct GazeCommand {
  double t_s = 0.0;
  std::size_t cls = 0;
  double yaw_deg = 0.0;
  std::vector<double> probs;
  bool switched = false;
};

enum class PolicyMode { argmax, top3_hysteresis };

inline PolicyMode parse_policy(std::string_view s) {
  if (s == "argmax") return PolicyMode::argmax;
  if (s == "top3-hysteresis") return PolicyMode::top3_hysteresis;
  throw Error("unknown policy '" + std::string(s) + "' (expected argmax or top3-hysteresis)");
}

/// Class chosen for `probs` given the previously commanded class.
inline std::size_t choose_class(PolicyMode mode, const Eigen::Ref<const Eigen::RowVectorXd>& probs,
                                std::optional<std::size_t> current) {
  const auto ranked = ranked_classes(probs);
  if (mode == PolicyMode::top3_hysteresis && current) {
    for (std::size_t i = 0; i < std::min<std::size_t>(3, ranked.size()); ++i) {
      if (ranked[i] == *current) return *current;
    }
  }
  return ranked.front();
}

struct LatencyStats {
  std::size_t ticks = 0;
  double mean_ms = 0.0;
  double max_ms = 0.0;
};

/// Single-threaded streaming controller. Frame f becomes final once an event later than f/10
/// arrives or frame f is ticked; its features are the columns of every event switched on at or
/// before f/10 and not yet switched off.
class Session {
 public:
  Session(ScenarioSpec meta, PolicyMode policy) : meta_(std::move(meta)), policy_(policy) {
    require_valid(meta_);
    bins_ = default_bins(meta_);
  }

  void load_model(GazeModel model) {
    if (model.n_classes() != static_cast<std::size_t>(meta_.n_classes)) {
      throw Error("model has " + std::to_string(model.n_classes()) + " classes, scenario expects " +
                  std::to_string(meta_.n_classes));
    }
    model_.emplace(std::move(model));
  }
  bool has_model() const { return model_.has_value(); }

  void ingest_event(const StreamEvent& e) {
    if (!std::isfinite(e.t_s) || e.t_s < 0.0) throw Error("invalid event time");
    if (e.t_s < last_time_) throw Error("time regression");
    const auto cols = event_columns(meta_, e.kind, e.entity);
    if (cols.empty()) {
      throw Error("stimulus '" + std::string(to_string(e.kind)) + "'" +
                  (e.entity ? " for entity '" + *e.entity + "'" : std::string(" without entity")) +
                  " has no feature column in this scenario");
    }
    const auto key = std::make_pair(e.entity.value_or(""), e.kind);
    if (e.phase == Phase::off && open_[key] == 0) throw Error("unmatched off");
    materialize_before(e.t_s);
    last_time_ = e.t_s;
    const int delta = e.phase == Phase::on ? 1 : -1;
    open_[key] += delta;
    for (std::size_t c : cols) active_[c] += delta;
  }

  GazeCommand tick(double t_s) {
    if (!model_) throw Error("no model loaded");
    const auto frame = grid_frame(t_s);
    if (t_s < last_time_) throw Error("time regression");
    if (last_tick_frame_ && frame <= *last_tick_frame_) throw Error("duplicate tick");
    const auto start = std::chrono::steady_clock::now();
    materialize_through(frame);
    last_time_ = t_s;
    last_tick_frame_ = frame;

    const Matrix probs = model_->forward(nn::make_batch(current_window()));
    GazeCommand cmd;
    cmd.t_s = t_s;
    std::optional<std::size_t> prev;
    if (!commands_.empty()) prev = commands_.back().cls;
    cmd.cls = choose_class(policy_, probs.row(0), prev);
    cmd.yaw_deg = bins_.center(cmd.cls);
    cmd.probs.assign(probs.data(), probs.data() + probs.size());
    cmd.switched = prev.has_value() && *prev != cmd.cls;
    commands_.push_back(cmd);

    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    latency_total_ms_ += ms;
    latency_max_ms_ = std::max(latency_max_ms_, ms);
    return cmd;
  }

  /// The 30-frame window ending at the most recently finalized frame, zero-padded before frame 0.
  WindowBytes current_window() const {
    WindowBytes w{};
    const std::size_t have = history_.size();
    for (std::size_t i = 0; i < have; ++i) {
      const auto& row = history_[i];
      std::copy(row.begin(), row.end(), w.begin() + static_cast<std::ptrdiff_t>((kSeqLen - have + i) * kNumFeatures));
    }
    return w;
  }

  const std::vector<GazeCommand>& commands() const { return commands_; }
  const ScenarioSpec& meta() const { return meta_; }
  const ClassBins& bins() const { return bins_; }

  LatencyStats latency() const {
    LatencyStats s;
    s.ticks = commands_.size();
    s.mean_ms = s.ticks == 0 ? 0.0 : latency_total_ms_ / static_cast<double>(s.ticks);
    s.max_ms = latency_max_ms_;
    return s;
  }

 private:
  using Row = std::array<std::uint8_t, kNumFeatures>;

  static std::size_t grid_frame(double t_s) {
    if (!std::isfinite(t_s) || t_s < 0.0) throw Error("invalid tick time");
    const double scaled = t_s * kFrameHz;
    const double rounded = std::round(scaled);
    if (std::abs(scaled - rounded) > 1e-6) throw Error("tick time not on the 0.1 s grid");
    return static_cast<std::size_t>(rounded);
  }

  Row current_row() const {
    Row r{};
    for (std::size_t c = 0; c < kNumFeatures; ++c) r[c] = active_[c] > 0 ? 1 : 0;
    return r;
  }

  void push_frame() {
    history_.push_back(current_row());
    if (history_.size() > kSeqLen) history_.pop_front();
    ++next_frame_;
  }

  void materialize_before(double t_s) {
    while (frame_time(next_frame_, meta_.frame_hz) < t_s) push_frame();
  }

  void materialize_through(std::size_t frame) {
    while (next_frame_ <= frame) push_frame();
  }

  ScenarioSpec meta_;
  PolicyMode policy_;
  ClassBins bins_;
  std::optional<GazeModel> model_;
  std::map<std::pair<std::string, Stimulus>, int> open_;
  std::array<int, kNumFeatures> active_{};
  std::deque<Row> history_;
  std::size_t next_frame_ = 0;
  double last_time_ = 0.0;
  std::optional<std::size_t> last_tick_frame_;
  std::vector<GazeCommand> commands_;
  double latency_total_ms_ = 0.0;
  double latency_max_ms_ = 0.0;
};

/// CSV of every command: t_s, class, yaw_deg, p0..p{K-1}.
inline void export_trace(const Session& session, std::ostream& out) {
  const auto& cmds = session.commands();
  if (cmds.empty()) throw Error("empty session");
  out << "t_s,class,yaw_deg";
  for (std::size_t k = 0; k < cmds.front().probs.size(); ++k) out << ",p" << k;
  out << '\n';
  for (const auto& c : cmds) {
    out << format_double(c.t_s) << ',' << c.cls << ',' << format_double(c.yaw_deg);
    for (double p : c.probs) out << ',' << format_double(p);
    out << '\n';
  }
}

// ---- line protocol -------------------------------------------------------------------------

inline std::string format_command(const GazeCommand& c) {
  std::ostringstream os;
  os << "GAZE " << format_double(c.t_s) << ' ' << c.cls << ' ' << format_double(c.yaw_deg);
  for (double p : c.probs) os << ' ' << format_double(p);
  os << ' ' << (c.switched ? 1 : 0);
  return os.str();
}

inline std::string format_event(const StreamEvent& e) {
  return "EVT " + format_double(e.t_s) + ' ' + e.entity.value_or("-") + ' ' + std::string(to_string(e.kind)) + ' ' +
         format_double(e.source_yaw_deg) + ' ' + (e.phase == Phase::on ? "on" : "off");
}

/// Handles one protocol line. Returns the output line, or nothing for accepted events and blank
/// lines. Errors are reported as `ERR <reason>` and leave the session usable.
inline std::optional<std::string> handle_line(Session& session, const std::string& raw) {
  std::string line = raw;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::istringstream is(line);
  std::vector<std::string> tok;
  for (std::string t; is >> t;) tok.push_back(t);
  if (tok.empty()) return std::nullopt;
  try {
    if (tok[0] == "EVT") {
      if (tok.size() != 6) throw Error("EVT expects 5 fields");
      StreamEvent e;
      e.t_s = parse_double(tok[1], "EVT time");
      if (tok[2] != "-") e.entity = tok[2];
      e.kind = parse_stimulus(tok[3]);
      e.source_yaw_deg = parse_double(tok[4], "EVT yaw");
      if (tok[5] == "on") {
        e.phase = Phase::on;
      } else if (tok[5] == "off") {
        e.phase = Phase::off;
      } else {
        throw Error("phase must be on or off");
      }
      session.ingest_event(e);
      return std::nullopt;
    }
    if (tok[0] == "TICK") {
      if (tok.size() != 2) throw Error("TICK expects 1 field");
      return format_command(session.tick(parse_double(tok[1], "TICK time")));
    }
    throw Error("unknown message '" + tok[0] + "'");
  } catch (const Error& e) {
    return "ERR " + std::string(e.what());
  }
}

inline void run_stream(Session& session, std::istream& in, std::ostream& out) {
  for (std::string line; std::getline(in, line);) {
    if (auto reply = handle_line(session, line)) out << *reply << '\n' << std::flush;
  }
}

/// Protocol lines that replay a scenario: at each frame, events starting or ending at or before
/// that frame's time, then a tick.
inline std::vector<std::string> replay_script(const ScenarioSpec& spec) {
  require_valid(spec);
  struct Edge {
    double t;
    int order;  // off before on at equal times
    std::size_t event;
  };
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < spec.events.size(); ++i) {
    edges.push_back({spec.events[i].start_s, 1, i});
    edges.push_back({spec.events[i].end_s, 0, i});
  }
  std::stable_sort(edges.begin(), edges.end(),
                   [](const Edge& a, const Edge& b) { return a.t != b.t ? a.t < b.t : a.order < b.order; });
  std::vector<std::string> lines;
  std::size_t next = 0;
  for (std::size_t f = 0; f < spec.frames(); ++f) {
    const double t = frame_time(f, spec.frame_hz);
    for (; next < edges.size() && edges[next].t <= t; ++next) {
      const auto& ev = spec.events[edges[next].event];
      lines.push_back(format_event({edges[next].t, ev.entity, ev.kind, edges[next].order == 1 ? Phase::on : Phase::off,
                                    ev.source_yaw_deg}));
    }
    lines.push_back("TICK " + format_double(t));
  }
  return lines;
}

}  // namespace gazeseq
