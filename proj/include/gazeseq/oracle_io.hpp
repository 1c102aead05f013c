#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "gazeseq/oracle.hpp"
#include "gazeseq/scenario_io.hpp"

namespace gazeseq {

/// Shortest decimal text that parses back to exactly the same double.
inline std::string format_double(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc{}) throw Error("cannot format number");
  return std::string(buf, end);
}

inline double parse_double(std::string_view s, const std::string& where) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size()) {
    throw Error(where + ": invalid number '" + std::string(s) + "'");
  }
  return v;
}

inline std::uint64_t parse_uint(std::string_view s, const std::string& where) {
  std::uint64_t v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size() || s.empty()) {
    throw Error(where + ": invalid integer '" + std::string(s) + "'");
  }
  return v;
}

namespace detail {
inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    parts.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}
}  // namespace detail

// ---- trace CSV -----------------------------------------------------------------------------

inline constexpr const char* kTraceHeader = "participant_id,frame,yaw_deg";

inline void write_traces_csv(std::ostream& out, const std::vector<GazeTrace>& traces) {
  out << kTraceHeader << '\n';
  for (const auto& t : traces) {
    for (std::size_t f = 0; f < t.yaw_deg.size(); ++f) {
      out << t.participant_id << ',' << f << ',' << format_double(t.yaw_deg[f]) << '\n';
    }
  }
  if (!out) throw Error("failed writing traces");
}

/// Reads one or more participants from a trace CSV. Frames must be contiguous from 0 per
/// participant; participants are returned in order of first appearance.
inline std::vector<GazeTrace> read_traces_csv(std::istream& in, const std::string& scenario_id,
                                              const std::string& where = "trace file") {
  std::string line;
  if (!std::getline(in, line)) throw Error(where + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTraceHeader) throw Error(where + ": expected header '" + kTraceHeader + "'");
  std::vector<GazeTrace> traces;
  std::map<std::uint32_t, std::size_t> index;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string at = where + " line " + std::to_string(line_no);
    const auto parts = detail::split(line, ',');
    if (parts.size() != 3) throw Error(at + ": expected 3 fields");
    const auto pid = static_cast<std::uint32_t>(parse_uint(parts[0], at));
    const auto frame = parse_uint(parts[1], at);
    const double yaw = parse_double(parts[2], at);
    auto [it, inserted] = index.try_emplace(pid, traces.size());
    if (inserted) traces.push_back(GazeTrace{pid, scenario_id, {}});
    auto& t = traces[it->second];
    if (frame != t.yaw_deg.size()) throw Error(at + ": frames must be contiguous from 0");
    t.yaw_deg.push_back(yaw);
  }
  return traces;
}

inline void save_traces_csv(const std::vector<GazeTrace>& traces, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_traces_csv(out, traces);
}

inline std::vector<GazeTrace> load_traces_csv(const std::filesystem::path& path, const std::string& scenario_id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_traces_csv(in, scenario_id, path.string());
}

// ---- persona JSON --------------------------------------------------------------------------

struct PopulationMember {
  std::uint32_t participant_id = 0;
  std::uint64_t persona_seed = 0;
  std::uint64_t trace_seed = 0;
  Persona persona;
};

inline json to_json(const Persona& p) {
  json weights = json::object();
  for (const auto& e : kStimulusCatalog) weights[std::string(e.name)] = p.weights[static_cast<std::size_t>(e.kind)];
  return json{{"weights", weights},
              {"latency_s", p.latency_s},
              {"dwell_min_s", p.dwell_min_s},
              {"head_turn_prob", p.head_turn_prob},
              {"noise_deg", p.noise_deg},
              {"boredom_rate", p.boredom_rate}};
}

inline Persona persona_from_json(const json& j, const std::string& where) {
  using detail::required;
  detail::reject_unknown_fields(j, {"weights", "latency_s", "dwell_min_s", "head_turn_prob", "noise_deg", "boredom_rate"},
                                where);
  Persona p;
  const auto weights = required<std::map<std::string, double>>(j, "weights", where);
  for (const auto& [name, w] : weights) p.weights[static_cast<std::size_t>(parse_stimulus(name))] = w;
  p.latency_s = required<double>(j, "latency_s", where);
  p.dwell_min_s = required<double>(j, "dwell_min_s", where);
  p.head_turn_prob = required<double>(j, "head_turn_prob", where);
  p.noise_deg = required<double>(j, "noise_deg", where);
  p.boredom_rate = required<double>(j, "boredom_rate", where);
  p.validate();
  return p;
}

inline json population_to_json(const std::vector<PopulationMember>& members) {
  json arr = json::array();
  for (const auto& m : members) {
    arr.push_back({{"participant_id", m.participant_id},
                   {"persona_seed", m.persona_seed},
                   {"trace_seed", m.trace_seed},
                   {"persona", to_json(m.persona)}});
  }
  return arr;
}

inline std::vector<PopulationMember> population_from_json(const json& j) {
  if (!j.is_array()) throw Error("population: expected a JSON array");
  std::vector<PopulationMember> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string where = "population entry " + std::to_string(i);
    detail::reject_unknown_fields(j[i], {"participant_id", "persona_seed", "trace_seed", "persona"}, where);
    PopulationMember m;
    m.participant_id = detail::required<std::uint32_t>(j[i], "participant_id", where);
    m.persona_seed = detail::required<std::uint64_t>(j[i], "persona_seed", where);
    m.trace_seed = detail::required<std::uint64_t>(j[i], "trace_seed", where);
    if (!j[i].contains("persona")) throw Error(where + ": missing field 'persona'");
    m.persona = persona_from_json(j[i].at("persona"), where);
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace gazeseq
