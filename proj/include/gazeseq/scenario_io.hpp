#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "gazeseq/scenario.hpp"

namespace gazeseq {

using json = nlohmann::json;

namespace detail {

inline void reject_unknown_fields(const json& obj, std::initializer_list<const char*> allowed,
                                  const std::string& where) {
  if (!obj.is_object()) throw Error(where + ": expected a JSON object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items()) {
    if (!ok.contains(key)) throw Error(where + ": unknown field '" + key + "'");
  }
}

template <typename T>
T required(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw Error(where + ": missing field '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(where + ": field '" + key + "' has the wrong type");
  }
}

}  // namespace detail

inline json to_json(const ScenarioSpec& s) {
  json events = json::array();
  for (const auto& e : s.events) {
    events.push_back({{"entity", e.entity ? json(*e.entity) : json(nullptr)},
                      {"kind", std::string(to_string(e.kind))},
                      {"start_s", e.start_s},
                      {"end_s", e.end_s},
                      {"source_yaw_deg", e.source_yaw_deg}});
  }
  return json{{"id", s.id},
              {"duration_s", s.duration_s},
              {"frame_hz", s.frame_hz},
              {"n_classes", s.n_classes},
              {"persons", s.persons},
              {"human_feature_names", s.human_feature_names},
              {"nonhuman_feature_names", s.nonhuman_feature_names},
              {"events", events},
              {"convention",
               {{"straight_ahead_deg", s.convention.straight_ahead_deg},
                {"min_deg", s.convention.min_deg},
                {"max_deg", s.convention.max_deg},
                {"positive_direction",
                 s.convention.positive_direction == Direction::right ? "right" : "left"}}}};
}

inline ScenarioSpec scenario_from_json(const json& j) {
  using detail::required;
  const std::string where = "scenario";
  detail::reject_unknown_fields(j,
                                {"id", "duration_s", "frame_hz", "n_classes", "persons",
                                 "human_feature_names", "nonhuman_feature_names", "events",
                                 "convention"},
                                where);
  ScenarioSpec s;
  s.id = required<std::string>(j, "id", where);
  s.duration_s = required<double>(j, "duration_s", where);
  s.frame_hz = required<int>(j, "frame_hz", where);
  s.n_classes = required<int>(j, "n_classes", where);
  s.persons = required<std::vector<std::string>>(j, "persons", where);
  s.human_feature_names = required<std::vector<std::string>>(j, "human_feature_names", where);
  s.nonhuman_feature_names = required<std::vector<std::string>>(j, "nonhuman_feature_names", where);

  const json& conv = j.contains("convention") ? j.at("convention") : throw Error(where + ": missing field 'convention'");
  detail::reject_unknown_fields(conv, {"straight_ahead_deg", "min_deg", "max_deg", "positive_direction"},
                                "convention");
  s.convention.straight_ahead_deg = required<double>(conv, "straight_ahead_deg", "convention");
  s.convention.min_deg = required<double>(conv, "min_deg", "convention");
  s.convention.max_deg = required<double>(conv, "max_deg", "convention");
  const auto dir = required<std::string>(conv, "positive_direction", "convention");
  if (dir == "right") {
    s.convention.positive_direction = Direction::right;
  } else if (dir == "left") {
    s.convention.positive_direction = Direction::left;
  } else {
    throw Error("convention: positive_direction must be 'right' or 'left'");
  }

  const json& events = j.contains("events") ? j.at("events") : throw Error(where + ": missing field 'events'");
  if (!events.is_array()) throw Error(where + ": 'events' must be an array");
  for (std::size_t i = 0; i < events.size(); ++i) {
    const std::string ew = "event " + std::to_string(i);
    const json& ej = events[i];
    detail::reject_unknown_fields(ej, {"entity", "kind", "start_s", "end_s", "source_yaw_deg"}, ew);
    TimedEvent e;
    if (ej.contains("entity") && !ej.at("entity").is_null()) {
      e.entity = required<std::string>(ej, "entity", ew);
    }
    e.kind = parse_stimulus(required<std::string>(ej, "kind", ew));
    e.start_s = required<double>(ej, "start_s", ew);
    e.end_s = required<double>(ej, "end_s", ew);
    e.source_yaw_deg = required<double>(ej, "source_yaw_deg", ew);
    s.events.push_back(std::move(e));
  }
  return s;
}

inline ScenarioSpec parse_scenario(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("scenario JSON parse error: ") + e.what());
  }
  return scenario_from_json(j);
}

inline ScenarioSpec load_scenario_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open scenario file " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_scenario(text);
}

inline void save_scenario_file(const ScenarioSpec& s, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write scenario file " + path.string());
  out << to_json(s).dump(2) << '\n';
}

}  // namespace gazeseq
