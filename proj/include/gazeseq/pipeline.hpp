#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "gazeseq/builtin_scenarios.hpp"
#include "gazeseq/oracle_io.hpp"
#include "gazeseq/preprocess.hpp"
#include "gazeseq/scenario_io.hpp"
#include "gazeseq/trainer.hpp"

namespace gazeseq {

inline constexpr const char* kToolName = "gazeseq";
inline constexpr const char* kToolVersion = "0.1.0";

/// 64-bit FNV-1a digest rendered as 16 hex digits.
inline std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

inline std::string file_digest(const std::filesystem::path& path) { return "fnv1a64:" + fnv1a_hex(read_file_bytes(path)); }

/// Provenance block attached to every JSON artifact. Inputs map a role to a content digest.
inline json provenance(std::uint64_t seed, const json& inputs = json::object()) {
  return json{{"tool", kToolName}, {"version", kToolVersion}, {"seed", seed}, {"inputs", inputs}};
}

/// Accepts a built-in scenario id (s1, s2) or a path to a scenario JSON file.
inline ScenarioSpec resolve_scenario(const std::string& name_or_path) {
  if (name_or_path == "s1" || name_or_path == "s2") return builtin_scenario(name_or_path);
  return load_scenario_file(name_or_path);
}

// ---- synthetic population ------------------------------------------------------------------

struct Population {
  std::vector<PopulationMember> members;
  std::vector<GazeTrace> traces;
};

/// Participant i uses persona seed and trace seed `seed + i`.
inline Population generate_population(const ScenarioSpec& spec, std::size_t participants, std::uint64_t seed,
                                      const PersonaRanges& ranges = {}) {
  if (participants == 0) throw Error("participant count must be positive");
  Population pop;
  for (std::size_t i = 0; i < participants; ++i) {
    PopulationMember m;
    m.participant_id = static_cast<std::uint32_t>(i);
    m.persona_seed = seed + i;
    m.trace_seed = seed + i;
    m.persona = sample_persona(m.persona_seed, ranges);
    pop.traces.push_back(simulate_trace(spec, m.persona, m.trace_seed, m.participant_id));
    pop.members.push_back(std::move(m));
  }
  return pop;
}

inline std::string trace_file_name(std::uint32_t participant_id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "p%03u.csv", participant_id);
  return buf;
}

/// Writes one trace CSV per participant plus personas.json into `dir`.
inline std::vector<std::filesystem::path> write_population(const Population& pop, const ScenarioSpec& spec,
                                                           std::uint64_t seed, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  for (const auto& t : pop.traces) {
    const auto path = dir / trace_file_name(t.participant_id);
    save_traces_csv({t}, path);
    written.push_back(path);
  }
  json doc{{"scenario", spec.id},
           {"scenario_digest", "fnv1a64:" + fnv1a_hex(to_json(spec).dump())},
           {"participants", population_to_json(pop.members)},
           {"provenance", provenance(seed)}};
  const auto path = dir / "personas.json";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
  written.push_back(path);
  return written;
}

/// Trace CSV files under a directory (sorted by name) or the single file given.
inline std::vector<std::filesystem::path> trace_files(const std::filesystem::path& p) {
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(p)) {
    for (const auto& entry : std::filesystem::directory_iterator(p)) {
      if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  } else if (std::filesystem::exists(p)) {
    files.push_back(p);
  }
  if (files.empty()) throw Error("no trace files found at " + p.string());
  return files;
}

inline std::vector<GazeTrace> load_traces(const std::filesystem::path& p, const std::string& scenario_id) {
  std::vector<GazeTrace> traces;
  for (const auto& f : trace_files(p)) {
    auto part = load_traces_csv(f, scenario_id);
    for (auto& t : part) {
      for (const auto& existing : traces) {
        if (existing.participant_id == t.participant_id) {
          throw Error("participant " + std::to_string(t.participant_id) + " appears more than once");
        }
      }
      traces.push_back(std::move(t));
    }
  }
  return traces;
}

// ---- metrics report ------------------------------------------------------------------------

inline json to_json(const TopK& t) { return json{{"top1", t.top1}, {"top2", t.top2}, {"top3", t.top3}}; }

inline json metrics_report(Arch arch, const std::string& scenario_id, const KfoldResult& r, const json& prov) {
  json folds = json::array();
  for (const auto& f : r.folds) {
    folds.push_back({{"fold", f.fold},
                     {"epochs", f.epochs_run},
                     {"best_epoch", f.best_epoch},
                     {"train", to_json(f.train)},
                     {"test", to_json(f.test)},
                     {"final_loss", f.final_loss},
                     {"train_samples", f.train_samples},
                     {"test_samples", f.test_samples}});
  }
  json summary = json::object();
  for (const auto& [name, s] : r.summary.metrics) summary[name] = {{"mean", s.mean}, {"std", s.std}};
  return json{{"arch", std::string(arch_name(arch))},
              {"scenario", scenario_id},
              {"folds", folds},
              {"summary", summary},
              {"provenance", prov}};
}

}  // namespace gazeseq
