#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gazeseq/pipeline.hpp"
#include "gazeseq/runtime.hpp"

namespace gazeseq::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path() && !std::filesystem::exists(path.parent_path())) {
    throw Error("output directory does not exist: " + path.parent_path().string());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

inline void write_json_file(const json& doc, const std::filesystem::path& path) {
  auto out = open_output(path);
  out << doc.dump(2) << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

inline void write_rasterized(std::ostream& out, const ScenarioSpec& spec) {
  const auto m = rasterize(spec);
  out << "frame";
  for (const auto& label : feature_layout(spec)) out << ',' << label;
  out << '\n';
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < kMatrixCols; ++c) out << (c ? "," : "") << m.at(r, c);
    out << '\n';
  }
}

struct TrainOptions {
  std::string arch;
  std::string dataset;
  std::uint64_t seed = 0;
  double lr = 0.001;
  std::size_t max_epochs = 100;
  std::size_t patience = 10;
  std::size_t batch_size = 64;
  double val_fraction = 0.1;

  void add_to(CLI::App* app) {
    app->add_option("--arch", arch, "Network architecture")->required()->check(CLI::IsMember({"lstm", "transformer"}));
    app->add_option("--dataset", dataset, "GZDS dataset file")->required();
    app->add_option("--seed", seed, "Seed for initialization, shuffling and dropout")->capture_default_str();
    app->add_option("--lr", lr, "Adam learning rate")->capture_default_str();
    app->add_option("--epochs", max_epochs, "Maximum epochs")->capture_default_str();
    app->add_option("--patience", patience, "Early-stopping patience in epochs")->capture_default_str();
    app->add_option("--batch-size", batch_size, "Mini-batch size")->capture_default_str();
    app->add_option("--val-fraction", val_fraction, "Validation fraction carved from training data")
        ->capture_default_str();
  }

  TrainConfig config() const {
    TrainConfig c;
    c.arch = parse_arch(arch);
    c.lr = lr;
    c.max_epochs = max_epochs;
    c.patience = patience;
    c.batch_size = batch_size;
    c.seed = seed;
    c.val_fraction = val_fraction;
    c.validate();
    return c;
  }
};

}  // namespace detail

/// Runs the command line `args` (args[0] is the program name). Never throws.
inline int execute(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gaze-direction prediction from scene-event sequences", "gazeseq"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  // scenario
  auto* scenario = app.add_subcommand("scenario", "Validate, rasterize or export scenario files");
  scenario->require_subcommand(1);
  std::string scenario_arg;
  std::string raster_out, export_out;
  auto* sc_validate = scenario->add_subcommand("validate", "Report every violated scenario invariant");
  sc_validate->add_option("scenario", scenario_arg, "Scenario file or built-in id (s1, s2)")->required();
  auto* sc_raster = scenario->add_subcommand("rasterize", "Write the frame x 25 scene-properties matrix as CSV");
  sc_raster->add_option("scenario", scenario_arg, "Scenario file or built-in id (s1, s2)")->required();
  sc_raster->add_option("--out", raster_out, "Output CSV (default: standard output)");
  auto* sc_export = scenario->add_subcommand("export", "Write a scenario as JSON");
  sc_export->add_option("scenario", scenario_arg, "Scenario file or built-in id (s1, s2)")->required();
  sc_export->add_option("--out", export_out, "Output JSON file")->required();

  // gen
  auto* gen = app.add_subcommand("gen", "Simulate a synthetic participant population");
  std::string gen_scenario, gen_out;
  std::size_t gen_participants = 41;
  std::uint64_t gen_seed = 0;
  gen->add_option("--scenario", gen_scenario, "Scenario file or built-in id")->required();
  gen->add_option("--participants", gen_participants, "Number of participants")->capture_default_str();
  gen->add_option("--seed", gen_seed, "Base seed; participant i uses seed + i")->required();
  gen->add_option("--out", gen_out, "Output directory for trace CSVs and personas.json")->required();

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "Label, window, balance and fold-split traces into a GZDS dataset");
  std::string pre_traces, pre_scenario, pre_out, pre_csv;
  bool pre_balance = false, pre_group = false;
  std::size_t pre_kfold = 10;
  std::uint64_t pre_seed = 0;
  pre->add_option("--traces", pre_traces, "Trace CSV file or directory of trace CSVs")->required();
  pre->add_option("--scenario", pre_scenario, "Scenario file or built-in id")->required();
  pre->add_flag("--balance", pre_balance, "Oversample minority classes to the majority count");
  pre->add_option("--kfold", pre_kfold, "Number of folds to assign")->capture_default_str();
  pre->add_flag("--group-by-participant", pre_group, "Assign folds per participant instead of per sample");
  pre->add_option("--seed", pre_seed, "Seed for augmentation and fold assignment")->capture_default_str();
  pre->add_option("--out", pre_out, "Output GZDS dataset")->required();
  pre->add_option("--csv", pre_csv, "Also export the dataset as CSV");

  // train
  auto* train = app.add_subcommand("train", "Train one model on a dataset");
  detail::TrainOptions train_opts;
  std::string train_out;
  train_opts.add_to(train);
  train->add_option("--out", train_out, "Output GZWT weights file")->required();

  // kfold
  auto* kfold = app.add_subcommand("kfold", "K-fold cross-validation with a JSON metrics report");
  detail::TrainOptions kfold_opts;
  std::string kfold_report, kfold_weights, kfold_scenario = "unspecified";
  std::size_t kfold_k = 10;
  kfold_opts.add_to(kfold);
  kfold->add_option("--report", kfold_report, "Output metrics JSON")->required();
  kfold->add_option("--folds", kfold_k, "Number of folds in the dataset")->capture_default_str();
  kfold->add_option("--weights-dir", kfold_weights, "Directory for per-fold GZWT weights");
  kfold->add_option("--scenario", kfold_scenario, "Scenario id recorded in the report")->capture_default_str();

  // stream
  auto* stream = app.add_subcommand("stream", "Run the line protocol on standard input/output");
  std::string stream_weights, stream_meta, stream_policy = "argmax";
  bool stream_latency = false;
  stream->add_option("--weights", stream_weights, "GZWT weights file")->required();
  stream->add_option("--scenario-meta", stream_meta, "Scenario file or built-in id giving the feature layout")
      ->required();
  stream->add_option("--policy", stream_policy, "Gaze policy")
      ->check(CLI::IsMember({"argmax", "top3-hysteresis"}))
      ->capture_default_str();
  stream->add_flag("--latency", stream_latency, "Report tick latency on the error stream at exit");

  // export-plot
  auto* plot = app.add_subcommand("export-plot", "Write plot-ready CSV from traces or a command log");
  std::string plot_traces, plot_commands, plot_scenario = "s1", plot_out;
  auto* plot_traces_opt = plot->add_option("--traces", plot_traces, "Trace CSV file or directory: per-frame mean/std");
  auto* plot_cmd_opt = plot->add_option("--commands", plot_commands, "File of GAZE lines: per-tick CSV");
  plot_traces_opt->excludes(plot_cmd_opt);
  plot->add_option("--scenario", plot_scenario, "Scenario id recorded for traces")->capture_default_str();
  plot->add_option("--out", plot_out, "Output CSV")->required();

  // bayes
  auto* bayes = app.add_subcommand("bayes", "Achievable top-1/top-3 accuracy of a trace population");
  std::string bayes_traces, bayes_scenario;
  std::size_t bayes_first = kSeqLen - 1;
  bayes->add_option("--traces", bayes_traces, "Trace CSV file or directory")->required();
  bayes->add_option("--scenario", bayes_scenario, "Scenario file or built-in id")->required();
  bayes->add_option("--first-frame", bayes_first, "First frame counted")->capture_default_str();

  // CLI11 consumes arguments from the back.
  std::vector<std::string> rev;
  for (std::size_t i = args.size(); i > 1; --i) rev.push_back(args[i - 1]);
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    const CLI::App* target = &app;
    for (const CLI::App* sub = &app; !sub->get_subcommands().empty();) {
      sub = sub->get_subcommands().front();
      target = sub;
    }
    out << target->help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    const CLI::App* target = &app;
    for (const CLI::App* sub = &app; !sub->get_subcommands().empty();) {
      sub = sub->get_subcommands().front();
      target = sub;
    }
    err << "error: " << e.what() << "\n\n" << target->help();
    return kExitUsage;
  }

  try {
    if (*sc_validate) {
      const auto spec = resolve_scenario(scenario_arg);
      const auto report = validate_scenario(spec);
      if (report.ok()) {
        out << "ok\n";
        return kExitOk;
      }
      for (const auto& v : report.violations) out << v << '\n';
      return kExitFailure;
    }
    if (*sc_raster) {
      const auto spec = resolve_scenario(scenario_arg);
      if (raster_out.empty()) {
        detail::write_rasterized(out, spec);
      } else {
        auto f = detail::open_output(raster_out);
        detail::write_rasterized(f, spec);
      }
      return kExitOk;
    }
    if (*sc_export) {
      const auto spec = resolve_scenario(scenario_arg);
      require_valid(spec);
      detail::write_json_file(to_json(spec), export_out);
      return kExitOk;
    }
    if (*gen) {
      const auto spec = resolve_scenario(gen_scenario);
      const auto pop = generate_population(spec, gen_participants, gen_seed);
      const auto files = write_population(pop, spec, gen_seed, gen_out);
      out << "wrote " << pop.traces.size() << " traces and personas.json to " << gen_out << '\n';
      return kExitOk;
    }
    if (*pre) {
      const auto spec = resolve_scenario(pre_scenario);
      const auto traces = load_traces(pre_traces, spec.id);
      auto ds = build_dataset(spec, traces, default_bins(spec));
      if (pre_balance) ds = augment_balance(ds, pre_seed);
      ds = kfold_split(ds, pre_kfold, pre_seed, pre_group);
      save_dataset(ds, pre_out);
      if (!pre_csv.empty()) {
        auto f = detail::open_output(pre_csv);
        write_dataset_csv(f, ds);
      }
      out << "samples " << ds.samples.size() << " classes";
      for (auto h : ds.class_histogram()) out << ' ' << h;
      out << '\n';
      return kExitOk;
    }
    if (*train) {
      const auto cfg = train_opts.config();
      const auto ds = load_dataset(train_opts.dataset);
      std::vector<const SequenceSample*> ptrs;
      for (const auto& s : ds.samples) ptrs.push_back(&s);
      auto result = train_model(ptrs, ds.n_classes, cfg, [&](const EpochLog& e) {
        err << "epoch " << e.epoch << " loss " << e.train_loss << " val_top1 " << e.val_top1 << '\n';
      });
      save_weights(result.model, train_out);
      out << "epochs " << result.log.epochs_run() << " best_epoch " << result.log.best_epoch << " val_top1 "
          << result.log.best_val_top1 << '\n';
      return kExitOk;
    }
    if (*kfold) {
      const auto cfg = kfold_opts.config();
      const auto ds = load_dataset(kfold_opts.dataset);
      const bool keep = !kfold_weights.empty();
      auto result = run_kfold(ds, cfg, kfold_k, keep, [&](const FoldReport& f) {
        err << "fold " << f.fold << " epochs " << f.epochs_run << " test top1 " << f.test.top1 << " top3 "
            << f.test.top3 << '\n';
      });
      const json prov = provenance(cfg.seed, {{"dataset", file_digest(kfold_opts.dataset)}});
      detail::write_json_file(metrics_report(cfg.arch, kfold_scenario, result, prov), kfold_report);
      if (keep) {
        std::filesystem::create_directories(kfold_weights);
        for (std::size_t i = 0; i < result.models.size(); ++i) {
          save_weights(result.models[i], std::filesystem::path(kfold_weights) / ("fold" + std::to_string(i) + ".gzwt"));
        }
      }
      const auto& m = result.summary.metrics;
      out << "test top1 " << m.at("test.top1").mean << " top2 " << m.at("test.top2").mean << " top3 "
          << m.at("test.top3").mean << '\n';
      return kExitOk;
    }
    if (*stream) {
      Session session(resolve_scenario(stream_meta), parse_policy(stream_policy));
      session.load_model(load_weights(stream_weights));
      run_stream(session, in, out);
      if (stream_latency) {
        const auto lat = session.latency();
        err << "ticks " << lat.ticks << " mean_ms " << lat.mean_ms << " max_ms " << lat.max_ms << '\n';
      }
      return kExitOk;
    }
    if (*plot) {
      if (plot_traces.empty() == plot_commands.empty()) throw Error("give exactly one of --traces or --commands");
      auto f = detail::open_output(plot_out);
      if (!plot_traces.empty()) {
        const auto stats = population_stats(load_traces(plot_traces, plot_scenario));
        f << "frame,t_s,mean_deg,std_deg\n";
        for (std::size_t i = 0; i < stats.mean.size(); ++i) {
          f << i << ',' << format_double(frame_time(i)) << ',' << format_double(stats.mean[i]) << ','
            << format_double(stats.std[i]) << '\n';
        }
      } else {
        std::ifstream cmds(plot_commands);
        if (!cmds) throw Error("cannot open " + plot_commands);
        std::size_t n_probs = 0, line_no = 0;
        std::vector<std::string> rows;
        for (std::string line; std::getline(cmds, line);) {
          ++line_no;
          std::istringstream is(line);
          std::vector<std::string> tok;
          for (std::string t; is >> t;) tok.push_back(t);
          if (tok.empty() || tok[0] != "GAZE") continue;
          if (tok.size() < 6) throw Error("line " + std::to_string(line_no) + ": malformed GAZE line");
          const std::size_t k = tok.size() - 5;
          if (n_probs != 0 && k != n_probs) throw Error("line " + std::to_string(line_no) + ": class count changed");
          n_probs = k;
          std::string row = tok[1] + ',' + tok[2] + ',' + tok[3];
          for (std::size_t i = 0; i < k; ++i) row += ',' + tok[4 + i];
          rows.push_back(row + ',' + tok.back());
        }
        if (rows.empty()) throw Error("no GAZE lines in " + plot_commands);
        f << "t_s,class,yaw_deg";
        for (std::size_t i = 0; i < n_probs; ++i) f << ",p" << i;
        f << ",switched\n";
        for (const auto& r : rows) f << r << '\n';
      }
      return kExitOk;
    }
    if (*bayes) {
      const auto spec = resolve_scenario(bayes_scenario);
      const auto ref = bayes_reference_from_traces(load_traces(bayes_traces, spec.id), default_bins(spec), bayes_first);
      out << json{{"scenario", spec.id}, {"top1", ref.top1}, {"top3", ref.top3}}.dump() << '\n';
      return kExitOk;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace gazeseq::cli
