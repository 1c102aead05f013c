#include <filesystem>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "gazeseq/cli.hpp"

using namespace gazeseq;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args, const std::string& input = "") {
  args.insert(args.begin(), "gazeseq");
  std::istringstream in(input);
  std::ostringstream out, err;
  Run r;
  r.code = cli::execute(args, in, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("gazeseq_cli_" + std::string(info->name()) + "_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::set<std::string> listing() const {
    std::set<std::string> names;
    for (const auto& e : fs::recursive_directory_iterator(dir_)) names.insert(fs::relative(e.path(), dir_).string());
    return names;
  }

  // A 12 s scenario keeps pipeline tests fast.
  std::string short_scenario() const {
    auto spec = builtin_s1();
    spec.id = "custom";
    spec.duration_s = 12.0;
    std::vector<TimedEvent> kept;
    for (const auto& e : spec.events) {
      if (e.end_s <= 12.0) kept.push_back(e);
    }
    spec.events = kept;
    const auto p = path("short.scenario.json");
    save_scenario_file(spec, p);
    return p;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, InvalidArchIsUsageError) {
  const auto r = run({"train", "--arch", "warp", "--dataset", "x", "--out", "y"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_TRUE(r.out.empty());
}

TEST_F(CliTest, UnknownSubcommandAndFlagAreUsageErrors) {
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"gen", "--scenario", "s1", "--seed", "1", "--out", path("g"), "--colour", "red"}).code, 2);
  EXPECT_EQ(run({"scenario"}).code, 2);
}

TEST_F(CliTest, EverySubcommandHonorsHelp) {
  const std::vector<std::vector<std::string>> cmds{{"--help"},
                                                   {"scenario", "--help"},
                                                   {"scenario", "validate", "--help"},
                                                   {"scenario", "rasterize", "--help"},
                                                   {"scenario", "export", "--help"},
                                                   {"gen", "--help"},
                                                   {"preprocess", "--help"},
                                                   {"train", "--help"},
                                                   {"kfold", "--help"},
                                                   {"stream", "--help"},
                                                   {"export-plot", "--help"},
                                                   {"bayes", "--help"}};
  for (const auto& c : cmds) {
    const auto r = run(c);
    EXPECT_EQ(r.code, 0) << c.front();
    EXPECT_NE(r.out.find("Usage"), std::string::npos) << c.front();
  }
  EXPECT_TRUE(listing().empty());
}

TEST_F(CliTest, ScenarioValidateAndRasterize) {
  EXPECT_EQ(run({"scenario", "validate", "s1"}).out, "ok\n");
  auto bad = to_json(builtin_s1());
  bad["events"][0]["end_s"] = -1.0;
  {
    std::ofstream f(path("bad.json"));
    f << bad.dump();
  }
  const auto r = run({"scenario", "validate", path("bad.json")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("event 0: negative duration"), std::string::npos);
  EXPECT_EQ(run({"scenario", "validate", path("missing.json")}).code, 1);

  const auto raster = run({"scenario", "rasterize", "s1"});
  EXPECT_EQ(raster.code, 0);
  EXPECT_EQ(std::count(raster.out.begin(), raster.out.end(), '\n'), 2401);
}

TEST_F(CliTest, GenWritesFortyOneTracesAndPersonas) {
  const auto r = run({"gen", "--scenario", "s1", "--participants", "41", "--seed", "1", "--out", path("pop")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::size_t csv = 0;
  for (const auto& e : fs::directory_iterator(path("pop"))) csv += e.path().extension() == ".csv" ? 1 : 0;
  EXPECT_EQ(csv, 41u);
  const auto personas = json::parse(read_file_bytes(path("pop/personas.json")));
  EXPECT_EQ(personas["participants"].size(), 41u);
  EXPECT_EQ(personas["provenance"]["seed"], 1);
  EXPECT_EQ(population_from_json(personas["participants"])[0].persona, sample_persona(1));
}

TEST_F(CliTest, PipelineProducesReportAndIsByteIdentical) {
  const auto scenario = short_scenario();
  auto pipeline = [&](const std::string& tag) {
    EXPECT_EQ(run({"gen", "--scenario", scenario, "--participants", "4", "--seed", "3", "--out", path(tag + "_pop")}).code, 0);
    const auto pre = run({"preprocess", "--traces", path(tag + "_pop"), "--scenario", scenario, "--kfold", "10",
                          "--seed", "3", "--out", path(tag + ".gzds")});
    EXPECT_EQ(pre.code, 0) << pre.err;
    const auto k = run({"kfold", "--arch", "lstm", "--dataset", path(tag + ".gzds"), "--report", path(tag + ".json"),
                        "--epochs", "2", "--patience", "1", "--seed", "5", "--weights-dir", path(tag + "_w")});
    EXPECT_EQ(k.code, 0) << k.err;
  };
  pipeline("a");
  pipeline("b");
  const auto report = json::parse(read_file_bytes(path("a.json")));
  EXPECT_EQ(report["arch"], "lstm");
  EXPECT_EQ(report["folds"].size(), 10u);
  for (const auto& f : report["folds"]) {
    EXPECT_LE(f["test"]["top1"].get<double>(), f["test"]["top2"].get<double>());
    EXPECT_LE(f["test"]["top2"].get<double>(), f["test"]["top3"].get<double>());
  }
  EXPECT_TRUE(report["summary"].contains("test.top1"));
  EXPECT_TRUE(report["provenance"]["inputs"].contains("dataset"));
  EXPECT_EQ(read_file_bytes(path("a.json")), read_file_bytes(path("b.json")));
  EXPECT_EQ(read_file_bytes(path("a.gzds")), read_file_bytes(path("b.gzds")));
  for (int i = 0; i < 10; ++i) {
    const std::string w = "_w/fold" + std::to_string(i) + ".gzwt";
    EXPECT_EQ(read_file_bytes(path("a" + w)), read_file_bytes(path("b" + w)));
  }
}

TEST_F(CliTest, TrainThenStreamAndExportPlot) {
  const auto scenario = short_scenario();
  ASSERT_EQ(run({"gen", "--scenario", scenario, "--participants", "3", "--seed", "0", "--out", path("pop")}).code, 0);
  ASSERT_EQ(run({"preprocess", "--traces", path("pop"), "--scenario", scenario, "--out", path("d.gzds"),
                 "--csv", path("d.csv")})
                .code,
            0);
  const auto t = run({"train", "--arch", "transformer", "--dataset", path("d.gzds"), "--epochs", "2", "--patience", "1",
                      "--out", path("m.gzwt")});
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_EQ(load_weights(path("m.gzwt")).arch(), Arch::transformer);

  const auto s = run({"stream", "--weights", path("m.gzwt"), "--scenario-meta", scenario, "--policy", "top3-hysteresis"},
                     "EVT 0 - door 200 on\nTICK 0\nbogus\nEVT 0.5 - door 200 off\nTICK 0.1\nTICK 0.6\n");
  ASSERT_EQ(s.code, 0) << s.err;
  std::istringstream lines(s.out);
  std::vector<std::string> got;
  for (std::string l; std::getline(lines, l);) got.push_back(l);
  ASSERT_EQ(got.size(), 4u);
  EXPECT_EQ(got[0].rfind("GAZE 0 ", 0), 0u);
  EXPECT_EQ(got[1].rfind("ERR ", 0), 0u);
  EXPECT_EQ(got[2].rfind("ERR ", 0), 0u);  // tick behind the last event
  EXPECT_EQ(got[3].rfind("GAZE 0.6 ", 0), 0u);
  {
    std::ofstream f(path("cmds.txt"));
    f << s.out;
  }
  ASSERT_EQ(run({"export-plot", "--commands", path("cmds.txt"), "--out", path("cmds.csv")}).code, 0);
  const auto csv = read_file_bytes(path("cmds.csv"));
  EXPECT_EQ(csv.rfind("t_s,class,yaw_deg,p0,", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);

  ASSERT_EQ(run({"export-plot", "--traces", path("pop"), "--scenario", "custom", "--out", path("band.csv")}).code, 0);
  const auto band = read_file_bytes(path("band.csv"));
  EXPECT_EQ(band.rfind("frame,t_s,mean_deg,std_deg\n", 0), 0u);
  EXPECT_EQ(std::count(band.begin(), band.end(), '\n'), 121);

  const auto b = run({"bayes", "--traces", path("pop"), "--scenario", scenario});
  ASSERT_EQ(b.code, 0) << b.err;
  const auto bj = json::parse(b.out);
  EXPECT_LE(bj["top1"].get<double>(), bj["top3"].get<double>());

  const std::set<std::string> expected{"short.scenario.json", "pop", "pop/personas.json", "pop/p000.csv", "pop/p001.csv",
                                       "pop/p002.csv", "d.gzds", "d.csv", "m.gzwt", "cmds.txt", "cmds.csv", "band.csv"};
  EXPECT_EQ(listing(), expected);
}

TEST_F(CliTest, RuntimeFailuresExitOne) {
  EXPECT_EQ(run({"kfold", "--arch", "lstm", "--dataset", path("none.gzds"), "--report", path("r.json")}).code, 1);
  EXPECT_EQ(run({"stream", "--weights", path("none.gzwt"), "--scenario-meta", "s1"}).code, 1);
  EXPECT_EQ(run({"train", "--arch", "lstm", "--dataset", path("none.gzds"), "--out", path("w"), "--patience", "200"}).code,
            1);
  EXPECT_FALSE(fs::exists(path("r.json")));
}
