#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "compofed/harness/cli.hpp"
#include "compofed/harness/experiment.hpp"

using namespace compofed;
using namespace compofed::harness;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("compofed_harness_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

ExperimentConfig small_config(const fs::path& out) {
  ExperimentConfig cfg;
  cfg.gen = GenSpec{1.0, 1.0, 3, 40, 6, 4, true};
  cfg.reg.kind = "l1";
  cfg.reg.l1 = 1e-3;
  cfg.hyper = HyperParams{12, 3, 1.0, 1.0, 5, 2};
  cfg.out_dir = out;
  cfg.timing = false;
  return cfg;
}

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult call(std::vector<std::string> args) {
  args.insert(args.begin(), "compofed");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, ParsesSectionsAndLists) {
  const auto cfg = parse_config_text(R"(
# comment
[data]
alpha = 2.5
n = 4
[model]
regularizer = "ball"
radius = 3
[algorithm]
name = ["proposed", "fedda"]
rounds = 7
batch = full
[sweep]
eta = [0.1, 0.2]
seeds = [1, 2, 3]
[output]
timing = false
)");
  EXPECT_DOUBLE_EQ(cfg.gen.alpha, 2.5);
  EXPECT_EQ(cfg.gen.n, 4u);
  EXPECT_EQ(cfg.reg.kind, "ball");
  EXPECT_DOUBLE_EQ(cfg.reg.radius, 3.0);
  ASSERT_EQ(cfg.algorithms.size(), 2u);
  EXPECT_EQ(cfg.algorithms[1], Algorithm::FedDA);
  EXPECT_EQ(cfg.hyper.rounds, 7u);
  EXPECT_FALSE(cfg.hyper.batch.has_value());
  EXPECT_EQ(cfg.sweep_eta.size(), 2u);
  EXPECT_EQ(cfg.seeds.size(), 3u);
  EXPECT_FALSE(cfg.timing);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse_config_text("[algorithm]\nfoo = 1\n"), ConfigError);
  EXPECT_THROW(parse_config_text("[algorithm]\neta = fast\n"), ConfigError);
  EXPECT_THROW(parse_config_text("[algorithm]\nname = sgd\n"), Error);
  ExperimentConfig cfg;
  cfg.data_dir = "/nonexistent/compofed/data";
  try {
    validate(cfg);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/compofed/data"), std::string::npos);
  }
}

TEST(Config, JsonRoundTrip) {
  ExperimentConfig cfg = preset_fig2("tau");
  cfg.seeds = {3, 4};
  const ExperimentConfig back = from_json(to_json(cfg));
  EXPECT_EQ(to_json(back), to_json(cfg));
}

TEST(Presets, MatchExperimentSettings) {
  const auto full = preset_fig1(false);
  EXPECT_EQ(full.gen.n, 30u);
  EXPECT_EQ(full.gen.m, 2000u);
  EXPECT_DOUBLE_EQ(full.gen.alpha, 10.0);
  EXPECT_DOUBLE_EQ(full.gen.beta, 10.0);
  EXPECT_DOUBLE_EQ(full.l2, 0.01);
  EXPECT_DOUBLE_EQ(full.reg.l1, 1e-4);
  EXPECT_EQ(full.hyper.tau, 5u);
  EXPECT_DOUBLE_EQ(full.hyper.eta, 1.0);
  EXPECT_DOUBLE_EQ(full.hyper.eta_g, 1.0);
  EXPECT_FALSE(full.hyper.batch.has_value());
  EXPECT_EQ(full.algorithms.size(), 4u);
  EXPECT_EQ(preset_fig1(true).hyper.batch, std::optional<std::size_t>(20));

  const auto eta = preset_fig2("eta");
  EXPECT_EQ(eta.hyper.tau, 10u);
  EXPECT_EQ(eta.hyper.batch, std::optional<std::size_t>(50));
  EXPECT_EQ(eta.sweep_eta, (std::vector<double>{0.02, 0.2, 1.0}));
  const auto tau = preset_fig2("tau");
  EXPECT_DOUBLE_EQ(tau.hyper.eta, 0.2);
  EXPECT_EQ(tau.sweep_tau, (std::vector<std::size_t>{2, 5, 10}));
  EXPECT_THROW(preset_fig2("batch"), ConfigError);
}

TEST(Sweep, ExpandsGrid) {
  ExperimentConfig cfg = preset_fig2("eta");
  cfg.seeds = {1, 2};
  const auto jobs = expand_sweep(cfg);
  ASSERT_EQ(jobs.size(), 6u);
  EXPECT_DOUBLE_EQ(jobs[2].hyper.eta, 1.0);
  EXPECT_EQ(jobs[3].seed, 2u);
  EXPECT_EQ(jobs[3].hyper.seed, 2u);
}

TEST(Execute, WritesTraceWithOneRowPerRound) {
  const auto dir = scratch_dir("rows");
  auto cfg = small_config(dir);
  cfg.algorithms = {Algorithm::Proposed, Algorithm::FedMid};
  const auto outputs = execute(cfg, 1);
  ASSERT_EQ(outputs.size(), 2u);
  for (const auto& o : outputs) {
    const auto trace = read_trace_csv(o.csv);
    ASSERT_EQ(trace.rows.size(), cfg.hyper.rounds + 1);
    EXPECT_EQ(trace.rows.front().round, 1u);
    EXPECT_EQ(slurp(o.csv).substr(0, std::string(kTraceHeader).size()), kTraceHeader);
    EXPECT_TRUE(fs::exists(sidecar_path(o.csv)));
  }
  const auto proposed = read_trace_csv(outputs[0].csv);
  EXPECT_FALSE(std::isnan(proposed.rows.back().omega));
  const auto fedmid = read_trace_csv(outputs[1].csv);
  EXPECT_TRUE(std::isnan(fedmid.rows.back().omega));
  fs::remove_all(dir);
}

TEST(Execute, OptimalityColumnRecomputes) {
  const auto dir = scratch_dir("recompute");
  const auto cfg = small_config(dir);
  const auto outputs = execute(cfg, 1);
  const auto p = prepare(cfg);
  const auto trace = read_trace_csv(outputs[0].csv);
  for (std::size_t r = 0; r < trace.rows.size(); ++r) {
    const double direct = optimality_of_model(outputs[0].trace.records[r].x_bar_prox, p.reference.x_star);
    EXPECT_LE(std::abs(trace.rows[r].optimality - direct), 1e-12);
  }
  fs::remove_all(dir);
}

TEST(Execute, SidecarReplayIsByteIdentical) {
  const auto dir = scratch_dir("replay");
  const auto cfg = small_config(dir / "a");
  const auto first = execute(cfg, 1);
  const auto replay = call({"run", "--config", sidecar_path(first[0].csv).string(), "--out", (dir / "b").string(),
                            "--no-timing"});
  ASSERT_EQ(replay.code, 0) << replay.err;
  const fs::path second = dir / "b" / first[0].csv.filename();
  EXPECT_EQ(slurp(first[0].csv), slurp(second));
  fs::remove_all(dir);
}

TEST(Execute, ThreadCountDoesNotChangeResults) {
  const auto dir = scratch_dir("threads");
  auto cfg = small_config(dir / "a");
  cfg.algorithms = {Algorithm::Proposed, Algorithm::FastFedDA};
  const auto a = execute(cfg, 1);
  cfg.out_dir = dir / "b";
  const auto b = execute(cfg, 4);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(slurp(a[k].csv), slurp(b[k].csv));
  fs::remove_all(dir);
}

TEST(Cli, DatagenSolveRunAnalyze) {
  const auto dir = scratch_dir("cli");
  const auto data = (dir / "data").string();
  auto r = call({"datagen", "--alpha", "1", "--beta", "1", "--n", "3", "--m", "30", "--d", "5", "--seed", "2",
                 "--out", data});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "data" / "manifest.json"));
  EXPECT_TRUE(fs::exists(dir / "data" / "worker_000.csv"));

  r = call({"solve-ref", "--data", data, "--out", (dir / "ref").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_TRUE(fs::exists(dir / "ref" / "xstar.json"));

  r = call({"run", "--data", data, "--xstar", (dir / "ref" / "xstar.json").string(), "--rounds", "20", "--tau", "2",
            "--grad", "stoch", "--batch", "5", "--out", (dir / "run").string(), "--no-timing"});
  ASSERT_EQ(r.code, 0) << r.err;
  const fs::path csv = dir / "run" / "proposed_seed1.csv";
  ASSERT_TRUE(fs::exists(csv));

  r = call({"analyze", "--trace", csv.string(), "--out", (dir / "report.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = read_json(dir / "report.json");
  EXPECT_EQ(report.at("rounds").get<std::size_t>(), 21u);
  EXPECT_TRUE(report.at("lyapunov").contains("pass_contracting"));
  fs::remove_all(dir);
}

TEST(Cli, XstarForOtherDataIsRejected) {
  const auto dir = scratch_dir("xstar");
  ASSERT_EQ(call({"datagen", "--n", "2", "--m", "20", "--d", "3", "--seed", "1", "--out", (dir / "d1").string()}).code, 0);
  ASSERT_EQ(call({"datagen", "--n", "2", "--m", "20", "--d", "3", "--seed", "2", "--out", (dir / "d2").string()}).code, 0);
  ASSERT_EQ(call({"solve-ref", "--data", (dir / "d1").string(), "--out", dir.string()}).code, 0);
  const auto r = call({"run", "--data", (dir / "d2").string(), "--xstar", (dir / "xstar.json").string(), "--rounds",
                       "2", "--out", dir.string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("different data"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Cli, BinaryReportsMissingDataDirectory) {
  const auto dir = scratch_dir("bin");
  const auto log = dir / "err.txt";
  const int code = shell(std::string(COMPOFED_CLI_PATH) + " run --data /nonexistent/compofed_dir --out " +
                         dir.string() + " 2> " + log.string());
  EXPECT_NE(code, 0);
  EXPECT_NE(slurp(log).find("/nonexistent/compofed_dir"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Cli, BinaryRejectsUnknownFlag) {
  EXPECT_EQ(shell(std::string(COMPOFED_CLI_PATH) + " run --frobnicate 2> /dev/null"), 2);
  EXPECT_EQ(shell(std::string(COMPOFED_CLI_PATH) + " 2> /dev/null > /dev/null"), 2);
}

TEST(Cli, BinaryThreadsEnvironmentIsDeterministic) {
  const auto dir = scratch_dir("env");
  const std::string base = std::string(COMPOFED_CLI_PATH) +
                           " run --algo proposed --rounds 5 --tau 2 --batch 10 --no-timing --seed 3";
  ASSERT_EQ(shell("COMPOFED_THREADS=1 " + base + " --out " + (dir / "a").string() + " > /dev/null"), 0);
  ASSERT_EQ(shell("COMPOFED_THREADS=4 " + base + " --out " + (dir / "b").string() + " > /dev/null"), 0);
  EXPECT_EQ(slurp(dir / "a" / "proposed_seed3.csv"), slurp(dir / "b" / "proposed_seed3.csv"));
  fs::remove_all(dir);
}
