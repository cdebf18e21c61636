#pragma once

#include <cstdio>
#include <filesystem>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "compofed/algorithm.hpp"
#include "compofed/analysis.hpp"
#include "compofed/baselines.hpp"
#include "compofed/dataset_io.hpp"
#include "compofed/harness/config.hpp"
#include "compofed/harness/trace_io.hpp"
#include "compofed/parallel.hpp"

namespace compofed::harness {

/// Loads the dataset directory or generates data from the config.
inline Problem build_problem(const ExperimentConfig& cfg) {
  Problem problem;
  problem.smooth.l2_weight = cfg.l2;
  problem.workers = cfg.data_dir ? load_dataset_dir(*cfg.data_dir) : generate(cfg.gen);
  validate(problem);
  return problem;
}

inline nlohmann::json to_json(const ReferenceSolution& ref, const std::string& data_sha) {
  return {{"x_star", std::vector<double>(ref.x_star.data(), ref.x_star.data() + ref.x_star.size())},
          {"fixed_point_residual", ref.fixed_point_residual},
          {"iterations", ref.iterations},
          {"data_sha256", data_sha}};
}

inline ReferenceSolution load_reference(const fs::path& path, const std::string& expected_sha) {
  const auto j = read_json(path);
  ReferenceSolution ref;
  try {
    const auto values = j.at("x_star").get<std::vector<double>>();
    ref.x_star = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
    ref.fixed_point_residual = j.at("fixed_point_residual").get<double>();
    ref.iterations = j.at("iterations").get<std::size_t>();
    if (j.at("data_sha256").get<std::string>() != expected_sha) {
      throw Error("reference solution " + path.string() + " was computed for different data");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed reference solution " + path.string() + ": " + e.what());
  }
  return ref;
}

/// Everything derived from (config data, regularizer) that all runs share.
struct PreparedProblem {
  Problem problem;
  Regularizer g;
  ReferenceSolution reference;
  Constants constants;
  std::string data_sha;
};

inline PreparedProblem prepare(const ExperimentConfig& cfg) {
  PreparedProblem p;
  p.problem = build_problem(cfg);
  p.g = build_regularizer(cfg.reg, p.problem.dim());
  p.data_sha = data_checksum(p.problem.workers);
  p.constants = constants(p.problem);
  if (cfg.xstar_file) {
    p.reference = load_reference(*cfg.xstar_file, p.data_sha);
    require_dim(p.reference.x_star.size(), p.problem.dim(), "reference solution");
  } else {
    p.reference = solve_reference(p.problem, p.g);
  }
  return p;
}

inline RoundTrace run_algorithm(Algorithm algo, const Problem& problem, const HyperParams& hyper,
                                const Regularizer& g, const RunOptions& options) {
  switch (algo) {
    case Algorithm::Proposed: return run(problem, hyper, g, options);
    case Algorithm::FedMid: return run_fedmid(problem, hyper, g, options);
    case Algorithm::FedDA: return run_fedda(problem, hyper, g, options);
    case Algorithm::FastFedDA: return run_fastfedda(problem, hyper, g, options);
  }
  throw Error("unknown algorithm");
}

/// Per-round metrics. The Lyapunov columns are filled only for traces that
/// carry gradient sums (the proposed method) and when requested.
inline std::vector<MetricRow> compute_metrics(const RoundTrace& trace, const Problem& problem,
                                              const HyperParams& hyper, const Vector& x_star, bool with_lyapunov,
                                              bool timing) {
  std::vector<MetricRow> rows;
  rows.reserve(trace.records.size());
  const bool lyap = with_lyapunov && !trace.records.empty() && trace.records.front().grad_sums.size() == problem.n();
  for (const auto& rec : trace.records) {
    MetricRow row;
    row.round = rec.round;
    row.optimality = optimality_of_model(rec.x_bar_prox, x_star);
    row.dist_sq = (rec.x_bar_prox - x_star).squaredNorm();
    if (lyap) {
      const auto l = lyapunov(rec, problem, hyper, x_star);
      row.drift_sq = l.drift_sq;
      row.omega = l.omega;
    }
    row.wall_ms = timing ? rec.wall_ms : 0.0;
    rows.push_back(row);
  }
  return rows;
}

struct RunOutput {
  Algorithm algorithm = Algorithm::Proposed;
  HyperParams hyper;
  RoundTrace trace;
  std::vector<MetricRow> rows;
  fs::path csv;
};

inline std::string format_number(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

inline std::string job_tag(const HyperParams& hyper) {
  return "eta" + format_number(hyper.eta) + "_tau" + std::to_string(hyper.tau) + "_b" +
         (hyper.batch ? std::to_string(*hyper.batch) : std::string("full"));
}

inline fs::path trace_path(const ExperimentConfig& cfg, Algorithm algo, std::uint64_t seed) {
  std::string name = to_string(algo);
  if (!cfg.tag.empty()) name += "_" + cfg.tag;
  name += "_seed" + std::to_string(seed) + ".csv";
  return cfg.out_dir / name;
}

/// Inputs of the contraction report that depend on the run, stored in the
/// sidecar so that `analyze` needs only the trace files.
inline nlohmann::json analysis_inputs(const PreparedProblem& p, const HyperParams& hyper) {
  const Vector& x_star = p.reference.x_star;
  const std::size_t m_min = [&] {
    std::size_t m = static_cast<std::size_t>(p.problem.workers.front().samples());
    for (const auto& ds : p.problem.workers) m = std::min(m, static_cast<std::size_t>(ds.samples()));
    return m;
  }();
  const std::size_t b = hyper.batch.value_or(m_min);
  const bool stochastic = hyper.batch && *hyper.batch < m_min;
  const double sigma_sq = stochastic ? estimate_gradient_variance(x_star, p.problem, b, 1000, hyper.seed) : 0.0;
  const double bg = subgradient_bound(p.g, p.problem.dim());
  return {{"mu", p.constants.mu},
          {"L", p.constants.L},
          {"eta", hyper.eta},
          {"eta_g", hyper.eta_g},
          {"tau", hyper.tau},
          {"n", p.problem.n()},
          {"batch", b},
          {"sigma_sq", sigma_sq},
          {"subgradient_bound", std::isinf(bg) ? nlohmann::json("inf") : nlohmann::json(bg)},
          {"indicator", is_indicator(p.g)},
          {"grad_norm_at_opt", full_gradient(x_star, p.problem).norm()}};
}

/// Runs one algorithm on a prepared problem and writes its CSV and sidecar.
inline RunOutput run_single(const ExperimentConfig& cfg, Algorithm algo, const PreparedProblem& p,
                            std::size_t threads, bool write = true) {
  RunOutput out;
  out.algorithm = algo;
  out.hyper = cfg.hyper;
  RunOptions options;
  options.threads = threads;
  options.keep_grad_sums = cfg.lyapunov && algo == Algorithm::Proposed;
  out.trace = run_algorithm(algo, p.problem, cfg.hyper, p.g, options);
  out.rows = compute_metrics(out.trace, p.problem, cfg.hyper, p.reference.x_star, cfg.lyapunov, cfg.timing);
  if (write) {
    out.csv = trace_path(cfg, algo, cfg.hyper.seed);
    write_trace_csv(out.csv, to_string(algo), cfg.hyper.seed, out.rows);
    ExperimentConfig resolved = cfg;
    resolved.algorithms = {algo};
    resolved.seeds.clear();
    resolved.sweep_eta.clear();
    resolved.sweep_tau.clear();
    resolved.sweep_batch.clear();
    nlohmann::json side;
    side["config"] = to_json(resolved);
    side["algorithm"] = to_string(algo);
    side["seed"] = cfg.hyper.seed;
    side["rows"] = out.rows.size();
    side["data_sha256"] = p.data_sha;
    side["reference"] = {{"norm", p.reference.x_star.norm()},
                         {"fixed_point_residual", p.reference.fixed_point_residual},
                         {"iterations", p.reference.iterations}};
    side["analysis_inputs"] = analysis_inputs(p, cfg.hyper);
    write_json(sidecar_path(out.csv), side);
  }
  return out;
}

/// All algorithms of the config on one dataset (config seeds are ignored).
inline std::vector<RunOutput> execute(const ExperimentConfig& cfg, std::size_t threads, bool write = true) {
  validate(cfg);
  const PreparedProblem p = prepare(cfg);
  std::vector<RunOutput> outputs;
  for (const Algorithm algo : cfg.algorithms) outputs.push_back(run_single(cfg, algo, p, threads, write));
  return outputs;
}

/// One grid point of a sweep.
struct SweepJob {
  std::uint64_t seed = 0;
  HyperParams hyper;
  Algorithm algorithm = Algorithm::Proposed;
};

/// Expands sweep lists; an empty list contributes the single base value.
/// With generated data the seed drives both the data and the batch draws.
inline std::vector<SweepJob> expand_sweep(const ExperimentConfig& cfg) {
  const std::vector<double> etas = cfg.sweep_eta.empty() ? std::vector<double>{cfg.hyper.eta} : cfg.sweep_eta;
  const std::vector<std::size_t> taus = cfg.sweep_tau.empty() ? std::vector<std::size_t>{cfg.hyper.tau} : cfg.sweep_tau;
  std::vector<std::size_t> batches = cfg.sweep_batch;
  if (batches.empty()) batches.push_back(cfg.hyper.batch.value_or(0));
  const std::vector<std::uint64_t> seeds = cfg.seeds.empty() ? std::vector<std::uint64_t>{cfg.hyper.seed} : cfg.seeds;
  std::vector<SweepJob> jobs;
  for (auto seed : seeds)
    for (auto algo : cfg.algorithms)
      for (double eta : etas)
        for (auto tau : taus)
          for (auto b : batches) {
            SweepJob job;
            job.seed = seed;
            job.algorithm = algo;
            job.hyper = cfg.hyper;
            job.hyper.eta = eta;
            job.hyper.tau = tau;
            job.hyper.batch = b == 0 ? std::nullopt : std::optional<std::size_t>(b);
            job.hyper.seed = seed;
            jobs.push_back(job);
          }
  return jobs;
}

struct SweepResult {
  SweepJob job;
  RunOutput output;
};

/// Runs every grid point. Problems are prepared once per seed; jobs run in
/// parallel (each job single-threaded) and write job-exclusive files.
inline std::vector<SweepResult> run_sweep(const ExperimentConfig& cfg, std::size_t threads, bool write = true) {
  validate(cfg);
  const auto jobs = expand_sweep(cfg);
  std::map<std::uint64_t, PreparedProblem> prepared;
  for (const auto& job : jobs) {
    if (prepared.count(job.seed)) continue;
    ExperimentConfig per_seed = cfg;
    per_seed.gen.seed = job.seed;
    prepared.emplace(job.seed, prepare(per_seed));
  }
  std::vector<SweepResult> results(jobs.size());
  parallel_for(jobs.size(), threads, [&](std::size_t k) {
    ExperimentConfig job_cfg = cfg;
    job_cfg.gen.seed = jobs[k].seed;
    job_cfg.hyper = jobs[k].hyper;
    job_cfg.tag = (cfg.tag.empty() ? "" : cfg.tag + "_") + job_tag(jobs[k].hyper);
    results[k].job = jobs[k];
    results[k].output = run_single(job_cfg, jobs[k].algorithm, prepared.at(jobs[k].seed), 1, write);
  });
  return results;
}

// -- presets ----------------------------------------------------------------

/// Comparison against the baselines: (alpha, beta) = (10, 10), n = 30,
/// m = 2000, l2 = 0.01, l1 = 1e-4, tau = 5, eta = eta_g = 1; full gradients
/// or minibatches of 20.
inline ExperimentConfig preset_fig1(bool stochastic) {
  ExperimentConfig cfg;
  cfg.gen = default_gen_spec();
  cfg.l2 = 0.01;
  cfg.reg = RegularizerSpec{};
  cfg.reg.kind = "l1";
  cfg.reg.l1 = 1e-4;
  cfg.algorithms = {Algorithm::Proposed, Algorithm::FedMid, Algorithm::FedDA, Algorithm::FastFedDA};
  cfg.hyper = HyperParams{500, 5, 1.0, 1.0, stochastic ? std::optional<std::size_t>(20) : std::nullopt, 1};
  cfg.tag = stochastic ? "fig1_stoch" : "fig1_full";
  return cfg;
}

/// Step-size and local-step studies of the proposed method with b = 50,
/// eta_g = 1: eta in {0.02, 0.2, 1} at tau = 10, or tau in {2, 5, 10} at
/// eta = 0.2.
inline ExperimentConfig preset_fig2(const std::string& sweep) {
  ExperimentConfig cfg = preset_fig1(false);
  cfg.algorithms = {Algorithm::Proposed};
  cfg.hyper.batch = 50;
  cfg.hyper.eta_g = 1.0;
  if (sweep == "eta") {
    cfg.hyper.tau = 10;
    cfg.sweep_eta = {0.02, 0.2, 1.0};
    cfg.tag = "fig2_eta";
  } else if (sweep == "tau") {
    cfg.hyper.eta = 0.2;
    cfg.sweep_tau = {2, 5, 10};
    cfg.tag = "fig2_tau";
  } else {
    throw ConfigError("unknown fig2 sweep '" + sweep + "' (expected eta|tau)");
  }
  return cfg;
}

}  // namespace compofed::harness
