#pragma once

// Command-line front end: datagen, run, sweep, solve-ref, analyze, preset.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "compofed/harness/experiment.hpp"

namespace compofed::harness {

namespace detail {

/// Flags shared by run, sweep, solve-ref and preset.
struct CommonFlags {
  std::string config;
  std::string data;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string grad;
  std::optional<std::size_t> batch;
  std::string algo;
  std::optional<std::size_t> rounds;
  std::optional<std::size_t> tau;
  std::optional<double> eta;
  std::optional<double> eta_g;
  std::string xstar;
  bool no_lyapunov = false;
  bool no_timing = false;

  void attach(CLI::App& app, bool with_algorithm = true) {
    app.add_option("--config", config, "Configuration file (key = value text, or a trace sidecar .json)");
    app.add_option("--data", data, "Dataset directory written by `datagen`");
    app.add_option("--seed", seed, "Seed for data generation and minibatch sampling");
    app.add_option("--out", out, "Output directory");
    if (!with_algorithm) return;
    app.add_option("--grad", grad, "Gradient mode")->check(CLI::IsMember({"full", "stoch"}));
    app.add_option("--batch", batch, "Minibatch size (implies --grad stoch)")->check(CLI::PositiveNumber);
    app.add_option("--algo", algo, "Algorithm")->check(CLI::IsMember({"proposed", "fedmid", "fedda", "fastfedda"}));
    app.add_option("--rounds", rounds, "Communication rounds R")->check(CLI::PositiveNumber);
    app.add_option("--tau", tau, "Local steps per round")->check(CLI::PositiveNumber);
    app.add_option("--eta", eta, "Local step size")->check(CLI::PositiveNumber);
    app.add_option("--eta-g", eta_g, "Global step size")->check(CLI::PositiveNumber);
    app.add_option("--xstar", xstar, "Reference solution written by `solve-ref`");
    app.add_flag("--no-lyapunov", no_lyapunov, "Skip the Lyapunov columns");
    app.add_flag("--no-timing", no_timing, "Write wall_ms as 0 (byte-reproducible traces)");
  }

  ExperimentConfig resolve(ExperimentConfig cfg) const {
    if (!config.empty()) cfg = load_config(config);
    if (!data.empty()) cfg.data_dir = fs::path(data);
    if (seed) {
      cfg.gen.seed = *seed;
      cfg.hyper.seed = *seed;
    }
    if (!out.empty()) cfg.out_dir = out;
    if (grad == "full") cfg.hyper.batch = std::nullopt;
    if (grad == "stoch" && !batch && !cfg.hyper.batch) cfg.hyper.batch = 20;
    if (batch) cfg.hyper.batch = *batch;
    if (!algo.empty()) cfg.algorithms = {parse_algorithm(algo)};
    if (rounds) cfg.hyper.rounds = *rounds;
    if (tau) cfg.hyper.tau = *tau;
    if (eta) cfg.hyper.eta = *eta;
    if (eta_g) cfg.hyper.eta_g = *eta_g;
    if (!xstar.empty()) cfg.xstar_file = fs::path(xstar);
    if (no_lyapunov) cfg.lyapunov = false;
    if (no_timing) cfg.timing = false;
    return cfg;
  }
};

inline void print_summary(std::ostream& out, const RunOutput& r) {
  out << to_string(r.algorithm) << " seed=" << r.hyper.seed << " eta=" << r.hyper.eta << " tau=" << r.hyper.tau
      << " batch=" << (r.hyper.batch ? std::to_string(*r.hyper.batch) : std::string("full"))
      << " rounds=" << r.hyper.rounds << " final_optimality=" << format_metric(r.rows.back().optimality);
  if (!r.csv.empty()) out << " -> " << r.csv.string();
  out << '\n';
}

inline nlohmann::json analyze_trace(const fs::path& csv) {
  const TraceFile trace = read_trace_csv(csv);
  const auto side = read_json(sidecar_path(csv));
  const auto& in = side.at("analysis_inputs");
  std::vector<double> omega;
  std::vector<double> optimality;
  for (const auto& row : trace.rows) {
    optimality.push_back(row.optimality);
    if (!std::isnan(row.omega)) omega.push_back(row.omega);
  }
  nlohmann::json report;
  report["trace"] = csv.string();
  report["algorithm"] = trace.algorithm;
  report["seed"] = trace.seed;
  report["rounds"] = trace.rows.size();
  report["final_optimality"] = optimality.empty() ? 0.0 : optimality.back();
  report["optimality_floor"] = optimality.empty() ? 0.0 : trailing_floor(optimality);
  if (omega.size() != trace.rows.size() || omega.size() < 2) {
    report["lyapunov"] = nullptr;
    return report;
  }
  ContractionInputs ci;
  ci.mu = in.at("mu").get<double>();
  ci.eta = in.at("eta").get<double>();
  ci.eta_g = in.at("eta_g").get<double>();
  ci.tau = in.at("tau").get<std::size_t>();
  ci.n = in.at("n").get<std::size_t>();
  ci.batch = in.at("batch").get<double>();
  ci.sigma_sq = in.at("sigma_sq").get<double>();
  const auto& bg = in.at("subgradient_bound");
  ci.subgradient_bound = bg.is_string() ? std::numeric_limits<double>::infinity() : bg.get<double>();
  ci.indicator = in.at("indicator").get<bool>();
  ci.grad_norm_at_opt = in.at("grad_norm_at_opt").get<double>();
  const ContractionReport rep = contraction_report(omega, ci);
  auto finite_or_string = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json("inf"); };
  report["lyapunov"] = {{"observed_factor", rep.observed_factor},
                        {"observed_floor", rep.observed_floor},
                        {"predicted_factor", rep.predicted_factor},
                        {"predicted_residual", finite_or_string(rep.predicted_residual)},
                        {"predicted_ceiling", finite_or_string(rep.predicted_ceiling)},
                        {"max_ratio", rep.max_ratio},
                        {"pointwise_violations", rep.pointwise_violations},
                        {"interior_indicator_mode", rep.interior_indicator_mode},
                        {"pass_contracting", rep.contracting},
                        {"pass_within_ceiling", rep.within_ceiling},
                        {"pass_factor_below_prediction", rep.observed_factor <= rep.predicted_factor}};
  return report;
}

}  // namespace detail

/// Entry point of the `compofed` tool. Returns 0 on success, 1 on runtime
/// or configuration errors, 2 on usage errors.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Composite federated learning simulator"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  // datagen
  auto* datagen = app.add_subcommand("datagen", "Write a synthetic heterogeneous dataset directory");
  GenSpec gen = default_gen_spec();
  std::string datagen_out;
  bool no_normalize = false;
  datagen->add_option("--alpha", gen.alpha, "Variance of the per-worker model offset")->check(CLI::NonNegativeNumber);
  datagen->add_option("--beta", gen.beta, "Variance of the per-worker feature offset")->check(CLI::NonNegativeNumber);
  datagen->add_option("--n", gen.n, "Workers")->check(CLI::PositiveNumber);
  datagen->add_option("--m", gen.m, "Samples per worker")->check(CLI::PositiveNumber);
  datagen->add_option("--d", gen.d, "Feature dimension")->check(CLI::PositiveNumber);
  datagen->add_option("--seed", gen.seed, "Generator seed");
  datagen->add_flag("--no-normalize", no_normalize, "Keep raw feature scale");
  datagen->add_option("--out", datagen_out, "Output directory")->required();

  auto* run_cmd = app.add_subcommand("run", "Run one configuration (all configured algorithms)");
  detail::CommonFlags run_flags;
  run_flags.attach(*run_cmd);

  auto* sweep_cmd = app.add_subcommand("sweep", "Run the grid of [sweep] lists in the configuration");
  detail::CommonFlags sweep_flags;
  sweep_flags.attach(*sweep_cmd);

  auto* solve_cmd = app.add_subcommand("solve-ref", "Compute and cache the reference solution x*");
  detail::CommonFlags solve_flags;
  solve_flags.attach(*solve_cmd, false);

  auto* analyze_cmd = app.add_subcommand("analyze", "Contraction report for a trace CSV (uses its sidecar)");
  std::string analyze_trace;
  std::string analyze_out;
  analyze_cmd->add_option("--trace", analyze_trace, "Trace CSV")->required();
  analyze_cmd->add_option("--out", analyze_out, "Write the JSON report here instead of stdout");

  auto* preset_cmd = app.add_subcommand("preset", "Run a preset experiment");
  std::string preset_name;
  std::string preset_sweep = "eta";
  std::vector<std::uint64_t> preset_seeds;
  detail::CommonFlags preset_flags;
  preset_cmd->add_option("name", preset_name, "Preset")->required()->check(CLI::IsMember({"fig1", "fig2"}));
  preset_cmd->add_option("--sweep", preset_sweep, "fig2 sweep")->check(CLI::IsMember({"eta", "tau"}));
  preset_cmd->add_option("--seeds", preset_seeds, "Seeds (one dataset per seed)");
  preset_flags.attach(*preset_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  const std::size_t threads = default_thread_count();
  try {
    if (*datagen) {
      gen.normalize = !no_normalize;
      const auto workers = generate(gen);
      const auto manifest = write_dataset_dir(datagen_out, workers, gen);
      out << "wrote " << workers.size() << " worker files to " << datagen_out << " (data sha256 "
          << manifest.at("data_sha256").get<std::string>() << ")\n";
    } else if (*run_cmd) {
      const ExperimentConfig cfg = run_flags.resolve({});
      for (const auto& r : execute(cfg, threads)) detail::print_summary(out, r);
    } else if (*sweep_cmd) {
      const ExperimentConfig cfg = sweep_flags.resolve({});
      for (const auto& r : run_sweep(cfg, threads)) detail::print_summary(out, r.output);
    } else if (*solve_cmd) {
      const ExperimentConfig cfg = solve_flags.resolve({});
      validate(cfg);
      const PreparedProblem p = prepare(cfg);
      const fs::path path = cfg.out_dir / "xstar.json";
      write_json(path, to_json(p.reference, p.data_sha));
      out << "x* norm " << p.reference.x_star.norm() << ", fixed-point residual " << p.reference.fixed_point_residual
          << ", " << p.reference.iterations << " iterations -> " << path.string() << '\n';
    } else if (*analyze_cmd) {
      const auto report = detail::analyze_trace(analyze_trace);
      if (analyze_out.empty()) {
        out << report.dump(2) << '\n';
      } else {
        write_json(analyze_out, report);
        out << "wrote " << analyze_out << '\n';
      }
    } else if (*preset_cmd) {
      ExperimentConfig base;
      if (preset_name == "fig1") {
        base = preset_fig1(preset_flags.grad == "stoch" || preset_flags.batch.has_value());
      } else {
        base = preset_fig2(preset_sweep);
      }
      ExperimentConfig cfg = preset_flags.resolve(base);
      if (!preset_seeds.empty()) cfg.seeds = preset_seeds;
      for (const auto& r : run_sweep(cfg, threads)) detail::print_summary(out, r.output);
    }
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "unexpected failure: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace compofed::harness
