#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "compofed/core.hpp"
#include "compofed/objective.hpp"
#include "compofed/parallel.hpp"
#include "compofed/prox.hpp"
#include "compofed/rng.hpp"

namespace compofed {

/// Step sizes and loop lengths. eta_tilde() = eta * eta_g * tau is the
/// prox parameter used for every global-model prox.
struct HyperParams {
  std::size_t rounds = 1;  // R
  std::size_t tau = 1;     // local steps per round
  double eta = 1.0;        // local step size
  double eta_g = 1.0;      // global step size
  /// Minibatch size b; empty means full local gradients (b = m_i).
  std::optional<std::size_t> batch;
  std::uint64_t seed = 0;

  double eta_tilde() const { return eta * eta_g * static_cast<double>(tau); }
};

inline void validate(const HyperParams& hyper) {
  require(hyper.rounds >= 1, "rounds must be at least 1");
  require(hyper.tau >= 1, "tau must be at least 1");
  require(std::isfinite(hyper.eta) && hyper.eta > 0.0, "eta must be positive");
  require(std::isfinite(hyper.eta_g) && hyper.eta_g > 0.0, "eta_g must be positive");
  require(!hyper.batch || *hyper.batch >= 1, "batch size must be at least 1");
}

inline void validate(const HyperParams& hyper, const Problem& problem) {
  validate(hyper);
  validate(problem);
  if (hyper.batch) {
    for (const auto& ds : problem.workers) {
      require(*hyper.batch <= static_cast<std::size_t>(ds.samples()),
              "batch size " + std::to_string(*hyper.batch) + " exceeds the " +
                  std::to_string(ds.samples()) + " samples of worker " + std::to_string(ds.worker_id));
    }
  }
}

inline std::size_t batch_size_for(const HyperParams& hyper, const WorkerDataset& ds) {
  return hyper.batch.value_or(static_cast<std::size_t>(ds.samples()));
}

/// Prox parameter applied to the post-proximal local model after step t.
enum class LocalProxSchedule {
  Growing,   // (t+1) * eta
  Constant,  // eta_tilde at every local step
};

struct WorkerState {
  Vector z_hat;     // pre-proximal local model
  Vector z;         // post-proximal local model
  Vector c;         // drift correction for the current round
  Vector grad_sum;  // running sum of the round's stochastic gradients
};

struct ServerState {
  Vector x_bar;       // pre-proximal global model
  Vector x_bar_prox;  // prox(g, eta_tilde, x_bar), cached
};

/// One entry per global model x_bar^r, r = 1..R+1.
struct RoundRecord {
  std::size_t round = 0;
  Vector x_bar;
  /// The model the algorithm outputs at this round. For the proposed
  /// method this is prox(g, eta_tilde, x_bar).
  Vector x_bar_prox;
  /// Per-worker sums of the stochastic gradients of round r-1, i.e. the
  /// sums that produced x_bar^r. All zero for r = 1. Empty when not kept.
  std::vector<Vector> grad_sums;
  /// ||sum_i c_i^r|| and max_i ||c_i^r|| for the corrections of round r.
  double correction_sum_norm = 0.0;
  double correction_max_norm = 0.0;
  /// Elapsed wall time since the start of the run.
  double wall_ms = 0.0;
};

struct RoundTrace {
  std::string algorithm;
  std::uint64_t seed = 0;
  std::vector<RoundRecord> records;

  const Vector& output() const { return records.back().x_bar_prox; }
};

struct RunOptions {
  /// Initial global model; empty means the zero vector.
  Vector x_bar_1;
  std::size_t threads = 1;
  LocalProxSchedule schedule = LocalProxSchedule::Growing;
  bool keep_grad_sums = true;
};

inline Vector initial_model(const RunOptions& options, Eigen::Index d) {
  if (options.x_bar_1.size() == 0) return Vector::Zero(d);
  require_dim(options.x_bar_1.size(), d, "initial model");
  require_finite(options.x_bar_1, "initial model");
  return options.x_bar_1;
}

inline double local_prox_parameter(LocalProxSchedule schedule, std::size_t step, const HyperParams& hyper) {
  return schedule == LocalProxSchedule::Growing ? static_cast<double>(step + 1) * hyper.eta : hyper.eta_tilde();
}

/// Server and worker state before round 1: all corrections zero.
inline std::pair<ServerState, std::vector<WorkerState>> init(const Eigen::Ref<const Vector>& x_bar_1, std::size_t n,
                                                             const HyperParams& hyper, const Regularizer& g) {
  require_finite(x_bar_1, "initial model");
  require(n >= 1, "need at least one worker");
  ServerState server{x_bar_1, prox(g, hyper.eta_tilde(), x_bar_1)};
  const Eigen::Index d = x_bar_1.size();
  std::vector<WorkerState> workers(n, WorkerState{server.x_bar_prox, server.x_bar_prox, Vector::Zero(d), Vector::Zero(d)});
  return {std::move(server), std::move(workers)};
}

struct LocalResult {
  Vector z_hat;     // final pre-proximal model, the only vector sent to the server
  Vector grad_sum;  // sum over the tau local steps of the stochastic gradients
};

/// Runs the tau local steps of worker `worker` in round `round` (1-based).
///
/// The worker starts from prox(g, eta_tilde, x_bar); the gradient is taken at
/// the post-proximal model and the step is applied to the pre-proximal one.
/// If `path` is non-null it receives z_{i,0}, ..., z_{i,tau}.
inline LocalResult local_round(std::size_t worker, std::size_t round, const Eigen::Ref<const Vector>& x_bar,
                               const Eigen::Ref<const Vector>& correction, const WorkerDataset& ds,
                               const SmoothSpec& spec, const Regularizer& g, const HyperParams& hyper,
                               LocalProxSchedule schedule = LocalProxSchedule::Growing,
                               std::vector<Vector>* path = nullptr) {
  require_dim(x_bar.size(), ds.dim(), "local_round model");
  require_dim(correction.size(), ds.dim(), "local_round correction");
  const Vector start = prox(g, hyper.eta_tilde(), x_bar);
  Vector z_hat = start;
  Vector z = start;
  Vector grad_sum = Vector::Zero(ds.dim());
  const auto m = static_cast<std::size_t>(ds.samples());
  const std::size_t b = batch_size_for(hyper, ds);
  if (path) {
    path->clear();
    path->push_back(z);
  }
  for (std::size_t t = 0; t < hyper.tau; ++t) {
    CounterStream stream = CounterStream::for_step(hyper.seed, worker, round, t);
    const auto batch = sample_batch(stream, m, b);
    const Vector grad = minibatch_gradient(z, ds, spec, batch);
    grad_sum += grad;
    z_hat -= hyper.eta * (grad + correction);
    z = prox(g, local_prox_parameter(schedule, t, hyper), z_hat);
    if (path) path->push_back(z);
  }
  return {std::move(z_hat), std::move(grad_sum)};
}

/// x_bar^{r+1} = P(x_bar^r) + eta_g * (mean_i z_hat_i - P(x_bar^r)), with the
/// mean summed in ascending worker order.
inline ServerState server_aggregate(const ServerState& server, std::span<const Vector> z_hats,
                                    std::size_t expected_workers, const HyperParams& hyper, const Regularizer& g) {
  require(z_hats.size() == expected_workers, "server received " + std::to_string(z_hats.size()) +
                                                 " local models, expected " + std::to_string(expected_workers));
  require(!z_hats.empty(), "server received no local models");
  Vector mean = Vector::Zero(server.x_bar.size());
  for (const auto& z : z_hats) {
    require_dim(z.size(), server.x_bar.size(), "server_aggregate");
    mean += z;
  }
  mean /= static_cast<double>(z_hats.size());
  ServerState next;
  next.x_bar = server.x_bar_prox + hyper.eta_g * (mean - server.x_bar_prox);
  next.x_bar_prox = prox(g, hyper.eta_tilde(), next.x_bar);
  return next;
}

/// c_i^{r+1} = (P(x_bar^r) - x_bar^{r+1}) / (eta_g eta tau) - grad_sum_i / tau
inline Vector update_correction(const Eigen::Ref<const Vector>& x_bar_prox_prev,
                                const Eigen::Ref<const Vector>& x_bar_next, const Eigen::Ref<const Vector>& grad_sum,
                                const HyperParams& hyper) {
  const double tau = static_cast<double>(hyper.tau);
  return (x_bar_prox_prev - x_bar_next) / (hyper.eta_g * hyper.eta * tau) - grad_sum / tau;
}

namespace detail {

inline void correction_stats(const std::vector<WorkerState>& workers, RoundRecord& record) {
  Vector sum = Vector::Zero(workers.front().c.size());
  double max_norm = 0.0;
  for (const auto& w : workers) {
    sum += w.c;
    max_norm = std::max(max_norm, w.c.norm());
  }
  record.correction_sum_norm = sum.norm();
  record.correction_max_norm = max_norm;
}

inline double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace detail

/// The proposed method: R rounds of
/// {local_round x n -> server_aggregate -> correction update}.
inline RoundTrace run(const Problem& problem, const HyperParams& hyper, const Regularizer& g,
                      const RunOptions& options = {}) {
  validate(hyper, problem);
  validate(g);
  const auto started = std::chrono::steady_clock::now();
  const std::size_t n = problem.n();
  const Eigen::Index d = problem.dim();
  auto [server, workers] = init(initial_model(options, d), n, hyper, g);

  RoundTrace trace;
  trace.algorithm = options.schedule == LocalProxSchedule::Growing ? "proposed" : "proposed-constant-prox";
  trace.seed = hyper.seed;
  trace.records.reserve(hyper.rounds + 1);

  auto snapshot = [&](std::size_t round) {
    RoundRecord record;
    record.round = round;
    record.x_bar = server.x_bar;
    record.x_bar_prox = server.x_bar_prox;
    if (options.keep_grad_sums) {
      record.grad_sums.reserve(n);
      for (const auto& w : workers) record.grad_sums.push_back(w.grad_sum);
    }
    detail::correction_stats(workers, record);
    record.wall_ms = detail::elapsed_ms(started);
    trace.records.push_back(std::move(record));
  };
  snapshot(1);

  std::vector<LocalResult> results(n);
  std::vector<Vector> z_hats(n);
  for (std::size_t r = 1; r <= hyper.rounds; ++r) {
    parallel_for(n, options.threads, [&](std::size_t i) {
      results[i] = local_round(i, r, server.x_bar, workers[i].c, problem.workers[i], problem.smooth, g, hyper,
                               options.schedule);
    });
    for (std::size_t i = 0; i < n; ++i) z_hats[i] = results[i].z_hat;
    ServerState next = server_aggregate(server, z_hats, n, hyper, g);
    // Equal to update_correction(server.x_bar_prox, next.x_bar, S_i, hyper)
    // whenever the previous corrections average to zero. Evaluating it from
    // the gradient sums keeps that average at rounding level; the literal
    // form feeds each round's rounding error into the next one.
    Vector mean_sum = Vector::Zero(d);
    for (std::size_t i = 0; i < n; ++i) mean_sum += results[i].grad_sum;
    mean_sum /= static_cast<double>(n);
    const double tau = static_cast<double>(hyper.tau);
    for (std::size_t i = 0; i < n; ++i) {
      workers[i].z_hat = std::move(results[i].z_hat);
      workers[i].grad_sum = std::move(results[i].grad_sum);
      workers[i].c = (mean_sum - workers[i].grad_sum) / tau;
    }
    server = std::move(next);
    snapshot(r + 1);
  }
  return trace;
}

/// Step sizes satisfying eta_tilde <= mu / (150 L^2) with equality and
/// eta_g = sqrt(n).
struct StepSizes {
  double eta = 0.0;
  double eta_g = 0.0;
  double eta_tilde = 0.0;
};

inline StepSizes theoretical_stepsize(double mu, double L, std::size_t n, std::size_t tau) {
  require(mu > 0.0 && L > 0.0, "theoretical_stepsize needs mu, L > 0");
  require(n >= 1 && tau >= 1, "theoretical_stepsize needs n, tau >= 1");
  StepSizes s;
  s.eta_tilde = mu / (150.0 * L * L);
  s.eta_g = std::sqrt(static_cast<double>(n));
  s.eta = s.eta_tilde / (s.eta_g * static_cast<double>(tau));
  return s;
}

}  // namespace compofed
