#pragma once

// Comparison methods for composite federated learning. All of them share
// the batch-stream derivation of the proposed method, so a given
// (seed, worker, round, step) sees the same minibatch in every algorithm.

#include <chrono>
#include <string>
#include <vector>

#include "compofed/algorithm.hpp"

namespace compofed {

enum class BaselineKind { FedMid, FedDA, FastFedDA };

inline std::string to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::FedMid: return "fedmid";
    case BaselineKind::FedDA: return "fedda";
    case BaselineKind::FastFedDA: return "fastfedda";
  }
  return "unknown";
}

namespace detail {

inline Vector batch_gradient(const Problem& problem, const HyperParams& hyper, std::size_t worker, std::size_t round,
                             std::size_t step, const Eigen::Ref<const Vector>& at) {
  const auto& ds = problem.workers[worker];
  CounterStream stream = CounterStream::for_step(hyper.seed, worker, round, step);
  const auto batch = sample_batch(stream, static_cast<std::size_t>(ds.samples()), batch_size_for(hyper, ds));
  return minibatch_gradient(at, ds, problem.smooth, batch);
}

inline Vector worker_mean(const std::vector<Vector>& values) {
  Vector mean = Vector::Zero(values.front().size());
  for (const auto& v : values) mean += v;
  return mean / static_cast<double>(values.size());
}

inline void push_record(RoundTrace& trace, std::size_t round, const Vector& state, Vector model,
                        std::chrono::steady_clock::time_point started) {
  RoundRecord record;
  record.round = round;
  record.x_bar = state;
  record.x_bar_prox = std::move(model);
  record.wall_ms = elapsed_ms(started);
  trace.records.push_back(std::move(record));
}

}  // namespace detail

/// FedMid (federated mirror descent with the Euclidean mirror map, Yuan,
/// Zaheer & Reddi, ICML 2021): local proximal SGD from the server model,
/// primal averaging on the server:
///   z <- prox(g, eta, z - eta grad f_i(z; B))   (tau times, z_0 = x_bar^r)
///   x_bar^{r+1} = x_bar^r + eta_g (mean_i z_{i,tau} - x_bar^r)
/// The reported model is x_bar itself.
inline RoundTrace run_fedmid(const Problem& problem, const HyperParams& hyper, const Regularizer& g,
                             const RunOptions& options = {}) {
  validate(hyper, problem);
  validate(g);
  const auto started = std::chrono::steady_clock::now();
  const std::size_t n = problem.n();
  Vector x_bar = initial_model(options, problem.dim());

  RoundTrace trace{"fedmid", hyper.seed, {}};
  trace.records.reserve(hyper.rounds + 1);
  detail::push_record(trace, 1, x_bar, x_bar, started);

  std::vector<Vector> local(n);
  for (std::size_t r = 1; r <= hyper.rounds; ++r) {
    parallel_for(n, options.threads, [&](std::size_t i) {
      Vector z = x_bar;
      for (std::size_t t = 0; t < hyper.tau; ++t) {
        const Vector grad = detail::batch_gradient(problem, hyper, i, r, t, z);
        z = prox(g, hyper.eta, z - hyper.eta * grad);
      }
      local[i] = std::move(z);
    });
    x_bar += hyper.eta_g * (detail::worker_mean(local) - x_bar);
    detail::push_record(trace, r + 1, x_bar, x_bar, started);
  }
  return trace;
}

/// Prox parameter used by FedDA to map the dual state to the primal model at
/// local step `step` of 1-based round `round`.
inline double fedda_prox_parameter(const HyperParams& hyper, std::size_t round, std::size_t step) {
  return hyper.eta_g * hyper.eta * static_cast<double>((round - 1) * hyper.tau) +
         hyper.eta * static_cast<double>(step);
}

/// FedDA (federated dual averaging, Yuan, Zaheer & Reddi, ICML 2021, with
/// h = 0.5||.||^2). Workers run dual averaging on a dual state zeta; the
/// primal point is prox(g, eta_tilde_{r,k}, zeta) with the accumulated
/// parameter eta_tilde_{r,k} = eta_g eta (r-1) tau + eta k. The server
/// averages dual states and applies the prox to obtain the model.
inline RoundTrace run_fedda(const Problem& problem, const HyperParams& hyper, const Regularizer& g,
                            const RunOptions& options = {}) {
  validate(hyper, problem);
  validate(g);
  const auto started = std::chrono::steady_clock::now();
  const std::size_t n = problem.n();
  Vector dual = initial_model(options, problem.dim());

  RoundTrace trace{"fedda", hyper.seed, {}};
  trace.records.reserve(hyper.rounds + 1);
  detail::push_record(trace, 1, dual, prox(g, 0.0, dual), started);

  std::vector<Vector> local(n);
  for (std::size_t r = 1; r <= hyper.rounds; ++r) {
    parallel_for(n, options.threads, [&](std::size_t i) {
      Vector zeta = dual;
      for (std::size_t t = 0; t < hyper.tau; ++t) {
        const Vector x = prox(g, fedda_prox_parameter(hyper, r, t), zeta);
        zeta -= hyper.eta * detail::batch_gradient(problem, hyper, i, r, t, x);
      }
      local[i] = std::move(zeta);
    });
    dual += hyper.eta_g * (detail::worker_mean(local) - dual);
    detail::push_record(trace, r + 1, dual, prox(g, fedda_prox_parameter(hyper, r + 1, 0), dual), started);
  }
  return trace;
}

/// Quadratic-term step 1 / Q_k = eta / (1 + eta mu A_k) of Fast-FedDA at
/// global local-step index k >= 1, where A_k = k (k + 1) / 2. Decreasing in k.
inline double fastfedda_step_size(std::size_t k, double eta, double mu) {
  const double A = 0.5 * static_cast<double>(k) * static_cast<double>(k + 1);
  return eta / (1.0 + eta * mu * A);
}

/// Fast-FedDA (Bao, Xu & Lin, ICML 2022), transcribed as accelerated
/// dual averaging for a mu-strongly convex composite objective. With weights
/// a_k = k, A_k = sum_{j<=k} a_j and global step index k:
///   y_k = (A_{k-1} x_{k-1} + a_k v_{k-1}) / A_k
///   s_k = s_{k-1} + a_k grad f_i(y_k; B),  Y_k = Y_{k-1} + a_k y_k
///   Q_k = 1/eta + mu A_k
///   v_k = prox(g, A_k / Q_k, (x_1/eta + mu Y_k - s_k) / Q_k)
///   x_k = (A_{k-1} x_{k-1} + a_k v_k) / A_k
/// The weighted gradient sum s, the weighted model sum Y and the model x
/// are all averaged by the server (three vectors per worker per round).
inline RoundTrace run_fastfedda(const Problem& problem, const HyperParams& hyper, const Regularizer& g,
                                const RunOptions& options = {}) {
  validate(hyper, problem);
  validate(g);
  const auto started = std::chrono::steady_clock::now();
  const std::size_t n = problem.n();
  const Eigen::Index d = problem.dim();
  const double mu = problem.smooth.l2_weight;
  const Vector anchor = initial_model(options, d);

  struct State {
    Vector x, s, Y;
  };
  State server{anchor, Vector::Zero(d), Vector::Zero(d)};

  auto dual_point = [&](const State& st, double A) {
    if (A == 0.0) return anchor;
    const double q = 1.0 / hyper.eta + mu * A;
    return Vector(prox(g, A / q, (anchor / hyper.eta + mu * st.Y - st.s) / q));
  };

  RoundTrace trace{"fastfedda", hyper.seed, {}};
  trace.records.reserve(hyper.rounds + 1);
  detail::push_record(trace, 1, server.x, server.x, started);

  std::vector<State> local(n);
  for (std::size_t r = 1; r <= hyper.rounds; ++r) {
    const std::size_t k0 = (r - 1) * hyper.tau;
    parallel_for(n, options.threads, [&](std::size_t i) {
      State st = server;
      double A = 0.5 * static_cast<double>(k0) * static_cast<double>(k0 + 1);
      Vector v = dual_point(st, A);
      for (std::size_t t = 0; t < hyper.tau; ++t) {
        const double a = static_cast<double>(k0 + t + 1);
        const double A_next = A + a;
        const Vector y = (A * st.x + a * v) / A_next;
        st.s += a * detail::batch_gradient(problem, hyper, i, r, t, y);
        st.Y += a * y;
        v = dual_point(st, A_next);
        st.x = (A * st.x + a * v) / A_next;
        A = A_next;
      }
      local[i] = std::move(st);
    });
    Vector mx = Vector::Zero(d), ms = Vector::Zero(d), mY = Vector::Zero(d);
    for (const auto& st : local) {
      mx += st.x;
      ms += st.s;
      mY += st.Y;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    server.x += hyper.eta_g * (mx * inv_n - server.x);
    server.s += hyper.eta_g * (ms * inv_n - server.s);
    server.Y += hyper.eta_g * (mY * inv_n - server.Y);
    detail::push_record(trace, r + 1, server.x, server.x, started);
  }
  return trace;
}

inline RoundTrace run_baseline(BaselineKind kind, const Problem& problem, const HyperParams& hyper,
                               const Regularizer& g, const RunOptions& options = {}) {
  switch (kind) {
    case BaselineKind::FedMid: return run_fedmid(problem, hyper, g, options);
    case BaselineKind::FedDA: return run_fedda(problem, hyper, g, options);
    case BaselineKind::FastFedDA: return run_fastfedda(problem, hyper, g, options);
  }
  throw Error("unknown baseline");
}

}  // namespace compofed
