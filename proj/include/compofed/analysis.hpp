#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "compofed/algorithm.hpp"
#include "compofed/core.hpp"
#include "compofed/objective.hpp"
#include "compofed/prox.hpp"

namespace compofed {

struct ReferenceSolution {
  Vector x_star;
  /// ||x - prox(g, 1/L, x - grad f(x) / L)||
  double fixed_point_residual = 0.0;
  std::size_t iterations = 0;
};

inline double fixed_point_residual(const Eigen::Ref<const Vector>& x, const Problem& problem, const Regularizer& g,
                                   double step) {
  const Vector grad = full_gradient(x, problem);
  return (x - prox(g, step, x - step * grad)).norm();
}

/// Accelerated proximal gradient with step 1/L and gradient-based restart,
/// run until the fixed-point residual drops to tol * (1 + ||x||).
inline ReferenceSolution solve_reference(const Problem& problem, const Regularizer& g, double tol = 1e-13,
                                         std::size_t max_iters = 1'000'000) {
  validate(problem);
  validate(g);
  const Constants k = constants(problem);
  require(k.mu > 0.0, "solve_reference needs a strongly convex smooth part (l2 weight > 0)");
  const double step = 1.0 / k.L;
  const Eigen::Index d = problem.dim();

  Vector x = prox(g, step, Vector::Zero(d));
  Vector y = x;
  double momentum = 1.0;
  double residual = std::numeric_limits<double>::infinity();
  for (std::size_t it = 1; it <= max_iters; ++it) {
    const Vector grad_y = full_gradient(y, problem);
    Vector x_next = prox(g, step, y - step * grad_y);
    // fixed-point residual at y
    residual = (x_next - y).norm();
    if (residual <= tol * (1.0 + y.norm())) return {y, residual, it};
    const double next_momentum = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    if ((y - x_next).dot(x_next - x) > 0.0) {
      // momentum pushes uphill: restart
      momentum = 1.0;
      y = x_next;
    } else {
      y = x_next + ((momentum - 1.0) / next_momentum) * (x_next - x);
      momentum = next_momentum;
    }
    x = std::move(x_next);
  }
  throw Error("solve_reference did not converge in " + std::to_string(max_iters) +
              " iterations; last fixed-point residual " + std::to_string(residual));
}

/// ||model - x*|| / ||x*||
inline double optimality_of_model(const Eigen::Ref<const Vector>& model, const Eigen::Ref<const Vector>& x_star) {
  require_dim(model.size(), x_star.size(), "optimality");
  const double scale = x_star.norm();
  require(scale > 0.0, "optimality is undefined when x* = 0");
  return (model - x_star).norm() / scale;
}

/// ||prox(g, eta_tilde, x_bar) - x*|| / ||x*||
inline double optimality(const Eigen::Ref<const Vector>& x_bar, double eta_tilde, const Regularizer& g,
                         const Eigen::Ref<const Vector>& x_star) {
  return optimality_of_model(prox(g, eta_tilde, x_bar), x_star);
}

/// Lambda^r stacked per worker, with its worker mean.
struct LambdaBlock {
  std::vector<Vector> lambda;
  Vector mean;
};

/// Lambda_i^r = eta (tau grad f_i(P(x_bar^r)) + mean_j S_j^{r-1} - S_i^{r-1}),
/// where S_i^{r-1} are the gradient sums stored in the record.
inline LambdaBlock lambda(const RoundRecord& record, const Problem& problem, const HyperParams& hyper) {
  const std::size_t n = problem.n();
  require(record.grad_sums.size() == n, "round record is missing per-worker gradient sums");
  const Eigen::Index d = problem.dim();
  Vector mean_sum = Vector::Zero(d);
  for (const auto& s : record.grad_sums) mean_sum += s;
  mean_sum /= static_cast<double>(n);

  LambdaBlock block;
  block.mean = Vector::Zero(d);
  block.lambda.reserve(n);
  const double tau = static_cast<double>(hyper.tau);
  for (std::size_t i = 0; i < n; ++i) {
    const Vector grad = full_gradient(record.x_bar_prox, problem.workers[i], problem.smooth);
    block.lambda.push_back(hyper.eta * (tau * grad + mean_sum - record.grad_sums[i]));
    block.mean += block.lambda.back();
  }
  block.mean /= static_cast<double>(n);
  return block;
}

inline LambdaBlock lambda(std::size_t round, const RoundTrace& trace, const Problem& problem,
                          const HyperParams& hyper) {
  require(round >= 1 && round <= trace.records.size(), "round " + std::to_string(round) + " is not in the trace");
  return lambda(trace.records[round - 1], problem, hyper);
}

struct LyapunovRecord {
  double omega = 0.0;
  double dist_sq = 0.0;   // ||P(x_bar^r) - x*||^2
  double drift_sq = 0.0;  // ||Lambda^r - mean||^2 / n
  std::vector<Vector> lambda;
};

inline LyapunovRecord lyapunov(const RoundRecord& record, const Problem& problem, const HyperParams& hyper,
                               const Eigen::Ref<const Vector>& x_star) {
  LyapunovRecord out;
  LambdaBlock block = lambda(record, problem, hyper);
  out.dist_sq = (record.x_bar_prox - x_star).squaredNorm();
  for (const auto& l : block.lambda) out.drift_sq += (l - block.mean).squaredNorm();
  out.drift_sq /= static_cast<double>(problem.n());
  out.omega = out.dist_sq + out.drift_sq;
  out.lambda = std::move(block.lambda);
  return out;
}

inline LyapunovRecord lyapunov(std::size_t round, const RoundTrace& trace, const Problem& problem,
                               const HyperParams& hyper, const Eigen::Ref<const Vector>& x_star) {
  require(round >= 1 && round <= trace.records.size(), "round " + std::to_string(round) + " is not in the trace");
  return lyapunov(trace.records[round - 1], problem, hyper, x_star);
}

inline std::vector<LyapunovRecord> lyapunov_series(const RoundTrace& trace, const Problem& problem,
                                                   const HyperParams& hyper, const Eigen::Ref<const Vector>& x_star) {
  std::vector<LyapunovRecord> out;
  out.reserve(trace.records.size());
  for (const auto& record : trace.records) out.push_back(lyapunov(record, problem, hyper, x_star));
  return out;
}

/// Floor estimate: minimum over the trailing 20% of the series (at least one point).
inline double trailing_floor(const std::vector<double>& series) {
  require(!series.empty(), "empty series");
  const std::size_t window = std::max<std::size_t>(1, series.size() / 5);
  return *std::min_element(series.end() - static_cast<std::ptrdiff_t>(window), series.end());
}

/// Quantities the convergence bound depends on.
struct ContractionInputs {
  double mu = 0.0;
  double eta = 0.0;
  double eta_g = 0.0;
  std::size_t tau = 1;
  std::size_t n = 1;
  double batch = 1.0;    // b (use m for full gradients)
  double sigma_sq = 0.0;  // gradient-noise constant
  double subgradient_bound = 0.0;  // B_g, +inf for indicators
  bool indicator = false;
  /// ||grad f(x*)||; indicator problems with this ~ 0 drop the B_g term.
  double grad_norm_at_opt = std::numeric_limits<double>::infinity();
  double stationarity_tol = 1e-8;

  double eta_tilde() const { return eta * eta_g * static_cast<double>(tau); }
};

struct ContractionReport {
  double observed_factor = 1.0;
  double observed_floor = 0.0;
  double predicted_factor = 1.0;  // 1 - mu eta_tilde / 3
  double predicted_residual = 0.0;
  /// (predicted_factor)^R * Omega^1 + predicted_residual at the last round.
  double predicted_ceiling = 0.0;
  double max_ratio = 0.0;  // max_r Omega^{r+1} / Omega^r over positive terms
  std::size_t pointwise_violations = 0;
  bool interior_indicator_mode = false;
  bool contracting = false;
  bool within_ceiling = false;
};

/// Fits a linear rate to log(Omega^r - floor) over the non-floor rounds and
/// compares it with the theoretical rate and residual.
inline ContractionReport contraction_report(const std::vector<double>& omega, const ContractionInputs& in) {
  require(omega.size() >= 2, "contraction_report needs at least two rounds");
  for (const double v : omega) require(std::isfinite(v) && v >= 0.0, "Lyapunov series must be finite and nonnegative");
  require(in.mu > 0.0 && in.eta > 0.0 && in.eta_g > 0.0 && in.n >= 1 && in.batch > 0.0,
          "contraction_report needs positive constants");

  ContractionReport rep;
  rep.observed_floor = trailing_floor(omega);
  rep.predicted_factor = 1.0 - in.mu * in.eta_tilde() / 3.0;
  rep.interior_indicator_mode = in.indicator && in.grad_norm_at_opt <= in.stationarity_tol;

  const double n = static_cast<double>(in.n);
  const double noise_term = 30.0 * in.eta * in.eta_g / in.mu * in.sigma_sq / (n * in.batch);
  double subgrad_term = 0.0;
  if (!rep.interior_indicator_mode) {
    const double bg = in.subgradient_bound;
    subgrad_term = bg == 0.0 ? 0.0 : 21.0 * static_cast<double>(in.tau) * in.eta * in.eta_g / (in.mu * n) * bg * bg;
  }
  rep.predicted_residual = noise_term + subgrad_term;
  const double rounds = static_cast<double>(omega.size() - 1);
  rep.predicted_ceiling = std::pow(rep.predicted_factor, rounds) * omega.front() + rep.predicted_residual;
  rep.within_ceiling = omega.back() <= rep.predicted_ceiling;

  for (std::size_t r = 0; r + 1 < omega.size(); ++r) {
    if (omega[r] > 0.0) {
      rep.max_ratio = std::max(rep.max_ratio, omega[r + 1] / omega[r]);
      if (omega[r + 1] > rep.predicted_factor * omega[r]) ++rep.pointwise_violations;
    }
  }

  // least-squares slope over the head of the series, before the floor window
  const std::size_t head = omega.size() - std::max<std::size_t>(1, omega.size() / 5);
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < head; ++r) {
    const double excess = omega[r] - rep.observed_floor;
    if (!(excess > 0.0)) continue;
    const double x = static_cast<double>(r);
    const double y = std::log(excess);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++count;
  }
  if (count >= 2) {
    const double c = static_cast<double>(count);
    const double denom = c * sxx - sx * sx;
    if (denom > 0.0) rep.observed_factor = std::exp((c * sxy - sx * sy) / denom);
  }
  rep.contracting = rep.observed_factor < 1.0;
  return rep;
}

/// Number of rounds r (before the series first drops below `stop_below`)
/// with omega[r+1] > factor * omega[r].
inline std::size_t count_contraction_violations(const std::vector<double>& omega, double factor, double stop_below) {
  std::size_t violations = 0;
  for (std::size_t r = 0; r + 1 < omega.size(); ++r) {
    if (omega[r] < stop_below) break;
    if (omega[r + 1] > factor * omega[r]) ++violations;
  }
  return violations;
}

}  // namespace compofed
