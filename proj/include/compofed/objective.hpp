#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "compofed/core.hpp"
#include "compofed/rng.hpp"

namespace compofed {

/// The local data D_i of one worker: features a_il (rows) and labels b_il.
struct WorkerDataset {
  RowMatrix features;
  Vector labels;
  std::size_t worker_id = 0;

  Eigen::Index samples() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
};

/// Smooth-part parameters shared by all workers. The l2 term lives inside
/// every f_i so that each local loss is strongly convex.
struct SmoothSpec {
  double l2_weight = 0.0;
};

/// All worker datasets plus the smooth-part parameters.
struct Problem {
  std::vector<WorkerDataset> workers;
  SmoothSpec smooth;

  std::size_t n() const { return workers.size(); }
  Eigen::Index dim() const { return workers.empty() ? 0 : workers.front().dim(); }
};

inline void validate(const WorkerDataset& ds) {
  require(ds.samples() >= 1, "worker dataset must contain at least one sample");
  require_dim(ds.labels.size(), ds.samples(), "labels vs features");
  require(ds.features.allFinite(), "features must be finite");
  for (Eigen::Index l = 0; l < ds.labels.size(); ++l) {
    require(ds.labels(l) == 1.0 || ds.labels(l) == -1.0, "labels must be -1 or +1");
  }
}

inline void validate(const Problem& problem) {
  require(!problem.workers.empty(), "problem has no workers");
  require(std::isfinite(problem.smooth.l2_weight) && problem.smooth.l2_weight >= 0.0,
          "l2 weight must be finite and nonnegative");
  const Eigen::Index d = problem.dim();
  for (const auto& ds : problem.workers) {
    validate(ds);
    require_dim(ds.dim(), d, "worker feature dimension");
  }
}

/// ln(1 + e^u) without overflow.
inline double log1p_exp(double u) {
  return u > 0.0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
}

/// 1 / (1 + e^{-u}) without overflow.
inline double logistic(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

/// f_i(x) = (1/m) sum_l ln(1 + exp(-b_l a_l^T x)) + (l2/2)||x||^2
inline double loss(const Eigen::Ref<const Vector>& x, const WorkerDataset& ds, const SmoothSpec& spec) {
  require_dim(x.size(), ds.dim(), "loss");
  const Vector margins = (ds.features * x).cwiseProduct(ds.labels);
  double sum = 0.0;
  for (Eigen::Index l = 0; l < margins.size(); ++l) sum += log1p_exp(-margins(l));
  return sum / static_cast<double>(ds.samples()) + 0.5 * spec.l2_weight * x.squaredNorm();
}

/// f(x) = (1/n) sum_i f_i(x)
inline double loss(const Eigen::Ref<const Vector>& x, const Problem& problem) {
  double sum = 0.0;
  for (const auto& ds : problem.workers) sum += loss(x, ds, problem.smooth);
  return sum / static_cast<double>(problem.n());
}

inline Vector full_gradient(const Eigen::Ref<const Vector>& x, const WorkerDataset& ds, const SmoothSpec& spec) {
  require_dim(x.size(), ds.dim(), "full_gradient");
  const Vector margins = (ds.features * x).cwiseProduct(ds.labels);
  Vector weights(margins.size());
  for (Eigen::Index l = 0; l < margins.size(); ++l) {
    weights(l) = -ds.labels(l) * logistic(-margins(l));
  }
  Vector grad = ds.features.transpose() * weights;
  grad /= static_cast<double>(ds.samples());
  grad += spec.l2_weight * x;
  return grad;
}

/// Gradient of the average loss f, summed in ascending worker order.
inline Vector full_gradient(const Eigen::Ref<const Vector>& x, const Problem& problem) {
  Vector sum = Vector::Zero(problem.dim());
  for (const auto& ds : problem.workers) sum += full_gradient(x, ds, problem.smooth);
  return sum / static_cast<double>(problem.n());
}

/// (1/b) sum_{l in batch} grad f_il(x) + l2*x
inline Vector minibatch_gradient(const Eigen::Ref<const Vector>& x, const WorkerDataset& ds,
                                 const SmoothSpec& spec, std::span<const std::size_t> batch) {
  require_dim(x.size(), ds.dim(), "minibatch_gradient");
  require(!batch.empty(), "minibatch must not be empty");
  const auto m = static_cast<std::size_t>(ds.samples());
  Vector grad = Vector::Zero(ds.dim());
  for (const std::size_t l : batch) {
    require(l < m, "minibatch index out of range");
    const auto row = static_cast<Eigen::Index>(l);
    const double label = ds.labels(row);
    const double margin = label * ds.features.row(row).dot(x);
    grad.noalias() += (-label * logistic(-margin)) * ds.features.row(row).transpose();
  }
  grad /= static_cast<double>(batch.size());
  grad += spec.l2_weight * x;
  return grad;
}

/// Uniform size-b subset of {0..m-1} without replacement, returned sorted.
/// Uses Floyd's algorithm; b = m short-circuits to the full index set.
inline std::vector<std::size_t> sample_batch(CounterStream& stream, std::size_t m, std::size_t b) {
  require(b >= 1, "batch size must be at least 1");
  require(b <= m, "batch size exceeds the number of local samples");
  std::vector<std::size_t> chosen;
  chosen.reserve(b);
  if (b == m) {
    for (std::size_t l = 0; l < m; ++l) chosen.push_back(l);
    return chosen;
  }
  for (std::size_t j = m - b; j < m; ++j) {
    const auto t = static_cast<std::size_t>(stream.uniform_below(j + 1));
    auto pos = std::lower_bound(chosen.begin(), chosen.end(), t);
    if (pos != chosen.end() && *pos == t) {
      chosen.insert(std::lower_bound(chosen.begin(), chosen.end(), j), j);
    } else {
      chosen.insert(pos, t);
    }
  }
  return chosen;
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration, stopped when the Rayleigh quotient changes by less than
/// `rel_tol` relative.
inline double power_iteration(const Matrix& sym, double rel_tol = 1e-12, int max_iters = 200000) {
  const Eigen::Index d = sym.rows();
  if (d == 0 || sym.isZero(0.0)) return 0.0;
  Vector v(d);
  for (Eigen::Index j = 0; j < d; ++j) v(j) = 1.0 + 0.01 * static_cast<double>(j % 7);
  v.normalize();
  double lambda = v.dot(sym * v);
  for (int it = 0; it < max_iters; ++it) {
    Vector w = sym * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    const double next = v.dot(sym * v);
    if (std::abs(next - lambda) <= rel_tol * std::abs(next)) return next;
    lambda = next;
  }
  return lambda;
}

/// Strong convexity and smoothness constants shared by all f_i.
struct Constants {
  double mu = 0.0;
  double L = 0.0;
};

/// mu = l2; L = l2 + max_i lambda_max(A_i^T A_i / (4 m_i)).
inline Constants constants(const Problem& problem) {
  require(!problem.workers.empty(), "constants needs at least one worker");
  double worst = 0.0;
  for (const auto& ds : problem.workers) {
    const Matrix gram = ds.features.transpose() * ds.features / (4.0 * static_cast<double>(ds.samples()));
    worst = std::max(worst, power_iteration(gram));
  }
  return {problem.smooth.l2_weight, problem.smooth.l2_weight + worst};
}

/// Empirical sigma^2 with E||grad_B - grad||^2 ~= sigma^2 / b, averaged over
/// `draws` batches and all workers. Used for reporting only.
inline double estimate_gradient_variance(const Eigen::Ref<const Vector>& x, const Problem& problem,
                                         std::size_t b, std::size_t draws, std::uint64_t seed) {
  require(draws >= 1, "need at least one draw");
  double total = 0.0;
  for (std::size_t i = 0; i < problem.n(); ++i) {
    const auto& ds = problem.workers[i];
    const Vector full = full_gradient(x, ds, problem.smooth);
    CounterStream stream = CounterStream::for_step(seed, i, ~std::uint64_t{0}, 0);
    for (std::size_t k = 0; k < draws; ++k) {
      const auto batch = sample_batch(stream, static_cast<std::size_t>(ds.samples()), b);
      total += (minibatch_gradient(x, ds, problem.smooth, batch) - full).squaredNorm();
    }
  }
  return total * static_cast<double>(b) / static_cast<double>(draws * problem.n());
}

}  // namespace compofed
