#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "compofed/core.hpp"
#include "compofed/objective.hpp"

namespace compofed {

/// Synthetic heterogeneous federated data, binary-label variant of the
/// (alpha, beta) generator of Li et al. (FedProx, MLSys 2020).
///
/// alpha is the variance of the per-worker model offset u_i, beta the
/// variance of the per-worker feature offset B_i.
struct GenSpec {
  double alpha = 0.0;
  double beta = 0.0;
  std::size_t n = 1;
  std::size_t m = 1;
  std::size_t d = 1;
  std::uint64_t seed = 0;
  /// Rescale every feature vector to unit l2 norm after labels are drawn.
  bool normalize = true;
};

inline void validate(const GenSpec& spec) {
  require(spec.n >= 1 && spec.m >= 1 && spec.d >= 1, "GenSpec requires n, m, d >= 1");
  require(std::isfinite(spec.alpha) && spec.alpha >= 0.0, "alpha must be nonnegative");
  require(std::isfinite(spec.beta) && spec.beta >= 0.0, "beta must be nonnegative");
}

/// Per-worker hyper-draws, exposed for tests.
struct WorkerHyperDraw {
  double model_offset = 0.0;    // u_i
  double feature_offset = 0.0;  // B_i
  Vector true_model;            // w_i
  Vector feature_mean;          // v_i
};

struct GeneratedData {
  std::vector<WorkerDataset> workers;
  std::vector<WorkerHyperDraw> draws;
};

/// Draws, for each worker in order:
///   u_i ~ N(0, alpha), B_i ~ N(0, beta),
///   w_i ~ N(u_i 1, I), v_i ~ N(B_i 1, I),
///   a_il ~ N(v_i, diag(j^-1.2)), b_il = +1 w.p. sigmoid(a_il^T w_i) else -1.
/// A single mt19937_64 seeded with `seed` drives everything, so the output is
/// a pure function of the spec.
inline GeneratedData generate_with_draws(const GenSpec& spec) {
  validate(spec);
  std::mt19937_64 engine(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  const auto d = static_cast<Eigen::Index>(spec.d);
  const auto m = static_cast<Eigen::Index>(spec.m);
  Vector stddev(d);
  for (Eigen::Index j = 0; j < d; ++j) stddev(j) = std::pow(static_cast<double>(j + 1), -0.6);

  GeneratedData out;
  out.workers.reserve(spec.n);
  out.draws.reserve(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    WorkerHyperDraw draw;
    draw.model_offset = std::sqrt(spec.alpha) * normal(engine);
    draw.feature_offset = std::sqrt(spec.beta) * normal(engine);
    draw.true_model.resize(d);
    draw.feature_mean.resize(d);
    for (Eigen::Index j = 0; j < d; ++j) draw.true_model(j) = draw.model_offset + normal(engine);
    for (Eigen::Index j = 0; j < d; ++j) draw.feature_mean(j) = draw.feature_offset + normal(engine);

    WorkerDataset ds;
    ds.worker_id = i;
    ds.features.resize(m, d);
    ds.labels.resize(m);
    for (Eigen::Index l = 0; l < m; ++l) {
      for (Eigen::Index j = 0; j < d; ++j) {
        ds.features(l, j) = draw.feature_mean(j) + stddev(j) * normal(engine);
      }
      const double p = logistic(ds.features.row(l).dot(draw.true_model));
      ds.labels(l) = uniform(engine) < p ? 1.0 : -1.0;
      if (spec.normalize) {
        const double norm = ds.features.row(l).norm();
        if (norm > 0.0) ds.features.row(l) /= norm;
      }
    }
    out.workers.push_back(std::move(ds));
    out.draws.push_back(std::move(draw));
  }
  return out;
}

inline std::vector<WorkerDataset> generate(const GenSpec& spec) {
  return generate_with_draws(spec).workers;
}

struct HeterogeneityReport {
  std::vector<double> feature_mean_norms;
  /// ||grad f_i(0) - grad f(0)|| per worker.
  std::vector<double> gradient_divergence;
  double mean_divergence = 0.0;
  double max_divergence = 0.0;
};

inline HeterogeneityReport heterogeneity_report(const std::vector<WorkerDataset>& workers) {
  require(!workers.empty(), "heterogeneity_report needs at least one worker");
  const Eigen::Index d = workers.front().dim();
  const SmoothSpec none{};
  const Vector origin = Vector::Zero(d);

  std::vector<Vector> grads;
  grads.reserve(workers.size());
  Vector mean_grad = Vector::Zero(d);
  HeterogeneityReport report;
  for (const auto& ds : workers) {
    require_dim(ds.dim(), d, "heterogeneity_report");
    report.feature_mean_norms.push_back(ds.features.colwise().mean().norm());
    grads.push_back(full_gradient(origin, ds, none));
    mean_grad += grads.back();
  }
  mean_grad /= static_cast<double>(workers.size());
  for (const auto& g : grads) {
    const double div = (g - mean_grad).norm();
    report.gradient_divergence.push_back(div);
    report.mean_divergence += div;
    report.max_divergence = std::max(report.max_divergence, div);
  }
  report.mean_divergence /= static_cast<double>(workers.size());
  return report;
}

}  // namespace compofed
