#pragma once

// Stacked (d x n) formulation of the proposed method. Column i holds worker
// i. The correction is formed from the previous round's gradient block
// directly, and the server update is the "prox minus averaged gradients"
// recursion, so this path shares no arithmetic with run() beyond the
// gradient and prox primitives.

#include <chrono>
#include <vector>

#include "compofed/algorithm.hpp"

namespace compofed {

inline RoundTrace run_vectorized(const Problem& problem, const HyperParams& hyper, const Regularizer& g,
                                 const RunOptions& options = {}) {
  validate(hyper, problem);
  validate(g);
  const auto started = std::chrono::steady_clock::now();
  const auto n = static_cast<Eigen::Index>(problem.n());
  const Eigen::Index d = problem.dim();
  const double tau = static_cast<double>(hyper.tau);
  const double eta_tilde = hyper.eta_tilde();

  Vector x_bar = initial_model(options, d);
  Vector x_prox = prox(g, eta_tilde, x_bar);
  Matrix prev_grads = Matrix::Zero(d, n);  // column i: sum_t grad f_i(z_{i,t}^{r-1})

  RoundTrace trace;
  trace.algorithm = "proposed-vectorized";
  trace.seed = hyper.seed;
  trace.records.reserve(hyper.rounds + 1);

  auto correction_block = [&] {
    const Vector mean = prev_grads.rowwise().mean();
    return Matrix((mean.replicate(1, n) - prev_grads) / tau);
  };
  auto snapshot = [&](std::size_t round) {
    RoundRecord record;
    record.round = round;
    record.x_bar = x_bar;
    record.x_bar_prox = x_prox;
    if (options.keep_grad_sums) {
      for (Eigen::Index i = 0; i < n; ++i) record.grad_sums.emplace_back(prev_grads.col(i));
    }
    const Matrix corr = correction_block();
    record.correction_sum_norm = corr.rowwise().sum().norm();
    record.correction_max_norm = corr.colwise().norm().maxCoeff();
    record.wall_ms = detail::elapsed_ms(started);
    trace.records.push_back(std::move(record));
  };
  snapshot(1);

  Matrix z_hat(d, n);
  Matrix z(d, n);
  Matrix grads(d, n);
  for (std::size_t r = 1; r <= hyper.rounds; ++r) {
    const Matrix corr = correction_block();
    z_hat = x_prox.replicate(1, n);
    z = z_hat;
    Matrix round_grads = Matrix::Zero(d, n);
    Vector mean_grad_sum = Vector::Zero(d);
    for (std::size_t t = 0; t < hyper.tau; ++t) {
      parallel_for(static_cast<std::size_t>(n), options.threads, [&](std::size_t i) {
        const auto& ds = problem.workers[i];
        CounterStream stream = CounterStream::for_step(hyper.seed, i, r, t);
        const auto batch = sample_batch(stream, static_cast<std::size_t>(ds.samples()), batch_size_for(hyper, ds));
        grads.col(static_cast<Eigen::Index>(i)) =
            minibatch_gradient(z.col(static_cast<Eigen::Index>(i)), ds, problem.smooth, batch);
      });
      z_hat -= hyper.eta * (grads + corr);
      const double theta = local_prox_parameter(options.schedule, t, hyper);
      for (Eigen::Index i = 0; i < n; ++i) z.col(i) = prox(g, theta, z_hat.col(i));
      round_grads += grads;
      mean_grad_sum += grads.rowwise().mean();
    }
    x_bar = x_prox - hyper.eta_g * hyper.eta * mean_grad_sum;
    x_prox = prox(g, eta_tilde, x_bar);
    prev_grads = round_grads;
    snapshot(r + 1);
  }
  return trace;
}

}  // namespace compofed
