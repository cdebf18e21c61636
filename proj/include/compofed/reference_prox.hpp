#pragma once

// Slow, independent evaluation of the proximal map. Test-only: it shares
// nothing with prox() beyond the Regularizer type.

#include <algorithm>
#include <cmath>
#include <functional>

#include "compofed/prox.hpp"

namespace compofed {

namespace detail {

/// Root of a nondecreasing set-valued map on [lo, hi], found by bisection on
/// the sign of its left/right limits. `slope(u, side)` returns the one-sided
/// derivative of the 1-D objective (side = -1 left, +1 right).
inline double bisect_subdifferential(const std::function<double(double, int)>& slope, double lo,
                                     double hi) {
  if (slope(lo, +1) >= 0.0) return lo;
  if (slope(hi, -1) <= 0.0) return hi;
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    if (slope(mid, -1) > 0.0) {
      hi = mid;
    } else if (slope(mid, +1) < 0.0) {
      lo = mid;
    } else {
      return mid;  // 0 lies in the subdifferential at mid
    }
  }
  return lo + 0.5 * (hi - lo);
}

}  // namespace detail

/// Solves argmin_u theta*g(u) + 0.5*||omega - u||^2 without closed forms:
/// coordinatewise bisection on the optimality condition for separable g,
/// radial normalization for the ball.
inline Vector reference_prox(const Regularizer& g, double theta, const Eigen::Ref<const Vector>& omega) {
  detail::check_prox_args(theta, omega);
  const Eigen::Index d = omega.size();
  Vector out(d);
  if (const auto* l1 = std::get_if<L1>(&g)) {
    const double lam = theta * l1->weight;
    for (Eigen::Index j = 0; j < d; ++j) {
      const double w = omega(j);
      auto slope = [&](double u, int side) {
        double s = 0.0;
        if (u > 0.0) s = 1.0;
        else if (u < 0.0) s = -1.0;
        else s = side;
        return (u - w) + lam * s;
      };
      const double span = std::abs(w) + lam + 1.0;
      out(j) = detail::bisect_subdifferential(slope, -span, span);
    }
  } else if (const auto* box = std::get_if<IndicatorBox>(&g)) {
    require_dim(d, box->lower.size(), "box projection");
    for (Eigen::Index j = 0; j < d; ++j) {
      const double w = omega(j);
      auto slope = [&](double u, int) { return u - w; };
      out(j) = detail::bisect_subdifferential(slope, box->lower(j), box->upper(j));
    }
  } else if (const auto* ball = std::get_if<IndicatorL2Ball>(&g)) {
    require_dim(d, ball->center.size(), "ball projection");
    Vector offset = omega - ball->center;
    const double norm = std::sqrt(offset.squaredNorm());
    out = norm > ball->radius ? Vector(ball->center + (ball->radius / norm) * offset) : Vector(omega);
  } else {
    out = omega;
  }
  return out;
}

}  // namespace compofed
