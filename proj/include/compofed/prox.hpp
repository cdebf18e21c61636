#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <variant>

#include "compofed/core.hpp"

namespace compofed {

/// g(x) = weight * ||x||_1
struct L1 {
  double weight = 0.0;
};

/// Indicator of the ball { x : ||x - center|| <= radius }.
struct IndicatorL2Ball {
  double radius = 1.0;
  Vector center;
};

/// Indicator of the box { x : lower <= x <= upper }.
struct IndicatorBox {
  Vector lower;
  Vector upper;
};

/// g(x) = 0
struct Zero {};

/// The non-smooth part of the composite objective.
using Regularizer = std::variant<L1, IndicatorL2Ball, IndicatorBox, Zero>;

inline Regularizer make_l1(double weight) {
  require(std::isfinite(weight) && weight >= 0.0, "L1 weight must be finite and nonnegative");
  return L1{weight};
}

inline Regularizer make_ball(double radius, Vector center) {
  require(std::isfinite(radius) && radius > 0.0, "ball radius must be positive");
  require_finite(center, "ball center");
  return IndicatorL2Ball{radius, std::move(center)};
}

inline Regularizer make_box(Vector lower, Vector upper) {
  require_dim(upper.size(), lower.size(), "box bounds");
  require_finite(lower, "box lower bound");
  require_finite(upper, "box upper bound");
  require((lower.array() <= upper.array()).all(), "box requires lower <= upper componentwise");
  return IndicatorBox{std::move(lower), std::move(upper)};
}

/// Checks the invariants of a regularizer that may have been built by hand.
inline void validate(const Regularizer& g) {
  std::visit(
      [](const auto& r) {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, L1>) {
          require(std::isfinite(r.weight) && r.weight >= 0.0, "L1 weight must be finite and nonnegative");
        } else if constexpr (std::is_same_v<T, IndicatorL2Ball>) {
          require(std::isfinite(r.radius) && r.radius > 0.0, "ball radius must be positive");
          require_finite(r.center, "ball center");
        } else if constexpr (std::is_same_v<T, IndicatorBox>) {
          require_dim(r.upper.size(), r.lower.size(), "box bounds");
          require((r.lower.array() <= r.upper.array()).all(), "box requires lower <= upper componentwise");
        }
      },
      g);
}

inline bool is_indicator(const Regularizer& g) {
  return std::holds_alternative<IndicatorL2Ball>(g) || std::holds_alternative<IndicatorBox>(g);
}

inline std::string describe(const Regularizer& g) {
  return std::visit(
      [](const auto& r) -> std::string {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, L1>) return "l1";
        else if constexpr (std::is_same_v<T, IndicatorL2Ball>) return "ball";
        else if constexpr (std::is_same_v<T, IndicatorBox>) return "box";
        else return "zero";
      },
      g);
}

namespace detail {

inline void check_prox_args(double theta, const Eigen::Ref<const Vector>& omega) {
  require(std::isfinite(theta), "prox parameter must be finite");
  require(theta >= 0.0, "prox parameter must be nonnegative");
  require_finite(omega, "prox input");
}

}  // namespace detail

/// Componentwise soft-threshold: sign(w) * max(|w| - threshold, 0).
inline Vector soft_threshold(const Eigen::Ref<const Vector>& omega, double threshold) {
  return omega.array().sign() * (omega.array().abs() - threshold).max(0.0);
}

/// Euclidean projection onto a ball; points inside are returned unchanged.
inline Vector project_ball(const Eigen::Ref<const Vector>& omega, const IndicatorL2Ball& ball) {
  require_dim(omega.size(), ball.center.size(), "ball projection");
  Vector offset = omega - ball.center;
  const double norm = offset.norm();
  if (norm <= ball.radius) return omega;
  return ball.center + offset * (ball.radius / norm);
}

inline Vector project_box(const Eigen::Ref<const Vector>& omega, const IndicatorBox& box) {
  require_dim(omega.size(), box.lower.size(), "box projection");
  return omega.cwiseMax(box.lower).cwiseMin(box.upper);
}

/// Proximal map argmin_u theta*g(u) + 0.5*||omega - u||^2.
///
/// Indicators project for every theta >= 0, including theta = 0, so the
/// result is always feasible.
inline Vector prox(const Regularizer& g, double theta, const Eigen::Ref<const Vector>& omega) {
  detail::check_prox_args(theta, omega);
  return std::visit(
      [&](const auto& r) -> Vector {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, L1>) {
          return soft_threshold(omega, theta * r.weight);
        } else if constexpr (std::is_same_v<T, IndicatorL2Ball>) {
          return project_ball(omega, r);
        } else if constexpr (std::is_same_v<T, IndicatorBox>) {
          return project_box(omega, r);
        } else {
          return omega;
        }
      },
      g);
}

/// Value of g at x; +infinity outside an indicator's set (with a small
/// feasibility slack for round-off on the boundary).
inline double value(const Regularizer& g, const Eigen::Ref<const Vector>& x, double slack = 1e-12) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  return std::visit(
      [&](const auto& r) -> double {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, L1>) {
          return r.weight * x.template lpNorm<1>();
        } else if constexpr (std::is_same_v<T, IndicatorL2Ball>) {
          return (x - r.center).norm() <= r.radius * (1.0 + slack) + slack ? 0.0 : inf;
        } else if constexpr (std::is_same_v<T, IndicatorBox>) {
          const bool inside = ((x - r.lower).array() >= -slack).all() && ((r.upper - x).array() >= -slack).all();
          return inside ? 0.0 : inf;
        } else {
          return 0.0;
        }
      },
      g);
}

/// Uniform bound on ||s|| over all subgradients s of g, or +infinity for
/// indicators (their normal cones are unbounded on the boundary).
inline double subgradient_bound(const Regularizer& g, Eigen::Index dim) {
  return std::visit(
      [&](const auto& r) -> double {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, L1>) {
          return r.weight * std::sqrt(static_cast<double>(dim));
        } else if constexpr (std::is_same_v<T, Zero>) {
          return 0.0;
        } else {
          return std::numeric_limits<double>::infinity();
        }
      },
      g);
}

}  // namespace compofed
