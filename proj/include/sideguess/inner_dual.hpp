#pragma once

// Inner supremum over Q_{X|YU} through its slope dual.
//
// For a fixed joint Q(y, u), the supremum over Q_{X|YU} of
//   rho R_{d,D}(Q_{X|U}) - sum_{y,u} Q(y,u) D(Q_{X|y,u} || P_{X|y})
// equals
//   sup_{s >= 0} [ -rho s D + sum_u min_{q_u} sum_y Q(y,u) log2 sum_x P(x|y) A_u(x)^{-rho} ],
//   A_u(x) = sum_xhat q_u(xhat) 2^{-s d(x, xhat)}.
// The inner minimum is convex in q_u; the maximizing Q_{X|YU} is the tilt
// P(x|y) A_u(x)^{-rho}, normalized per (y, u).

#include <span>
#include <vector>

#include "sideguess/exponent.hpp"

namespace sideguess {

class InnerDual {
 public:
  explicit InnerDual(const ProblemSpec& spec);

  /// Per-search scratch and warm starts. One per thread.
  struct Workspace {
    std::vector<double> grid_q;    // [grid point][u][xhat]
    std::vector<double> refine_q;  // [u][xhat]
    std::vector<double> a, b, w, c, e, hess, kkt, rhs, trial, dir, grad;  // scratch
    std::vector<std::size_t> support;
    double last_slope = -1.0;
    long long evaluations = 0;
  };

  struct Solution {
    double value = 0.0;
    double slope = 0.0;
    std::vector<double> q_xhat;        // [u][xhat]
    std::vector<double> q_x_given_yu;  // [y][u][x]
  };

  [[nodiscard]] Workspace make_workspace() const;

  /// sup over the slope for the joint q_yu ([y][u], sums to 1).
  double value(std::span<const double> q_yu, Workspace& ws) const;
  /// Local version of value(): searches for the best slope near the one the
  /// workspace found last. Meant for long runs of nearby joints.
  double value_near(std::span<const double> q_yu, Workspace& ws) const;
  /// Value plus the maximizing configuration.
  Solution solve(std::span<const double> q_yu, Workspace& ws) const;

  /// The dual function at one slope (for tests and diagnostics).
  double at_slope(std::span<const double> q_yu, double slope, Workspace& ws) const;

  [[nodiscard]] const std::vector<double>& slope_grid() const noexcept { return grid_; }

 private:
  struct SlopeEval {
    double value, derivative;
  };
  SlopeEval evaluate(std::span<const double> q_yu, std::span<const double> tilt, double slope,
                     std::span<double> q_store, Workspace& ws) const;
  double minimize_cell(std::span<const double> q_yu, std::size_t u, std::span<const double> tilt,
                       std::span<double> q, Workspace& ws, double& distortion) const;
  void tilt_for(double slope, std::vector<double>& tilt) const;
  double search(std::span<const double> q_yu, Workspace& ws, double& best_slope) const;

  std::size_t nx_, ny_, nu_, nxh_;
  double rho_, budget_;
  std::vector<double> p_x_given_y_;  // [y][x]
  std::vector<double> d_;            // [x][xhat]
  std::vector<double> grid_;
  std::vector<double> grid_tilts_;   // [grid point][x][xhat]
};

}  // namespace sideguess
