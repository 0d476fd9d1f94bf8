#pragma once

// Rate-distortion and conditional rate-distortion functions of finite
// sources. Each fixed slope is a convex problem over the output marginal,
// solved by Newton steps; an outer bisection on the slope meets the budget.

#include <vector>

#include "sideguess/prob.hpp"

namespace sideguess {

/// Per-letter distortion d(x, xhat) >= 0 together with the budget D.
/// Construction rejects budgets that leave some source letter without a
/// reconstruction within distortion D.
class DistortionSpec {
 public:
  DistortionSpec() = default;
  DistortionSpec(Alphabet source, Alphabet reconstruction, std::vector<double> matrix, double budget);

  /// d(x, xhat) = [x != xhat] on a shared alphabet.
  static DistortionSpec hamming(const Alphabet& alphabet, double budget);

  [[nodiscard]] const Alphabet& source_alphabet() const noexcept { return source_; }
  [[nodiscard]] const Alphabet& reconstruction_alphabet() const noexcept { return recon_; }
  [[nodiscard]] std::size_t source_size() const noexcept { return source_.size(); }
  [[nodiscard]] std::size_t reconstruction_size() const noexcept { return recon_.size(); }
  [[nodiscard]] double operator()(std::size_t x, std::size_t xhat) const { return matrix_[x * recon_.size() + xhat]; }
  [[nodiscard]] std::span<const double> matrix() const noexcept { return matrix_; }
  [[nodiscard]] double budget() const noexcept { return budget_; }

  [[nodiscard]] DistortionSpec with_budget(double budget) const;
  /// Same matrix restricted to the listed source letters.
  [[nodiscard]] DistortionSpec restricted_to_sources(const std::vector<std::size_t>& keep) const;

  /// max_x min_xhat d(x, xhat): the smallest budget that is coverable.
  [[nodiscard]] double coverable_budget() const;
  /// Smallest strictly positive entry (1 if every entry is zero).
  [[nodiscard]] double min_positive() const;
  /// min_xhat E_q[d(X, xhat)]: at or above this budget the rate is zero.
  [[nodiscard]] double zero_rate_distortion(std::span<const double> q_x) const;

  friend bool operator==(const DistortionSpec&, const DistortionSpec&) = default;

 private:
  Alphabet source_, recon_;
  std::vector<double> matrix_;
  double budget_ = 0.0;
};

struct RdOptions {
  /// A fixed-slope solve stops once its optimality gap is below this (bits).
  double rate_tolerance = 1e-13;
  int max_inner_iterations = 200;
  /// Outer bisection stops once |achieved - target| distortion is below this.
  double distortion_tolerance = 1e-11;
  int max_bisection_steps = 200;
  /// Largest slope tried, in bits per unit distortion. Zero selects
  /// 40 / (smallest positive distortion).
  double max_slope = 0.0;
  /// Optional starting slope (e.g. from a nearby earlier solve); 0 means
  /// none. Only the search path changes, not the stopping rules.
  double slope_hint = 0.0;
};

struct RdResult {
  double rate = 0.0;
  /// Q(xhat | x), or Q(xhat | u, x) with rows ordered u-major for the
  /// conditional function.
  CondPmf achieving_kernel;
  double achieved_distortion = 0.0;
  /// Lagrange multiplier in bits per unit distortion (0 in the zero-rate
  /// regime).
  double slope = 0.0;
  int iterations = 0;
};

/// R_{d,D}(q_x) = min I(X; Xhat) over kernels with E[d] <= D.
RdResult rd_function(const Pmf& q_x, const DistortionSpec& spec, const RdOptions& opts = {});

/// Conditional R-D function: min I(X; Xhat | U) over Q(xhat | x, u) with the
/// distortion expectation taken jointly over (X, U). One slope is shared by
/// every u.
RdResult conditional_rd(const Pmf& q_u, const CondPmf& q_x_given_u, const DistortionSpec& spec,
                        const RdOptions& opts = {});

/// Alternative reading with a separate budget D for each u:
/// sum_u q_u(u) R_{d,D}(Q_{X|U=u}). Never below conditional_rd.
double per_u_budget_rd(const Pmf& q_u, const CondPmf& q_x_given_u, const DistortionSpec& spec,
                       const RdOptions& opts = {});

/// E[d(X, Xhat)] for X ~ q_x and the given kernel.
double distortion_of(const Pmf& q_x, const CondPmf& kernel, const DistortionSpec& spec);
/// E[d(X, Xhat)] for (U, X) ~ q_u q_{x|u} and a kernel with u-major rows.
double distortion_of(const Pmf& q_u, const CondPmf& q_x_given_u, const CondPmf& kernel, const DistortionSpec& spec);

/// Per-u joints Q(x, xhat | u) induced by a u-major kernel; feed to
/// conditional_mutual_information to recompute the rate.
std::vector<JointPmf> per_u_joints(const CondPmf& q_x_given_u, const CondPmf& kernel);

/// Product alphabet labels "u|x" for u-major kernel rows.
Alphabet product_alphabet(const Alphabet& outer, const Alphabet& inner);

}  // namespace sideguess
