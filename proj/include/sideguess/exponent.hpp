#pragma once

// The guessing exponent with rate-limited side information:
//
//   sup_{Q_Y} inf_{Q_{U|Y}: I(Y;U) <= R} sup_{Q_{X|YU}}
//       rho * R_{d,D}(Q_{X|U}) - D(Q_{XYU} || P_{XY} Q_{U|Y})
//
// together with its direct-help and no-help special cases and Arikan's
// bounds for lossless guessing.

#include <cstdint>
#include <vector>

#include "sideguess/prob.hpp"
#include "sideguess/rate_distortion.hpp"

namespace sideguess {

/// One problem instance (P_XY, d, D, rho, R). Source letters x with
/// P_X(x) = 0 and observation letters y with P_Y(y) = 0 are pruned at
/// construction, so both marginals are strictly positive afterwards.
class ProblemSpec {
 public:
  ProblemSpec(JointPmf p_xy, DistortionSpec distortion, double rho, double rate);

  [[nodiscard]] const JointPmf& p_xy() const noexcept { return p_xy_; }
  [[nodiscard]] const DistortionSpec& distortion() const noexcept { return distortion_; }
  [[nodiscard]] double rho() const noexcept { return rho_; }
  [[nodiscard]] double rate() const noexcept { return rate_; }
  [[nodiscard]] const Alphabet& x_alphabet() const noexcept { return p_xy_.row_alphabet(); }
  [[nodiscard]] const Alphabet& y_alphabet() const noexcept { return p_xy_.col_alphabet(); }
  [[nodiscard]] std::size_t nx() const noexcept { return p_xy_.rows(); }
  [[nodiscard]] std::size_t ny() const noexcept { return p_xy_.cols(); }
  [[nodiscard]] std::size_t nxh() const noexcept { return distortion_.reconstruction_size(); }
  /// |U| = |Y| + 1.
  [[nodiscard]] std::size_t nu() const noexcept { return ny() + 1; }
  [[nodiscard]] const Pmf& p_x() const noexcept { return p_x_; }
  [[nodiscard]] const Pmf& p_y() const noexcept { return p_y_; }
  /// P(x | y), rows indexed by y.
  [[nodiscard]] const CondPmf& p_x_given_y() const noexcept { return p_x_given_y_; }

  [[nodiscard]] ProblemSpec with_rate(double rate) const;
  [[nodiscard]] ProblemSpec with_budget(double budget) const;
  [[nodiscard]] ProblemSpec with_rho(double rho) const;

  friend bool operator==(const ProblemSpec&, const ProblemSpec&) = default;

 private:
  JointPmf p_xy_;
  DistortionSpec distortion_;
  double rho_;
  double rate_;
  Pmf p_x_, p_y_;
  CondPmf p_x_given_y_;
};

/// Auxiliary distributions (Q_Y, Q_{U|Y}, Q_{X|YU}) with |U| = |Y| + 1.
/// q_x_given_yu rows are ordered y-major: row index y * |U| + u.
struct AuxConfiguration {
  Alphabet u_alphabet;
  Pmf q_y;
  CondPmf q_u_given_y;
  CondPmf q_x_given_yu;

  /// Builds and checks shapes against the spec from flat row-major arrays.
  static AuxConfiguration from_arrays(const ProblemSpec& spec, std::vector<double> q_y,
                                      std::vector<double> q_u_given_y, std::vector<double> q_x_given_yu);

  [[nodiscard]] Pmf q_u() const;
  /// Joint Q(y, u), rows y.
  [[nodiscard]] JointPmf q_yu() const;
  /// Q(x | u) = sum_y Q(y | u) Q(x | y, u); rows with Q_U(u) = 0 fall back
  /// to the unweighted average over y.
  [[nodiscard]] CondPmf q_x_given_u() const;
  [[nodiscard]] double mutual_info_yu() const;
};

struct ObjectiveBreakdown {
  double value = 0.0;  // rho * rd_term - kl_term, -infinity when kl_term is infinite
  double rd_term = 0.0;
  double kl_term = 0.0;
  /// Same value through the per-u decomposition sum_u Q_U(u) Psi_u.
  double decomposed_value = 0.0;
  /// sum_u Q_U(u) R_{d,D}(Q_{X|U=u}) with a separate budget per u; compare
  /// with rd_term to see how much the joint budget allocation buys.
  double per_u_budget_rd_term = 0.0;
  RdResult rd;
};

/// Evaluates the objective both directly and through the per-u
/// decomposition. Throws StructuralError when cfg does not fit spec.
ObjectiveBreakdown evaluate_objective(const ProblemSpec& spec, const AuxConfiguration& cfg,
                                      bool with_per_u_reading = false);
double objective(const ProblemSpec& spec, const AuxConfiguration& cfg);

struct SolverOptions {
  /// Outer starts. Each one is ranked by its middle value at the start
  /// point; local searches then run from the best polished_starts of them.
  int starts = 32;
  int polished_starts = 4;
  std::uint64_t seed = 0;
  /// Objective evaluations allowed per outer local search.
  int max_evaluations = 400;
  /// Local-search tolerance on objective values (bits).
  double tolerance = 1e-9;
  /// Starts per middle (infimum) local search.
  int middle_starts = 3;
  int middle_max_evaluations = 1500;
  /// Budget of a warm-started middle search while the outer search tracks
  /// it. The winner is re-checked with fresh starts at the full budget.
  int tracked_middle_evaluations = 400;
  /// Exhaustive grid over Q_Y and Q_{U|Y} with local polish (binary X, Y).
  bool grid_mode = false;
  double grid_step = 0.02;
  double middle_grid_step = 0.1;
  /// Worker threads for the multistart loop; 0 means available parallelism.
  int threads = 0;
};

struct SolverStats {
  int starts = 0;
  long long evaluations = 0;
  /// max - min of the local optima reached by the polished starts.
  double spread_across_starts = 0.0;
  /// max - min of the middle local minima at the reported Q_Y.
  double middle_spread = 0.0;
  /// Gap between the slope-dual value of the inner supremum and the primal
  /// value of the recovered Q_{X|YU} at the reported point.
  double inner_duality_gap = 0.0;
  bool converged = true;
};

struct ExponentResult {
  double value = 0.0;  // bits per symbol
  AuxConfiguration achieving;
  double rd_term = 0.0;
  double kl_term = 0.0;
  double mutual_info_yu = 0.0;
  SolverStats solver_stats;
};

/// Multistart nested search. Deterministic for a fixed seed and independent
/// of the thread count.
ExponentResult compute_exponent(const ProblemSpec& spec, const SolverOptions& opts = {});
/// Single-threaded reference for compute_exponent; same result bit for bit.
ExponentResult compute_exponent_serial(const ProblemSpec& spec, const SolverOptions& opts = {});

/// Helper observes the source itself:
/// sup_{Q_X} inf_{Q_{U|X}: I(X;U) <= R} rho R_{d,D}(Q_{X|U}) - D(Q_X || P_X).
/// Solved on the primal side with the conditional R-D solver, sharing no code
/// with compute_exponent's inner dual.
double direct_help_exponent(const Pmf& p_x, const DistortionSpec& distortion, double rho, double rate,
                            const SolverOptions& opts = {});

/// No help: sup_{Q_X} rho R_{d,D}(Q_X) - D(Q_X || P_X).
double no_help_exponent(const Pmf& p_x, const DistortionSpec& distortion, double rho,
                        const SolverOptions& opts = {});

struct ArikanBounds {
  double lower = 0.0;
  double upper = 0.0;
};

/// 2^{rho H_{1/(1+rho)}(P)} / (1 + log2 |X|)^rho <= min E[G^rho] <= 2^{rho H_{1/(1+rho)}(P)}.
ArikanBounds arikan_bounds(const Pmf& p_x, double rho);

}  // namespace sideguess
