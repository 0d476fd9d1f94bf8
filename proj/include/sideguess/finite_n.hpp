#pragma once

// Exact guessing moments at tiny blocklengths: every helper table, every
// (or a greedy) guessing order, exact rho-th moments.
//
// Sequences of length n are indexed lexicographically with the first symbol
// most significant, so index = sum_i a_i |A|^(n-1-i).

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "sideguess/exponent.hpp"

namespace sideguess {

/// A size cap was exceeded; the message names the cap.
struct SizeCapError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint64_t kMaxJointSequences = 1'000'000;  // |X|^n |Y|^n
inline constexpr std::uint64_t kMaxExhaustiveCandidates = 8;    // |Xhat|^n
inline constexpr std::uint64_t kMaxHelperTables = 100'000;
inline constexpr double kCoverSlack = 1e-12;

struct FiniteNInstance {
  ProblemSpec spec;
  int n = 1;
  std::uint64_t message_count = 1;

  /// Throws StructuralError for n < 1 or M < 1 and SizeCapError when
  /// |X|^n |Y|^n exceeds kMaxJointSequences.
  void validate() const;
};

enum class OrderMode { exhaustive, greedy };
enum class HelperMode { exhaustive, random_restart };

/// Message index per y-sequence index.
struct Helper {
  std::vector<std::uint32_t> table;
};

/// Reconstruction-sequence indices in guessing order, one list per message.
/// Messages of probability zero get an empty list.
struct GuessOrder {
  std::vector<std::vector<std::uint32_t>> per_message;
};

struct OrderResult {
  double moment = 0.0;
  std::vector<std::uint32_t> order;
  bool exact = true;
};

struct OracleResult {
  double moment = 1.0;
  double normalized_exponent = 0.0;  // log2(moment) / n
  Helper best_helper;
  GuessOrder best_orders;
  bool exact = true;
};

struct OracleOptions {
  HelperMode helper_mode = HelperMode::exhaustive;
  OrderMode order_mode = OrderMode::exhaustive;
  std::uint64_t seed = 0;
  /// Random-restart mode only.
  int restarts = 16;
  long long max_evaluations = 4000;
  int threads = 0;
};

std::uint64_t sequence_count(std::size_t alphabet_size, int n);
/// Symbols of sequence `index`, first symbol first.
std::vector<std::size_t> sequence_symbols(std::uint64_t index, std::size_t alphabet_size, int n);

/// (1/n) sum_i d(x_i, xhat_i) <= D + 1e-12. Throws StructuralError when a
/// length differs from n.
bool covers(std::span<const std::size_t> x_seq, std::span<const std::size_t> xhat_seq, const DistortionSpec& spec,
            int n);

/// Minimizes sum_x posterior(x) * (position of the first covering guess)^rho.
/// `posterior` is indexed by source sequence and may be unnormalized; the
/// moment is returned on the same scale. Exhaustive mode throws
/// SizeCapError when |Xhat|^n > 8. Ties go to the lexicographically
/// smallest order.
OrderResult optimal_order_moment(std::span<const double> posterior, const DistortionSpec& spec, int n, double rho,
                                 OrderMode mode = OrderMode::exhaustive);

/// min over helpers of E[G^rho]. Helpers that differ only by a relabeling of
/// messages are evaluated once, through the representative with the smallest
/// table index. The exhaustive cap applies to the number of such
/// representatives. The argmin is keyed by (moment, table index).
OracleResult best_helper_moment(const FiniteNInstance& instance, const OracleOptions& opts = {});
/// Single-threaded reference; same result bit for bit.
OracleResult best_helper_moment_serial(const FiniteNInstance& instance, const OracleOptions& opts = {});

struct ReverseWyner {
  double lhs = 0.0;  // E[log2 f(X)] under the descending-probability order
  double rhs = 0.0;  // H(X) - log2(ln|X| + 3/2)
  bool holds = true;
};

ReverseWyner reverse_wyner_check(const Pmf& p);

/// floor(2^{nR}), at least 1, saturating at 2^63.
std::uint64_t message_budget(double rate, int n);

struct TrendRow {
  int n = 0;
  std::uint64_t messages = 1;
  double normalized_exponent = 0.0;
  bool exact = true;
};

struct TrendReport {
  std::vector<TrendRow> rows;
  double exponent = 0.0;  // compute_exponent at the same spec
};

/// One oracle run per n with M = message_budget(R, n). Exhaustive helper and
/// order searches are used where they fit the caps, random-restart and
/// greedy otherwise.
TrendReport exponent_trend_report(const ProblemSpec& spec, const std::vector<int>& n_list,
                                  const OracleOptions& oracle_opts = {}, const SolverOptions& solver_opts = {});

}  // namespace sideguess
