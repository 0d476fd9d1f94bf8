#pragma once

// Discrete probability kernel: alphabets, PMFs, joint and conditional PMFs,
// and the information measures built on them. All logarithms are base 2.

#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sideguess {

/// Shapes or alphabets that do not fit together.
struct StructuralError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A parameter outside its admissible range (e.g. a nonpositive Renyi order).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Conditioning on an event of probability zero.
struct UndefinedConditional : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Values in [-kClampFloor, 0) are treated as round-off and set to zero.
inline constexpr double kClampFloor = 1e-14;
/// Sum-to-one tolerance accepted before renormalization.
inline constexpr double kPmfTolerance = 1e-12;

/// Ordered set of distinct symbol labels. Index i <-> symbols()[i].
class Alphabet {
 public:
  Alphabet() = default;
  explicit Alphabet(std::vector<std::string> symbols);

  /// Labels "0", "1", ..., "n-1".
  static Alphabet indexed(std::size_t n);

  [[nodiscard]] std::size_t size() const noexcept { return symbols_.size(); }
  [[nodiscard]] const std::string& symbol(std::size_t i) const { return symbols_.at(i); }
  [[nodiscard]] const std::vector<std::string>& symbols() const noexcept { return symbols_; }
  /// Throws StructuralError for an unknown label.
  [[nodiscard]] std::size_t index_of(const std::string& label) const;

  friend bool operator==(const Alphabet&, const Alphabet&) = default;

 private:
  std::vector<std::string> symbols_;
};

class Pmf {
 public:
  Pmf() = default;
  /// Validates, clamps round-off negatives and renormalizes. Throws
  /// StructuralError on length mismatch or a sum off by more than 1e-12, and
  /// DomainError on a clearly negative entry.
  Pmf(Alphabet alphabet, std::vector<double> probs);
  /// Same as above with an indexed alphabet.
  explicit Pmf(std::vector<double> probs);

  static Pmf uniform(Alphabet alphabet);
  static Pmf point_mass(Alphabet alphabet, std::size_t index);

  [[nodiscard]] const Alphabet& alphabet() const noexcept { return alphabet_; }
  [[nodiscard]] std::size_t size() const noexcept { return probs_.size(); }
  [[nodiscard]] std::span<const double> probs() const noexcept { return probs_; }
  [[nodiscard]] double operator[](std::size_t i) const { return probs_[i]; }

  friend bool operator==(const Pmf&, const Pmf&) = default;

 private:
  Alphabet alphabet_;
  std::vector<double> probs_;
};

/// Joint PMF stored row-major: at(r, c) = P(row = r, col = c).
class JointPmf {
 public:
  JointPmf() = default;
  JointPmf(Alphabet rows, Alphabet cols, std::vector<double> probs);

  [[nodiscard]] const Alphabet& row_alphabet() const noexcept { return rows_; }
  [[nodiscard]] const Alphabet& col_alphabet() const noexcept { return cols_; }
  [[nodiscard]] std::size_t rows() const noexcept { return rows_.size(); }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_.size(); }
  [[nodiscard]] double at(std::size_t r, std::size_t c) const { return probs_[r * cols() + c]; }
  [[nodiscard]] std::span<const double> probs() const noexcept { return probs_; }

  [[nodiscard]] Pmf row_marginal() const;
  [[nodiscard]] Pmf col_marginal() const;
  [[nodiscard]] JointPmf transposed() const;

  friend bool operator==(const JointPmf&, const JointPmf&) = default;

 private:
  Alphabet rows_, cols_;
  std::vector<double> probs_;
};

/// Row-stochastic matrix: row(w) is a PMF over the target alphabet.
class CondPmf {
 public:
  CondPmf() = default;
  CondPmf(Alphabet given, Alphabet target, std::vector<double> rows);

  static CondPmf identity(const Alphabet& alphabet);

  [[nodiscard]] const Alphabet& given_alphabet() const noexcept { return given_; }
  [[nodiscard]] const Alphabet& target_alphabet() const noexcept { return target_; }
  [[nodiscard]] std::size_t given_size() const noexcept { return given_.size(); }
  [[nodiscard]] std::size_t target_size() const noexcept { return target_.size(); }
  [[nodiscard]] double at(std::size_t w, std::size_t v) const { return rows_[w * target_size() + v]; }
  [[nodiscard]] std::span<const double> row(std::size_t w) const {
    return std::span<const double>(rows_).subspan(w * target_size(), target_size());
  }
  [[nodiscard]] std::span<const double> data() const noexcept { return rows_; }

  friend bool operator==(const CondPmf&, const CondPmf&) = default;

 private:
  Alphabet given_, target_;
  std::vector<double> rows_;
};

// Information measures (bits).

double entropy(const Pmf& p);
/// Throws DomainError for alpha <= 0. alpha == 1 is the Shannon entropy.
double renyi_entropy(const Pmf& p, double alpha);
/// +infinity exactly when q puts mass where p has none.
double kl_divergence(const Pmf& q, const Pmf& p);
double joint_kl(const JointPmf& q, const JointPmf& p);
double mutual_information(const JointPmf& j);
/// sum_u q_u(u) * I(per_u_joints[u]).
double conditional_mutual_information(const Pmf& q_u, std::span<const JointPmf> per_u_joints);

// Plumbing.

/// compose(p, k)(w, v) = p(w) k(v | w).
JointPmf compose(const Pmf& p, const CondPmf& k);
/// Row marginal (axis 0) or column marginal (axis 1).
Pmf marginalize(const JointPmf& j, int axis);
/// Distribution of the column given row == r. Throws UndefinedConditional
/// when the row has zero mass.
Pmf condition(const JointPmf& j, std::size_t r);
/// All rows conditioned; throws UndefinedConditional on any zero-mass row.
CondPmf condition(const JointPmf& j);
/// Product of marginals.
JointPmf product(const Pmf& rows, const Pmf& cols);

/// Span-level kernels shared by the solvers' hot loops. Inputs are assumed
/// valid; no allocation.
namespace kernel {

double entropy_bits(std::span<const double> p) noexcept;
double kl_bits(std::span<const double> q, std::span<const double> p) noexcept;
/// Mutual information of a row-major rows x cols joint.
double mutual_information_bits(std::span<const double> joint, std::size_t rows, std::size_t cols) noexcept;
/// Clamp round-off and rescale to unit sum in place. Returns the pre-scaling sum.
double normalize(std::span<double> p) noexcept;
/// Euclidean projection onto the probability simplex, in place.
void project_to_simplex(std::span<double> p);

}  // namespace kernel

}  // namespace sideguess
