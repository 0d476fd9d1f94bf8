#include "sideguess/prob.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace sideguess {

namespace {

std::vector<double> validated(std::vector<double> probs, std::size_t expected_size, const char* what) {
  if (probs.size() != expected_size) {
    std::ostringstream msg;
    msg << what << ": expected " << expected_size << " entries, got " << probs.size();
    throw StructuralError(msg.str());
  }
  if (probs.empty()) throw StructuralError(std::string(what) + ": empty");
  double sum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    double& v = probs[i];
    if (!std::isfinite(v)) {
      throw DomainError(std::string(what) + ": non-finite entry at index " + std::to_string(i));
    }
    if (v < 0.0) {
      if (v < -kClampFloor) {
        throw DomainError(std::string(what) + ": negative entry at index " + std::to_string(i));
      }
      v = 0.0;
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > kPmfTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << what << ": entries sum to " << sum << ", not 1";
    throw StructuralError(msg.str());
  }
  for (double& v : probs) v /= sum;
  return probs;
}

// x log2(x / y) with the 0 log(0/.) = 0 convention.
inline double plogq(double x, double y) noexcept {
  if (x <= 0.0) return 0.0;
  if (y <= 0.0) return kInfinity;
  return x * std::log2(x / y);
}

}  // namespace

Alphabet::Alphabet(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {
  if (symbols_.empty()) throw StructuralError("alphabet must contain at least one symbol");
  std::set<std::string> seen;
  for (const auto& s : symbols_) {
    if (!seen.insert(s).second) throw StructuralError("duplicate alphabet symbol '" + s + "'");
  }
}

Alphabet Alphabet::indexed(std::size_t n) {
  std::vector<std::string> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = std::to_string(i);
  return Alphabet(std::move(labels));
}

std::size_t Alphabet::index_of(const std::string& label) const {
  auto it = std::find(symbols_.begin(), symbols_.end(), label);
  if (it == symbols_.end()) throw StructuralError("unknown symbol '" + label + "'");
  return static_cast<std::size_t>(it - symbols_.begin());
}

Pmf::Pmf(Alphabet alphabet, std::vector<double> probs)
    : alphabet_(std::move(alphabet)), probs_(validated(std::move(probs), alphabet_.size(), "pmf")) {}

Pmf::Pmf(std::vector<double> probs) : alphabet_(Alphabet::indexed(probs.size())) {
  probs_ = validated(std::move(probs), alphabet_.size(), "pmf");
}

Pmf Pmf::uniform(Alphabet alphabet) {
  const std::size_t n = alphabet.size();
  return Pmf(std::move(alphabet), std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

Pmf Pmf::point_mass(Alphabet alphabet, std::size_t index) {
  std::vector<double> p(alphabet.size(), 0.0);
  p.at(index) = 1.0;
  return Pmf(std::move(alphabet), std::move(p));
}

JointPmf::JointPmf(Alphabet rows, Alphabet cols, std::vector<double> probs)
    : rows_(std::move(rows)), cols_(std::move(cols)),
      probs_(validated(std::move(probs), rows_.size() * cols_.size(), "joint pmf")) {}

Pmf JointPmf::row_marginal() const {
  std::vector<double> m(rows(), 0.0);
  for (std::size_t r = 0; r < rows(); ++r)
    for (std::size_t c = 0; c < cols(); ++c) m[r] += at(r, c);
  return Pmf(rows_, std::move(m));
}

Pmf JointPmf::col_marginal() const {
  std::vector<double> m(cols(), 0.0);
  for (std::size_t r = 0; r < rows(); ++r)
    for (std::size_t c = 0; c < cols(); ++c) m[c] += at(r, c);
  return Pmf(cols_, std::move(m));
}

JointPmf JointPmf::transposed() const {
  std::vector<double> t(probs_.size());
  for (std::size_t r = 0; r < rows(); ++r)
    for (std::size_t c = 0; c < cols(); ++c) t[c * rows() + r] = at(r, c);
  return JointPmf(cols_, rows_, std::move(t));
}

CondPmf::CondPmf(Alphabet given, Alphabet target, std::vector<double> rows)
    : given_(std::move(given)), target_(std::move(target)) {
  if (rows.size() != given_.size() * target_.size()) {
    throw StructuralError("conditional pmf: expected " + std::to_string(given_.size() * target_.size()) +
                          " entries, got " + std::to_string(rows.size()));
  }
  rows_.reserve(rows.size());
  for (std::size_t w = 0; w < given_.size(); ++w) {
    std::vector<double> row(rows.begin() + static_cast<std::ptrdiff_t>(w * target_.size()),
                            rows.begin() + static_cast<std::ptrdiff_t>((w + 1) * target_.size()));
    try {
      row = validated(std::move(row), target_.size(), "conditional pmf row");
    } catch (const std::exception& e) {
      throw StructuralError("row " + std::to_string(w) + ": " + e.what());
    }
    rows_.insert(rows_.end(), row.begin(), row.end());
  }
}

CondPmf CondPmf::identity(const Alphabet& alphabet) {
  const std::size_t n = alphabet.size();
  std::vector<double> rows(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) rows[i * n + i] = 1.0;
  return CondPmf(alphabet, alphabet, std::move(rows));
}

double entropy(const Pmf& p) { return kernel::entropy_bits(p.probs()); }

double renyi_entropy(const Pmf& p, double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw DomainError("renyi order must be positive and finite");
  }
  if (alpha == 1.0) return entropy(p);
  double s = 0.0;
  for (double v : p.probs())
    if (v > 0.0) s += std::pow(v, alpha);
  return std::log2(s) / (1.0 - alpha);
}

double kl_divergence(const Pmf& q, const Pmf& p) {
  if (!(q.alphabet() == p.alphabet())) throw StructuralError("kl_divergence: alphabet mismatch");
  return kernel::kl_bits(q.probs(), p.probs());
}

double joint_kl(const JointPmf& q, const JointPmf& p) {
  if (!(q.row_alphabet() == p.row_alphabet()) || !(q.col_alphabet() == p.col_alphabet())) {
    throw StructuralError("joint_kl: alphabet mismatch");
  }
  return kernel::kl_bits(q.probs(), p.probs());
}

double mutual_information(const JointPmf& j) {
  return kernel::mutual_information_bits(j.probs(), j.rows(), j.cols());
}

double conditional_mutual_information(const Pmf& q_u, std::span<const JointPmf> per_u_joints) {
  if (per_u_joints.size() != q_u.size()) {
    throw StructuralError("conditional_mutual_information: need one joint per u symbol");
  }
  double total = 0.0;
  for (std::size_t u = 0; u < q_u.size(); ++u) {
    if (q_u[u] > 0.0) total += q_u[u] * mutual_information(per_u_joints[u]);
  }
  return total;
}

JointPmf compose(const Pmf& p, const CondPmf& k) {
  if (!(p.alphabet() == k.given_alphabet())) throw StructuralError("compose: alphabet mismatch");
  std::vector<double> j(k.given_size() * k.target_size());
  for (std::size_t w = 0; w < k.given_size(); ++w)
    for (std::size_t v = 0; v < k.target_size(); ++v) j[w * k.target_size() + v] = p[w] * k.at(w, v);
  return JointPmf(k.given_alphabet(), k.target_alphabet(), std::move(j));
}

Pmf marginalize(const JointPmf& j, int axis) {
  if (axis == 0) return j.row_marginal();
  if (axis == 1) return j.col_marginal();
  throw StructuralError("marginalize: axis must be 0 or 1");
}

Pmf condition(const JointPmf& j, std::size_t r) {
  if (r >= j.rows()) throw StructuralError("condition: row index out of range");
  std::vector<double> row(j.cols());
  double mass = 0.0;
  for (std::size_t c = 0; c < j.cols(); ++c) {
    row[c] = j.at(r, c);
    mass += row[c];
  }
  if (mass <= 0.0) {
    throw UndefinedConditional("condition: row '" + j.row_alphabet().symbol(r) + "' has zero probability");
  }
  for (double& v : row) v /= mass;
  return Pmf(j.col_alphabet(), std::move(row));
}

CondPmf condition(const JointPmf& j) {
  std::vector<double> rows;
  rows.reserve(j.rows() * j.cols());
  for (std::size_t r = 0; r < j.rows(); ++r) {
    const Pmf row = condition(j, r);
    rows.insert(rows.end(), row.probs().begin(), row.probs().end());
  }
  return CondPmf(j.row_alphabet(), j.col_alphabet(), std::move(rows));
}

JointPmf product(const Pmf& rows, const Pmf& cols) {
  std::vector<double> j(rows.size() * cols.size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c) j[r * cols.size() + c] = rows[r] * cols[c];
  return JointPmf(rows.alphabet(), cols.alphabet(), std::move(j));
}

namespace kernel {

double entropy_bits(std::span<const double> p) noexcept {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log2(v);
  return std::max(h, 0.0);
}

double kl_bits(std::span<const double> q, std::span<const double> p) noexcept {
  double d = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double t = plogq(q[i], p[i]);
    if (t == kInfinity) return kInfinity;
    d += t;
  }
  return std::max(d, 0.0);
}

double mutual_information_bits(std::span<const double> joint, std::size_t rows, std::size_t cols) noexcept {
  // I = sum j log(j / (r c)), accumulated against the product of marginals.
  double row_m[64];
  double col_m[64];
  std::vector<double> heap_r, heap_c;
  double* rm = row_m;
  double* cm = col_m;
  if (rows > 64 || cols > 64) {
    heap_r.assign(rows, 0.0);
    heap_c.assign(cols, 0.0);
    rm = heap_r.data();
    cm = heap_c.data();
  } else {
    std::fill_n(rm, rows, 0.0);
    std::fill_n(cm, cols, 0.0);
  }
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      rm[r] += joint[r * cols + c];
      cm[c] += joint[r * cols + c];
    }
  double mi = 0.0;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) mi += plogq(joint[r * cols + c], rm[r] * cm[c]);
  return std::max(mi, 0.0);
}

double normalize(std::span<double> p) noexcept {
  double s = 0.0;
  for (double& v : p) {
    if (v < 0.0) v = 0.0;
    s += v;
  }
  if (s > 0.0)
    for (double& v : p) v /= s;
  return s;
}

void project_to_simplex(std::span<double> p) {
  // Sort-based projection (Held, Wolfe and Crowder).
  std::vector<double> s(p.begin(), p.end());
  std::sort(s.begin(), s.end(), std::greater<>());
  double cum = 0.0;
  double theta = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    cum += s[k];
    const double t = (cum - 1.0) / static_cast<double>(k + 1);
    if (s[k] - t > 0.0) theta = t;
  }
  for (double& v : p) v = std::max(v - theta, 0.0);
  normalize(p);
}

}  // namespace kernel

}  // namespace sideguess
