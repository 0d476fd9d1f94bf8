#include "sideguess/finite_n.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "sideguess/simplex.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sideguess {

namespace {

constexpr std::uint64_t kMaxCoverEntries = 50'000'000;  // |Xhat|^n |X|^n for greedy ordering

std::uint64_t checked_power(std::size_t base, int n, std::uint64_t cap) {
  std::uint64_t v = 1;
  for (int i = 0; i < n; ++i) {
    if (v > cap / std::max<std::size_t>(base, 1)) return cap + 1;
    v *= base;
  }
  return v;
}

int thread_count(const OracleOptions& opts) {
#ifdef _OPENMP
  return opts.threads > 0 ? opts.threads : omp_get_max_threads();
#else
  (void)opts;
  return 1;
#endif
}

// Everything about one (distortion, n) pair that the order search needs.
class Coverage {
 public:
  Coverage(const DistortionSpec& spec, int n, OrderMode mode) : mode_(mode) {
    nx_ = checked_power(spec.source_size(), n, kMaxJointSequences);
    if (nx_ > kMaxJointSequences)
      throw SizeCapError("source sequences exceed the cap of " + std::to_string(kMaxJointSequences));
    const std::uint64_t cap = mode == OrderMode::exhaustive ? kMaxExhaustiveCandidates : kMaxCoverEntries;
    k_ = checked_power(spec.reconstruction_size(), n, cap);
    if (mode == OrderMode::exhaustive && k_ > kMaxExhaustiveCandidates)
      throw SizeCapError("exhaustive ordering needs |Xhat|^n <= " + std::to_string(kMaxExhaustiveCandidates));
    if (mode == OrderMode::greedy && (k_ > cap || k_ * nx_ > cap))
      throw SizeCapError("greedy ordering needs |Xhat|^n |X|^n <= " + std::to_string(kMaxCoverEntries));

    const double limit = n * (spec.budget() + kCoverSlack);
    const std::size_t ax = spec.source_size(), ah = spec.reconstruction_size();
    std::vector<std::size_t> hs(n);
    if (mode == OrderMode::exhaustive) sig_.assign(nx_, 0);
    else lists_.resize(k_);
    for (std::uint64_t c = 0; c < k_; ++c) {
      hs = sequence_symbols(c, ah, n);
      for (std::uint64_t x = 0; x < nx_; ++x) {
        std::uint64_t r = x;
        double d = 0.0;
        for (int i = n - 1; i >= 0; --i) {
          d += spec(r % ax, hs[i]);
          r /= ax;
        }
        if (d > limit) continue;
        if (mode == OrderMode::exhaustive) sig_[x] |= static_cast<std::uint8_t>(1u << c);
        else lists_[c].push_back(static_cast<std::uint32_t>(x));
      }
    }
  }

  [[nodiscard]] std::uint64_t sources() const noexcept { return nx_; }
  [[nodiscard]] std::uint64_t candidates() const noexcept { return k_; }

  OrderResult solve(std::span<const double> w, double rho) const {
    return mode_ == OrderMode::exhaustive ? subset_dp(w, rho) : greedy(w, rho);
  }

 private:
  // The cost of the next guess depends on the guesses already placed only
  // through their set, so a DP over subsets of candidates is exact.
  OrderResult subset_dp(std::span<const double> w, double rho) const {
    const unsigned k = static_cast<unsigned>(k_);
    const unsigned full = (1u << k) - 1;
    double by_sig[256] = {};
    for (std::uint64_t x = 0; x < nx_; ++x) by_sig[sig_[x]] += w[x];
    // z[T] = mass of signatures contained in T, so z[full ^ S] is the mass
    // that no member of S covers.
    double z[256];
    std::copy(by_sig, by_sig + 256, z);
    for (unsigned b = 0; b < k; ++b)
      for (unsigned t = 0; t <= full; ++t)
        if (t & (1u << b)) z[t] += z[t ^ (1u << b)];

    double tail[256];
    unsigned choice[256] = {};
    tail[full] = 0.0;
    for (unsigned s = full; s-- > 0;) {
      const double pw = std::pow(static_cast<double>(std::popcount(s) + 1), rho);
      const double left = z[full ^ s];
      double best = kInfinity;
      for (unsigned c = 0; c < k; ++c) {
        if (s & (1u << c)) continue;
        const unsigned t = s | (1u << c);
        const double v = pw * (left - z[full ^ t]) + tail[t];
        if (v < best) {
          best = v;
          choice[s] = c;
        }
      }
      tail[s] = best;
    }
    OrderResult out;
    out.moment = tail[0];
    for (unsigned s = 0; s != full; s |= 1u << choice[s]) out.order.push_back(choice[s]);
    return out;
  }

  OrderResult greedy(std::span<const double> w, double rho) const {
    std::vector<char> covered(nx_, 0), used(k_, 0);
    std::uint64_t pending = 0;
    for (std::uint64_t x = 0; x < nx_; ++x) pending += w[x] > 0.0;
    OrderResult out;
    out.exact = false;
    while (pending > 0) {
      std::uint64_t pick = k_;
      double gain = -1.0;
      for (std::uint64_t c = 0; c < k_; ++c) {
        if (used[c]) continue;
        double g = 0.0;
        for (auto x : lists_[c])
          if (!covered[x]) g += w[x];
        if (g > gain) {
          gain = g;
          pick = c;
        }
      }
      if (pick == k_) break;
      used[pick] = 1;
      out.order.push_back(static_cast<std::uint32_t>(pick));
      out.moment += std::pow(static_cast<double>(out.order.size()), rho) * gain;
      for (auto x : lists_[pick]) {
        if (covered[x]) continue;
        covered[x] = 1;
        pending -= w[x] > 0.0;
      }
    }
    for (std::uint64_t c = 0; c < k_; ++c)
      if (!used[c]) out.order.push_back(static_cast<std::uint32_t>(c));
    return out;
  }

  OrderMode mode_;
  std::uint64_t nx_ = 0, k_ = 0;
  std::vector<std::uint8_t> sig_;
  std::vector<std::vector<std::uint32_t>> lists_;
};

// P(x^n, y^n), x-major.
std::vector<double> product_joint(const JointPmf& p, int n, std::uint64_t nxs, std::uint64_t nys) {
  std::vector<double> out(nxs * nys);
  const std::size_t ax = p.rows(), ay = p.cols();
  for (std::uint64_t x = 0; x < nxs; ++x)
    for (std::uint64_t y = 0; y < nys; ++y) {
      std::uint64_t rx = x, ry = y;
      double v = 1.0;
      for (int i = 0; i < n; ++i) {
        v *= p.at(rx % ax, ry % ay);
        rx /= ax;
        ry /= ay;
      }
      out[x * nys + y] = v;
    }
  return out;
}

// Sum_{k <= labels} S(m, k), in floating point so overflow saturates.
double partition_count(std::uint64_t m, std::uint64_t labels) {
  std::vector<double> s(labels + 1, 0.0);
  s[0] = 1.0;
  for (std::uint64_t i = 1; i <= m; ++i)
    for (std::uint64_t k = std::min(i, labels); k >= 1; --k) s[k] = k * s[k] + s[k - 1];
  s[0] = 0.0;
  return std::accumulate(s.begin(), s.end(), 0.0);
}

// Tables in restricted-growth form (first uses of labels appear as 0, 1, 2,
// ...), in increasing table-index order.
std::vector<std::vector<std::uint32_t>> canonical_tables(std::uint64_t m, std::uint32_t labels) {
  std::vector<std::vector<std::uint32_t>> out;
  std::vector<std::uint32_t> t(m, 0);
  auto rec = [&](auto&& self, std::uint64_t i, std::uint32_t used) -> void {
    if (i == m) {
      out.push_back(t);
      return;
    }
    for (std::uint32_t v = 0; v <= std::min(used, labels - 1); ++v) {
      t[i] = v;
      self(self, i + 1, std::max(used, v + 1));
    }
  };
  if (m > 0) {
    t[0] = 0;
    rec(rec, 1, 1);
  }
  return out;
}

class HelperEvaluator {
 public:
  HelperEvaluator(const FiniteNInstance& inst, OrderMode mode)
      : cov_(inst.spec.distortion(), inst.n, mode), rho_(inst.spec.rho()) {
    nxs_ = cov_.sources();
    nys_ = sequence_count(inst.spec.ny(), inst.n);
    joint_ = product_joint(inst.spec.p_xy(), inst.n, nxs_, nys_);
    labels_ = static_cast<std::uint32_t>(std::min<std::uint64_t>(inst.message_count, nys_));
  }

  [[nodiscard]] std::uint64_t y_sequences() const noexcept { return nys_; }
  [[nodiscard]] std::uint32_t labels() const noexcept { return labels_; }

  double moment(std::span<const std::uint32_t> table, std::vector<double>& buf,
                std::vector<OrderResult>* orders = nullptr) const {
    buf.assign(labels_ * nxs_, 0.0);
    for (std::uint64_t x = 0; x < nxs_; ++x) {
      const double* row = &joint_[x * nys_];
      for (std::uint64_t y = 0; y < nys_; ++y) buf[table[y] * nxs_ + x] += row[y];
    }
    double total = 0.0;
    if (orders) orders->assign(labels_, {});
    for (std::uint32_t m = 0; m < labels_; ++m) {
      std::span<const double> w(&buf[m * nxs_], nxs_);
      if (std::all_of(w.begin(), w.end(), [](double v) { return v <= 0.0; })) continue;
      OrderResult r = cov_.solve(w, rho_);
      total += r.moment;
      if (orders) (*orders)[m] = std::move(r);
    }
    return total;
  }

 private:
  Coverage cov_;
  double rho_;
  std::uint64_t nxs_ = 0, nys_ = 0;
  std::uint32_t labels_ = 1;
  std::vector<double> joint_;
};

struct Candidate {
  double moment = kInfinity;
  std::uint64_t key = std::numeric_limits<std::uint64_t>::max();
  std::vector<std::uint32_t> table;

  [[nodiscard]] bool beats(const Candidate& o) const {
    return moment < o.moment || (moment == o.moment && key < o.key);
  }
};

Candidate local_search(const HelperEvaluator& ev, std::uint64_t seed, int restart, long long budget) {
  auto rng = make_rng(seed, static_cast<std::uint64_t>(restart));
  std::vector<double> buf;
  Candidate c;
  c.key = static_cast<std::uint64_t>(restart);
  c.table.resize(ev.y_sequences());
  for (auto& v : c.table) v = static_cast<std::uint32_t>(rng() % ev.labels());
  c.moment = ev.moment(c.table, buf);
  long long used = 1;
  bool improved = true;
  while (improved && used < budget) {
    improved = false;
    for (std::uint64_t y = 0; y < c.table.size() && used < budget; ++y) {
      const std::uint32_t keep = c.table[y];
      for (std::uint32_t m = 0; m < ev.labels() && used < budget; ++m) {
        if (m == keep) continue;
        c.table[y] = m;
        const double v = ev.moment(c.table, buf);
        ++used;
        if (v < c.moment) {
          c.moment = v;
          improved = true;
          break;
        }
        c.table[y] = keep;
      }
    }
  }
  return c;
}

OracleResult run_oracle(const FiniteNInstance& inst, const OracleOptions& opts, bool parallel) {
  inst.validate();
  const HelperEvaluator ev(inst, opts.order_mode);
  Candidate best;
  const int threads = parallel ? thread_count(opts) : 1;

  if (opts.helper_mode == HelperMode::exhaustive) {
    const double count = partition_count(ev.y_sequences(), ev.labels());
    if (count > static_cast<double>(kMaxHelperTables))
      throw SizeCapError("exhaustive helper search needs at most " + std::to_string(kMaxHelperTables) +
                         " distinct helper tables");
    const auto tables = canonical_tables(ev.y_sequences(), ev.labels());
    const long long total = static_cast<long long>(tables.size());
    if (parallel) {
#pragma omp parallel num_threads(threads)
      {
        Candidate local;
        std::vector<double> buf;
#pragma omp for schedule(dynamic, 16)
        for (long long i = 0; i < total; ++i) {
          Candidate c{ev.moment(tables[i], buf), static_cast<std::uint64_t>(i), {}};
          if (c.beats(local)) local = std::move(c);
        }
#pragma omp critical
        if (local.beats(best)) best = std::move(local);
      }
    } else {
      std::vector<double> buf;
      for (long long i = 0; i < total; ++i) {
        Candidate c{ev.moment(tables[i], buf), static_cast<std::uint64_t>(i), {}};
        if (c.beats(best)) best = std::move(c);
      }
    }
    best.table = tables[best.key];
  } else {
    const int restarts = std::max(opts.restarts, 1);
    const long long budget = std::max<long long>(opts.max_evaluations / restarts, 1);
    std::vector<Candidate> found(restarts);
    if (parallel) {
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
      for (int r = 0; r < restarts; ++r) found[r] = local_search(ev, opts.seed, r, budget);
    } else {
      for (int r = 0; r < restarts; ++r) found[r] = local_search(ev, opts.seed, r, budget);
    }
    for (auto& c : found)
      if (c.beats(best)) best = std::move(c);
  }

  OracleResult out;
  std::vector<double> buf;
  std::vector<OrderResult> orders;
  out.moment = ev.moment(best.table, buf, &orders);
  // A moment of one up to summation round-off is a single guess.
  out.normalized_exponent = out.moment <= 1.0 + 1e-12 ? 0.0 : std::log2(out.moment) / inst.n;
  out.best_helper.table = std::move(best.table);
  for (auto& o : orders) out.best_orders.per_message.push_back(std::move(o.order));
  out.exact = opts.helper_mode == HelperMode::exhaustive && opts.order_mode == OrderMode::exhaustive;
  return out;
}

}  // namespace

void FiniteNInstance::validate() const {
  if (n < 1) throw StructuralError("blocklength must be at least 1");
  if (message_count < 1) throw StructuralError("message count must be at least 1");
  const std::uint64_t xs = checked_power(spec.nx(), n, kMaxJointSequences);
  const std::uint64_t ys = checked_power(spec.ny(), n, kMaxJointSequences);
  if (xs > kMaxJointSequences || ys > kMaxJointSequences || xs * ys > kMaxJointSequences)
    throw SizeCapError("|X|^n |Y|^n must be at most " + std::to_string(kMaxJointSequences));
}

std::uint64_t sequence_count(std::size_t alphabet_size, int n) {
  return checked_power(alphabet_size, n, std::numeric_limits<std::uint64_t>::max() / 2);
}

std::vector<std::size_t> sequence_symbols(std::uint64_t index, std::size_t alphabet_size, int n) {
  std::vector<std::size_t> s(n);
  for (int i = n - 1; i >= 0; --i) {
    s[i] = index % alphabet_size;
    index /= alphabet_size;
  }
  return s;
}

bool covers(std::span<const std::size_t> x_seq, std::span<const std::size_t> xhat_seq, const DistortionSpec& spec,
            int n) {
  if (n < 1 || x_seq.size() != static_cast<std::size_t>(n) || xhat_seq.size() != static_cast<std::size_t>(n))
    throw StructuralError("sequence length does not match n");
  double d = 0.0;
  for (int i = 0; i < n; ++i) {
    if (x_seq[i] >= spec.source_size() || xhat_seq[i] >= spec.reconstruction_size())
      throw StructuralError("symbol outside the alphabet");
    d += spec(x_seq[i], xhat_seq[i]);
  }
  return d / n <= spec.budget() + kCoverSlack;
}

OrderResult optimal_order_moment(std::span<const double> posterior, const DistortionSpec& spec, int n, double rho,
                                 OrderMode mode) {
  if (!(rho > 0.0)) throw DomainError("rho must be positive");
  const Coverage cov(spec, n, mode);
  if (posterior.size() != cov.sources()) throw StructuralError("posterior length must be |X|^n");
  return cov.solve(posterior, rho);
}

OracleResult best_helper_moment(const FiniteNInstance& instance, const OracleOptions& opts) {
  return run_oracle(instance, opts, true);
}

OracleResult best_helper_moment_serial(const FiniteNInstance& instance, const OracleOptions& opts) {
  return run_oracle(instance, opts, false);
}

ReverseWyner reverse_wyner_check(const Pmf& p) {
  std::vector<std::size_t> idx(p.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
  ReverseWyner out;
  for (std::size_t r = 0; r < idx.size(); ++r) out.lhs += p[idx[r]] * std::log2(static_cast<double>(r + 1));
  out.rhs = entropy(p) - std::log2(std::log(static_cast<double>(p.size())) + 1.5);
  out.holds = out.lhs >= out.rhs;
  return out;
}

std::uint64_t message_budget(double rate, int n) {
  const double bits = rate * n;
  if (!(bits > 0.0)) return 1;
  if (bits >= 63.0) return std::uint64_t{1} << 63;
  // nR that is an integer up to rounding keeps its full message count.
  const double m = std::floor(std::exp2(bits) * (1.0 + 1e-12));
  return std::max<std::uint64_t>(static_cast<std::uint64_t>(m), 1);
}

TrendReport exponent_trend_report(const ProblemSpec& spec, const std::vector<int>& n_list,
                                  const OracleOptions& oracle_opts, const SolverOptions& solver_opts) {
  TrendReport out;
  for (int n : n_list) {
    FiniteNInstance inst{spec, n, message_budget(spec.rate(), n)};
    inst.validate();
    OracleOptions o = oracle_opts;
    const std::uint64_t k = checked_power(spec.nxh(), n, kMaxExhaustiveCandidates);
    o.order_mode = k <= kMaxExhaustiveCandidates ? OrderMode::exhaustive : OrderMode::greedy;
    const std::uint64_t ys = sequence_count(spec.ny(), n);
    const double tables = partition_count(ys, std::min<std::uint64_t>(inst.message_count, ys));
    o.helper_mode = tables <= static_cast<double>(kMaxHelperTables) ? HelperMode::exhaustive
                                                                     : HelperMode::random_restart;
    const OracleResult r = best_helper_moment(inst, o);
    out.rows.push_back({n, inst.message_count, r.normalized_exponent, r.exact});
  }
  out.exponent = compute_exponent(spec, solver_opts).value;
  return out;
}

}  // namespace sideguess
