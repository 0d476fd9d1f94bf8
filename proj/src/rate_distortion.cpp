#include "sideguess/rate_distortion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace sideguess {

DistortionSpec::DistortionSpec(Alphabet source, Alphabet reconstruction, std::vector<double> matrix, double budget)
    : source_(std::move(source)), recon_(std::move(reconstruction)), matrix_(std::move(matrix)), budget_(budget) {
  if (matrix_.size() != source_.size() * recon_.size()) {
    throw StructuralError("distortion matrix: expected " + std::to_string(source_.size() * recon_.size()) +
                          " entries, got " + std::to_string(matrix_.size()));
  }
  for (std::size_t x = 0; x < source_.size(); ++x) {
    for (std::size_t xh = 0; xh < recon_.size(); ++xh) {
      const double v = matrix_[x * recon_.size() + xh];
      if (!std::isfinite(v) || v < 0.0) {
        throw DomainError("distortion matrix: entry (" + std::to_string(x) + ", " + std::to_string(xh) +
                          ") must be finite and nonnegative");
      }
    }
  }
  if (!std::isfinite(budget_) || budget_ < 0.0) throw DomainError("distortion budget must be finite and >= 0");
  const double needed = coverable_budget();
  if (needed > budget_) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "distortion budget " << budget_ << " leaves a source letter uncovered (needs at least " << needed << ")";
    throw DomainError(msg.str());
  }
}

DistortionSpec DistortionSpec::hamming(const Alphabet& alphabet, double budget) {
  const std::size_t n = alphabet.size();
  std::vector<double> m(n * n, 1.0);
  for (std::size_t i = 0; i < n; ++i) m[i * n + i] = 0.0;
  return DistortionSpec(alphabet, alphabet, std::move(m), budget);
}

DistortionSpec DistortionSpec::with_budget(double budget) const {
  return DistortionSpec(source_, recon_, matrix_, budget);
}

DistortionSpec DistortionSpec::restricted_to_sources(const std::vector<std::size_t>& keep) const {
  std::vector<std::string> labels;
  std::vector<double> m;
  for (std::size_t x : keep) {
    labels.push_back(source_.symbol(x));
    for (std::size_t xh = 0; xh < recon_.size(); ++xh) m.push_back((*this)(x, xh));
  }
  return DistortionSpec(Alphabet(std::move(labels)), recon_, std::move(m), budget_);
}

double DistortionSpec::coverable_budget() const {
  double worst = 0.0;
  for (std::size_t x = 0; x < source_.size(); ++x) {
    double best = kInfinity;
    for (std::size_t xh = 0; xh < recon_.size(); ++xh) best = std::min(best, (*this)(x, xh));
    worst = std::max(worst, best);
  }
  return worst;
}

double DistortionSpec::min_positive() const {
  double m = kInfinity;
  for (double v : matrix_)
    if (v > 0.0) m = std::min(m, v);
  return std::isfinite(m) ? m : 1.0;
}

double DistortionSpec::zero_rate_distortion(std::span<const double> q_x) const {
  double best = kInfinity;
  for (std::size_t xh = 0; xh < recon_.size(); ++xh) {
    double e = 0.0;
    for (std::size_t x = 0; x < source_.size(); ++x) e += q_x[x] * (*this)(x, xh);
    best = std::min(best, e);
  }
  return best;
}

Alphabet product_alphabet(const Alphabet& outer, const Alphabet& inner) {
  std::vector<std::string> labels;
  labels.reserve(outer.size() * inner.size());
  for (const auto& a : outer.symbols())
    for (const auto& b : inner.symbols()) labels.push_back(a + "|" + b);
  return Alphabet(std::move(labels));
}

namespace {

// One conditioning cell u: source q(x | u) with weight q_u(u).
struct Cell {
  double weight = 0.0;
  std::vector<double> p_x;
  std::vector<double> q_out;   // output marginal, warm-started across slopes
  std::vector<double> kernel;  // |X| x |Xhat|
  double rate = 0.0;
  double distortion = 0.0;
};

struct Problem {
  const DistortionSpec& spec;
  const RdOptions& opts;
  std::size_t nx, nxh;
};

// Mutual information and distortion of p_x with the given kernel.
void evaluate_kernel(const Problem& pb, Cell& c) {
  const std::size_t nx = pb.nx, nxh = pb.nxh;
  std::vector<double> out(nxh, 0.0);
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t xh = 0; xh < nxh; ++xh) out[xh] += c.p_x[x] * c.kernel[x * nxh + xh];
  double rate = 0.0, dist = 0.0;
  for (std::size_t x = 0; x < nx; ++x) {
    if (c.p_x[x] <= 0.0) continue;
    for (std::size_t xh = 0; xh < nxh; ++xh) {
      const double k = c.kernel[x * nxh + xh];
      if (k <= 0.0) continue;
      rate += c.p_x[x] * k * std::log2(k / out[xh]);
      dist += c.p_x[x] * k * pb.spec(x, xh);
    }
  }
  c.rate = std::max(rate, 0.0);
  c.distortion = dist;
}

bool solve_dense(std::vector<double>& m, std::vector<double>& rhs, std::size_t n) {
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(m[r * n + col]) > std::abs(m[piv * n + col])) piv = r;
    if (!(std::abs(m[piv * n + col]) > 1e-300)) return false;
    if (piv != col) {
      for (std::size_t k = 0; k < n; ++k) std::swap(m[col * n + k], m[piv * n + k]);
      std::swap(rhs[col], rhs[piv]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = m[r * n + col] / m[col * n + col];
      for (std::size_t k = col; k < n; ++k) m[r * n + k] -= f * m[col * n + k];
      rhs[r] -= f * rhs[col];
    }
  }
  for (std::size_t r = n; r-- > 0;) {
    double acc = rhs[r];
    for (std::size_t k = r + 1; k < n; ++k) acc -= m[r * n + k] * rhs[k];
    rhs[r] = acc / m[r * n + r];
  }
  return true;
}

// Fixed slope: minimizes F(q) = -sum_x p(x) ln sum_xhat q(xhat) tilt(x, xhat)
// over the output marginal q, warm-started from c.q_out, then reads off the
// kernel q(xhat) tilt(x, xhat) / A(x). F is convex and its gradient is -c
// with c(xhat) = sum_x p(x) tilt(x, xhat) / A(x), so F(q) - min F <= max c - 1.
// Newton steps on the support of q; the Blahut-Arimoto update q <- q c is
// the fallback.
int fixed_slope(const Problem& pb, const std::vector<double>& tilt, Cell& c) {
  const std::size_t nx = pb.nx, nxh = pb.nxh;
  auto& q = c.q_out;
  kernel::normalize(q);
  std::vector<double> a(nx), grad(nxh), trial(nxh), dir(nxh), kkt, rhs;
  std::vector<std::size_t> support;
  const double gap_tol = pb.opts.rate_tolerance * std::numbers::ln2;

  auto value_at = [&](const std::vector<double>& qq) {
    double f = 0.0;
    for (std::size_t x = 0; x < nx; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < nxh; ++k) acc += qq[k] * tilt[x * nxh + k];
      a[x] = acc;
      if (c.p_x[x] > 0.0) f -= c.p_x[x] * std::log(acc);
    }
    return f;
  };

  double f = value_at(q);
  bool polished = false;
  int it = 0;
  for (; it < pb.opts.max_inner_iterations; ++it) {
    double cmax = 0.0;
    for (std::size_t k = 0; k < nxh; ++k) {
      double acc = 0.0;
      for (std::size_t x = 0; x < nx; ++x) acc += c.p_x[x] * tilt[x * nxh + k] / a[x];
      grad[k] = -acc;
      cmax = std::max(cmax, acc);
    }
    if (cmax - 1.0 < gap_tol || polished) break;

    support.clear();
    std::size_t entering = nxh;
    for (std::size_t k = 0; k < nxh; ++k) {
      if (q[k] > 0.0) support.push_back(k);
      else if (-grad[k] > 1.0 && (entering == nxh || grad[k] < grad[entering])) entering = k;
    }
    if (entering != nxh) support.push_back(entering);
    const std::size_t ns = support.size(), n = ns + 1;

    bool newton = ns > 1;
    if (newton) {
      kkt.assign(n * n, 0.0);
      rhs.assign(n, 0.0);
      double scale = 0.0;
      for (std::size_t i = 0; i < ns; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
          const std::size_t k = support[i], l = support[j];
          double h = 0.0;
          for (std::size_t x = 0; x < nx; ++x)
            h += c.p_x[x] * tilt[x * nxh + k] * tilt[x * nxh + l] / (a[x] * a[x]);
          kkt[i * n + j] = kkt[j * n + i] = h;
          scale = std::max(scale, h);
        }
      for (std::size_t i = 0; i < ns; ++i) {
        kkt[i * n + i] += 1e-12 * scale + 1e-300;
        kkt[i * n + ns] = kkt[ns * n + i] = 1.0;
        rhs[i] = -grad[support[i]];
      }
      newton = solve_dense(kkt, rhs, n);
    }

    double slope = 0.0;
    std::fill(dir.begin(), dir.end(), 0.0);
    if (newton) {
      for (std::size_t i = 0; i < ns; ++i) {
        dir[support[i]] = rhs[i];
        slope += grad[support[i]] * rhs[i];
      }
      newton = slope < 0.0 && std::isfinite(slope) && (entering == nxh || dir[entering] > 0.0);
    }

    bool moved = false;
    if (newton) {
      double t_max = kInfinity;
      std::size_t blocking = nxh;
      for (std::size_t k = 0; k < nxh; ++k)
        if (dir[k] < 0.0 && -q[k] / dir[k] < t_max) {
          t_max = -q[k] / dir[k];
          blocking = k;
        }
      double t = std::min(1.0, t_max);
      // Below the rounding floor of F the full step is taken unchecked.
      if (-slope < 1e-14 * (1.0 + std::abs(f)) && t == 1.0) {
        polished = entering == nxh;
        for (std::size_t k = 0; k < nxh; ++k) trial[k] = std::max(0.0, q[k] + dir[k]);
        kernel::normalize(trial);
        q = trial;
        f = value_at(q);
        moved = true;
      }
      for (int bt = 0; bt < 60 && !moved; ++bt, t *= 0.5) {
        for (std::size_t k = 0; k < nxh; ++k) trial[k] = std::max(0.0, q[k] + t * dir[k]);
        if (t == t_max && blocking != nxh) trial[blocking] = 0.0;
        kernel::normalize(trial);
        const double ft = value_at(trial);
        if (ft <= f + 1e-4 * t * slope) {
          q = trial;
          f = ft;
          moved = true;
        }
      }
    }
    if (!moved) {
      double step = 1.0;
      for (int bt = 0; bt < 60 && !moved; ++bt, step *= 0.5) {
        for (std::size_t k = 0; k < nxh; ++k) {
          const double base = q[k] > 0.0 ? q[k] : (-grad[k] > 1.0 ? 1e-12 : 0.0);
          trial[k] = base * std::pow(-grad[k], step);
        }
        kernel::normalize(trial);
        const double ft = value_at(trial);
        if (ft <= f) {
          q = trial;
          f = ft;
          moved = true;
        }
      }
      if (!moved) {
        value_at(q);
        break;
      }
    }
  }

  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t k = 0; k < nxh; ++k) c.kernel[x * nxh + k] = q[k] * tilt[x * nxh + k] / a[x];
  evaluate_kernel(pb, c);
  return it + 1;
}

std::vector<double> tilt_table(const DistortionSpec& spec, double slope) {
  std::vector<double> t(spec.matrix().size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::exp2(-slope * spec.matrix()[i]);
  return t;
}

struct Totals {
  double rate = 0.0, distortion = 0.0;
};

Totals totals(const std::vector<Cell>& cells) {
  Totals t;
  for (const auto& c : cells) {
    t.rate += c.weight * c.rate;
    t.distortion += c.weight * c.distortion;
  }
  return t;
}

RdResult package(const std::vector<Cell>& cells, const Alphabet& given, const DistortionSpec& spec, double slope,
                 int iterations) {
  std::vector<double> rows;
  for (const auto& c : cells) rows.insert(rows.end(), c.kernel.begin(), c.kernel.end());
  RdResult r;
  const Totals t = totals(cells);
  r.rate = t.rate;
  r.achieved_distortion = t.distortion;
  r.slope = slope;
  r.iterations = iterations;
  r.achieving_kernel = CondPmf(given, spec.reconstruction_alphabet(), std::move(rows));
  return r;
}

RdResult solve(std::vector<Cell> cells, const Alphabet& given, const DistortionSpec& spec, const RdOptions& opts) {
  const Problem pb{spec, opts, spec.source_size(), spec.reconstruction_size()};
  const double budget = spec.budget();

  // Zero-rate regime: every cell answers with its best constant.
  double zero_rate = 0.0;
  for (const auto& c : cells) zero_rate += c.weight * spec.zero_rate_distortion(c.p_x);
  if (budget >= zero_rate) {
    for (auto& c : cells) {
      std::size_t best = 0;
      double best_e = kInfinity;
      for (std::size_t xh = 0; xh < pb.nxh; ++xh) {
        double e = 0.0;
        for (std::size_t x = 0; x < pb.nx; ++x) e += c.p_x[x] * spec(x, xh);
        if (e < best_e) {
          best_e = e;
          best = xh;
        }
      }
      std::fill(c.kernel.begin(), c.kernel.end(), 0.0);
      for (std::size_t x = 0; x < pb.nx; ++x) c.kernel[x * pb.nxh + best] = 1.0;
      evaluate_kernel(pb, c);
    }
    return package(cells, given, spec, 0.0, 0);
  }

  // Lossless budget with disjoint zero-distortion sets: the reconstruction
  // determines the source letter, so the rate is H(X | U).
  if (budget == 0.0) {
    std::vector<int> owner(pb.nxh, -1);
    bool disjoint = true;
    for (std::size_t x = 0; x < pb.nx && disjoint; ++x)
      for (std::size_t xh = 0; xh < pb.nxh; ++xh) {
        if (spec(x, xh) != 0.0) continue;
        if (owner[xh] >= 0) disjoint = false;
        owner[xh] = static_cast<int>(x);
      }
    if (disjoint) {
      for (auto& c : cells) {
        std::fill(c.kernel.begin(), c.kernel.end(), 0.0);
        for (std::size_t x = 0; x < pb.nx; ++x)
          for (std::size_t xh = 0; xh < pb.nxh; ++xh)
            if (spec(x, xh) == 0.0) {
              c.kernel[x * pb.nxh + xh] = 1.0;
              break;
            }
        evaluate_kernel(pb, c);
      }
      return package(cells, given, spec, kInfinity, 0);
    }
  }

  const double slope_max = opts.max_slope > 0.0 ? opts.max_slope : 40.0 / spec.min_positive();
  int iterations = 0;
  auto run = [&](double slope) {
    const auto tilt = tilt_table(spec, slope);
    for (auto& c : cells)
      if (c.weight > 0.0) iterations += fixed_slope(pb, tilt, c);
    return totals(cells);
  };

  double lo = 0.0, hi = slope_max;
  double lo_dist = kInfinity, hi_dist = kInfinity;
  std::vector<Cell> lo_cells, hi_cells;
  Totals at;
  bool bracketed = false;
  if (opts.slope_hint > 0.0 && opts.slope_hint < slope_max) {
    // Walk outward from the hint until the budget is bracketed.
    constexpr double kWalk = 1.25;
    double s = opts.slope_hint;
    for (int k = 0; k < 200; ++k) {
      at = run(s);
      if (std::abs(at.distortion - budget) <= opts.distortion_tolerance) return package(cells, given, spec, s, iterations);
      if (at.distortion > budget) {
        lo = s;
        lo_cells = cells;
        lo_dist = at.distortion;
        if (!hi_cells.empty()) break;
        s *= kWalk;
        if (s >= slope_max) break;
      } else {
        hi = s;
        hi_cells = cells;
        hi_dist = at.distortion;
        if (!lo_cells.empty()) break;
        s /= kWalk;
        if (s < 1e-9 * slope_max) {
          lo = 0.0;
          break;
        }
      }
    }
    bracketed = !hi_cells.empty();
  }
  if (!bracketed) {
    at = run(slope_max);
    if (at.distortion > budget + opts.distortion_tolerance) {
      // Budget below what the largest slope reaches; best effort.
      return package(cells, given, spec, slope_max, iterations);
    }
    hi = slope_max;
    hi_cells = cells;
    hi_dist = at.distortion;
    if (std::abs(hi_dist - budget) <= opts.distortion_tolerance) return package(cells, given, spec, hi, iterations);
  }

  // Regula falsi with the Illinois modification once both ends are known,
  // falling back to bisection whenever the bracket fails to halve.
  double f_lo = lo_cells.empty() ? 0.0 : lo_dist - budget, f_hi = hi_dist - budget;
  int side = 0;
  double width_before = hi - lo;
  for (int step = 0; step < opts.max_bisection_steps; ++step) {
    double mid = 0.5 * (lo + hi);
    if (!lo_cells.empty() && step % 3 != 2) {
      const double secant = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
      if (secant > lo && secant < hi) mid = secant;
    }
    if (step % 3 == 2) {
      if (hi - lo > 0.5 * width_before) mid = 0.5 * (lo + hi);
      width_before = hi - lo;
    }
    if (!(mid > lo && mid < hi)) break;
    at = run(mid);
    if (std::abs(at.distortion - budget) <= opts.distortion_tolerance) {
      return package(cells, given, spec, mid, iterations);
    }
    if (at.distortion > budget) {
      lo = mid;
      lo_cells = cells;
      lo_dist = at.distortion;
      f_lo = lo_dist - budget;
      if (side == 1) f_hi *= 0.5;
      side = 1;
    } else {
      hi = mid;
      hi_cells = cells;
      hi_dist = at.distortion;
      f_hi = hi_dist - budget;
      if (side == -1) f_lo *= 0.5;
      side = -1;
    }
  }

  // The distortion jumps across a single slope (a straight piece of the R-D
  // curve). Time-share the two bracketing kernels to meet the budget.
  if (lo_cells.empty()) return package(hi_cells, given, spec, hi, iterations);
  const double t = (budget - hi_dist) / (lo_dist - hi_dist);
  std::vector<Cell> mixed = hi_cells;
  for (std::size_t i = 0; i < mixed.size(); ++i) {
    for (std::size_t k = 0; k < mixed[i].kernel.size(); ++k)
      mixed[i].kernel[k] = t * lo_cells[i].kernel[k] + (1.0 - t) * hi_cells[i].kernel[k];
    evaluate_kernel(pb, mixed[i]);
  }
  return package(mixed, given, spec, 0.5 * (lo + hi), iterations);
}

Cell make_cell(double weight, std::span<const double> p_x, std::size_t nxh) {
  Cell c;
  c.weight = weight;
  c.p_x.assign(p_x.begin(), p_x.end());
  c.q_out.assign(nxh, 1.0 / static_cast<double>(nxh));
  c.kernel.assign(p_x.size() * nxh, 1.0 / static_cast<double>(nxh));
  return c;
}

}  // namespace

RdResult rd_function(const Pmf& q_x, const DistortionSpec& spec, const RdOptions& opts) {
  if (!(q_x.alphabet() == spec.source_alphabet())) throw StructuralError("rd_function: source alphabet mismatch");
  std::vector<Cell> cells{make_cell(1.0, q_x.probs(), spec.reconstruction_size())};
  return solve(std::move(cells), spec.source_alphabet(), spec, opts);
}

RdResult conditional_rd(const Pmf& q_u, const CondPmf& q_x_given_u, const DistortionSpec& spec,
                        const RdOptions& opts) {
  if (!(q_u.alphabet() == q_x_given_u.given_alphabet()) ||
      !(q_x_given_u.target_alphabet() == spec.source_alphabet())) {
    throw StructuralError("conditional_rd: alphabet mismatch");
  }
  std::vector<Cell> cells;
  cells.reserve(q_u.size());
  for (std::size_t u = 0; u < q_u.size(); ++u)
    cells.push_back(make_cell(q_u[u], q_x_given_u.row(u), spec.reconstruction_size()));
  return solve(std::move(cells), product_alphabet(q_u.alphabet(), spec.source_alphabet()), spec, opts);
}

double per_u_budget_rd(const Pmf& q_u, const CondPmf& q_x_given_u, const DistortionSpec& spec, const RdOptions& opts) {
  double total = 0.0;
  for (std::size_t u = 0; u < q_u.size(); ++u) {
    if (q_u[u] <= 0.0) continue;
    const auto row = q_x_given_u.row(u);
    total += q_u[u] * rd_function(Pmf(spec.source_alphabet(), {row.begin(), row.end()}), spec, opts).rate;
  }
  return total;
}

double distortion_of(const Pmf& q_x, const CondPmf& kernel, const DistortionSpec& spec) {
  if (kernel.given_size() != q_x.size() || q_x.size() != spec.source_size() ||
      kernel.target_size() != spec.reconstruction_size()) {
    throw StructuralError("distortion_of: shape mismatch");
  }
  double e = 0.0;
  for (std::size_t x = 0; x < q_x.size(); ++x)
    for (std::size_t xh = 0; xh < kernel.target_size(); ++xh) e += q_x[x] * kernel.at(x, xh) * spec(x, xh);
  return e;
}

double distortion_of(const Pmf& q_u, const CondPmf& q_x_given_u, const CondPmf& kernel, const DistortionSpec& spec) {
  const std::size_t nx = spec.source_size(), nxh = spec.reconstruction_size();
  if (q_x_given_u.given_size() != q_u.size() || q_x_given_u.target_size() != nx ||
      kernel.given_size() != q_u.size() * nx || kernel.target_size() != nxh) {
    throw StructuralError("distortion_of: shape mismatch");
  }
  double e = 0.0;
  for (std::size_t u = 0; u < q_u.size(); ++u)
    for (std::size_t x = 0; x < nx; ++x)
      for (std::size_t xh = 0; xh < nxh; ++xh)
        e += q_u[u] * q_x_given_u.at(u, x) * kernel.at(u * nx + x, xh) * spec(x, xh);
  return e;
}

std::vector<JointPmf> per_u_joints(const CondPmf& q_x_given_u, const CondPmf& kernel) {
  const std::size_t nu = q_x_given_u.given_size(), nx = q_x_given_u.target_size(), nxh = kernel.target_size();
  if (kernel.given_size() != nu * nx) throw StructuralError("per_u_joints: kernel rows must be (u, x) pairs");
  std::vector<JointPmf> joints;
  joints.reserve(nu);
  for (std::size_t u = 0; u < nu; ++u) {
    std::vector<double> j(nx * nxh);
    for (std::size_t x = 0; x < nx; ++x)
      for (std::size_t xh = 0; xh < nxh; ++xh) j[x * nxh + xh] = q_x_given_u.at(u, x) * kernel.at(u * nx + x, xh);
    joints.emplace_back(q_x_given_u.target_alphabet(), kernel.target_alphabet(), std::move(j));
  }
  return joints;
}

}  // namespace sideguess
