#include "sideguess/inner_dual.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sideguess {

namespace {

constexpr int kGridPoints = 22;
constexpr int kBisectionSteps = 40;
constexpr int kMaxCellIterations = 200;
constexpr double kCellGapTolerance = 1e-13;
constexpr double kWalkFactor = 1.5;

inline double neg_power(double a, double rho) {
  if (rho == 1.0) return 1.0 / a;
  return std::exp2(-rho * std::log2(a));
}

}  // namespace

InnerDual::InnerDual(const ProblemSpec& spec)
    : nx_(spec.nx()), ny_(spec.ny()), nu_(spec.nu()), nxh_(spec.nxh()), rho_(spec.rho()),
      budget_(spec.distortion().budget()) {
  p_x_given_y_.resize(ny_ * nx_);
  for (std::size_t y = 0; y < ny_; ++y)
    for (std::size_t x = 0; x < nx_; ++x) p_x_given_y_[y * nx_ + x] = spec.p_x_given_y().at(y, x);
  d_.assign(spec.distortion().matrix().begin(), spec.distortion().matrix().end());

  const double slope_max = 40.0 / spec.distortion().min_positive();
  grid_.push_back(0.0);
  for (int j = kGridPoints - 1; j >= 0; --j) grid_.push_back(slope_max * std::exp2(-0.5 * j));
  grid_tilts_.resize(grid_.size() * nx_ * nxh_);
  std::vector<double> t;
  for (std::size_t k = 0; k < grid_.size(); ++k) {
    tilt_for(grid_[k], t);
    std::copy(t.begin(), t.end(), grid_tilts_.begin() + static_cast<std::ptrdiff_t>(k * nx_ * nxh_));
  }
}

InnerDual::Workspace InnerDual::make_workspace() const {
  Workspace ws;
  ws.grid_q.assign(grid_.size() * nu_ * nxh_, 1.0 / static_cast<double>(nxh_));
  ws.refine_q.assign(nu_ * nxh_, 1.0 / static_cast<double>(nxh_));
  ws.a.resize(nx_);
  ws.b.resize(ny_);
  ws.w.resize(nx_ + nxh_);
  ws.c.resize(ny_ * nx_);
  ws.e.resize(ny_ * nxh_);
  ws.hess.resize(nxh_ * nxh_);
  ws.trial.resize(nxh_);
  ws.dir.resize(nxh_);
  ws.grad.resize(nxh_);
  return ws;
}

void InnerDual::tilt_for(double slope, std::vector<double>& tilt) const {
  tilt.resize(nx_ * nxh_);
  for (std::size_t i = 0; i < tilt.size(); ++i) tilt[i] = std::exp2(-slope * d_[i]);
}

namespace {

// Solves the (m + 1) x (m + 1) system in place by Gaussian elimination with
// partial pivoting. Returns false when the matrix is numerically singular.
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
      if (f == 0.0) continue;
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

}  // namespace

// min over q in the simplex of sum_y m_y log2 sum_x P(x|y) A(x)^{-rho},
// A(x) = sum_k q_k tilt(x, k). The function is convex in q; an active-set
// Newton method on the face of the current support converges in a handful
// of steps.
double InnerDual::minimize_cell(std::span<const double> q_yu, std::size_t u, std::span<const double> tilt,
                                std::span<double> q, Workspace& ws, double& distortion) const {
  const double* m_y = q_yu.data() + u;  // stride nu_
  double weight = 0.0;
  for (std::size_t y = 0; y < ny_; ++y) weight += m_y[y * nu_];
  auto& a = ws.a;
  auto& b = ws.b;
  auto& c = ws.c;  // [y][x]: share of x in b_y
  auto& e = ws.e;  // [y][k]: sum_x c(y, x) tilt(x, k) / a(x)
  auto& hess = ws.hess;
  auto& kkt = ws.kkt;
  auto& rhs = ws.rhs;
  auto& trial = ws.trial;
  auto& dir = ws.dir;
  auto& grad = ws.grad;
  double* w = ws.w.data();
  double* s = w + nx_;

  kernel::normalize(q);

  // Natural-log objective at a point; leaves a and b filled.
  auto value_at = [&](std::span<const double> qq) {
    for (std::size_t x = 0; x < nx_; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < nxh_; ++k) acc += qq[k] * tilt[x * nxh_ + k];
      a[x] = acc;
    }
    double f = 0.0;
    for (std::size_t y = 0; y < ny_; ++y) {
      double acc = 0.0;
      for (std::size_t x = 0; x < nx_; ++x) acc += p_x_given_y_[y * nx_ + x] * neg_power(a[x], rho_);
      b[y] = acc;
      const double my = m_y[y * nu_];
      if (my > 0.0) f += my * std::log(acc);
    }
    return f;
  };

  std::vector<std::size_t>& support = ws.support;
  double f = value_at(q);
  bool polished = false;
  for (int it = 0;; ++it) {
    // Gradient pieces at q (a and b are current).
    std::fill(w, w + nx_, 0.0);
    for (std::size_t y = 0; y < ny_; ++y) {
      const double my = m_y[y * nu_];
      for (std::size_t x = 0; x < nx_; ++x) {
        const double share = my > 0.0 ? p_x_given_y_[y * nx_ + x] * neg_power(a[x], rho_) / b[y] : 0.0;
        c[y * nx_ + x] = share;
        w[x] += my * share;
      }
    }
    double smax = 0.0;
    distortion = 0.0;
    for (std::size_t k = 0; k < nxh_; ++k) {
      double acc = 0.0;
      for (std::size_t x = 0; x < nx_; ++x) {
        const double r = tilt[x * nxh_ + k] / a[x];
        acc += w[x] * r;
        distortion += w[x] * q[k] * r * d_[x * nxh_ + k];
      }
      s[k] = acc / weight;
      grad[k] = -rho_ * acc;
      smax = std::max(smax, s[k]);
    }
    // Convexity bounds the suboptimality by the largest KKT violation.
    const double gap = weight * rho_ / std::numbers::ln2 * (smax - 1.0);
    if (gap < kCellGapTolerance || polished || it >= kMaxCellIterations) break;

    support.clear();
    std::size_t entering = nxh_;
    for (std::size_t k = 0; k < nxh_; ++k) {
      if (q[k] > 0.0) {
        support.push_back(k);
      } else if (s[k] > 1.0 && (entering == nxh_ || s[k] > s[entering])) {
        entering = k;
      }
    }
    if (entering != nxh_) support.push_back(entering);
    const std::size_t nsup = support.size();

    bool newton = nsup > 1;
    if (newton) {
      for (std::size_t y = 0; y < ny_; ++y)
        for (std::size_t k = 0; k < nxh_; ++k) {
          double acc = 0.0;
          for (std::size_t x = 0; x < nx_; ++x) acc += c[y * nx_ + x] * tilt[x * nxh_ + k] / a[x];
          e[y * nxh_ + k] = acc;
        }
      double scale = 0.0;
      for (std::size_t i = 0; i < nsup; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
          const std::size_t k = support[i], l = support[j];
          double h = 0.0;
          for (std::size_t y = 0; y < ny_; ++y) {
            const double my = m_y[y * nu_];
            if (my <= 0.0) continue;
            double cross = 0.0;
            for (std::size_t x = 0; x < nx_; ++x)
              cross += c[y * nx_ + x] * (tilt[x * nxh_ + k] / a[x]) * (tilt[x * nxh_ + l] / a[x]);
            h += my * (rho_ * (rho_ + 1.0) * cross - rho_ * rho_ * e[y * nxh_ + k] * e[y * nxh_ + l]);
          }
          hess[i * nsup + j] = hess[j * nsup + i] = h;
          scale = std::max(scale, std::abs(h));
        }
      const std::size_t n = nsup + 1;
      kkt.assign(n * n, 0.0);
      rhs.assign(n, 0.0);
      for (std::size_t i = 0; i < nsup; ++i) {
        for (std::size_t j = 0; j < nsup; ++j) kkt[i * n + j] = hess[i * nsup + j];
        kkt[i * n + i] += 1e-12 * scale + 1e-300;
        kkt[i * n + nsup] = kkt[nsup * n + i] = 1.0;
        rhs[i] = -grad[support[i]];
      }
      newton = solve_dense(kkt, rhs, n);
    }

    double slope = 0.0;
    std::fill(dir.begin(), dir.end(), 0.0);
    if (newton) {
      for (std::size_t i = 0; i < nsup; ++i) {
        dir[support[i]] = rhs[i];
        slope += grad[support[i]] * rhs[i];
      }
      newton = slope < 0.0 && std::isfinite(slope) && (entering == nxh_ || dir[entering] > 0.0);
    }

    bool moved = false;
    if (newton) {
      // Longest feasible step, then backtrack on the objective.
      double t_max = kInfinity;
      std::size_t blocking = nxh_;
      for (std::size_t k = 0; k < nxh_; ++k) {
        if (dir[k] < 0.0 && -q[k] / dir[k] < t_max) {
          t_max = -q[k] / dir[k];
          blocking = k;
        }
      }
      double t = std::min(1.0, t_max);
      // Below the rounding floor of f the line search cannot tell steps
      // apart; inside that region the full Newton step is taken as is.
      const bool tiny = -slope < 1e-14 * (1.0 + std::abs(f)) && t == 1.0;
      if (tiny) {
        polished = entering == nxh_;
        for (std::size_t k = 0; k < nxh_; ++k) trial[k] = std::max(0.0, q[k] + dir[k]);
        kernel::normalize(trial);
        std::copy(trial.begin(), trial.end(), q.begin());
        f = value_at(q);
        moved = true;
      }
      for (int bt = 0; bt < 60 && !moved; ++bt, t *= 0.5) {
        for (std::size_t k = 0; k < nxh_; ++k) trial[k] = std::max(0.0, q[k] + t * dir[k]);
        if (t == t_max && blocking != nxh_) trial[blocking] = 0.0;
        kernel::normalize(trial);
        const double ft = value_at(trial);
        if (ft <= f + 1e-4 * t * slope) {
          std::copy(trial.begin(), trial.end(), q.begin());
          f = ft;
          moved = true;
          break;
        }
      }
    }
    if (!moved) {
      // Multiplicative step; never increases the objective for small enough
      // exponents, and lets absent letters back in.
      double step = 1.0;
      for (int bt = 0; bt < 60; ++bt, step *= 0.5) {
        for (std::size_t k = 0; k < nxh_; ++k) {
          const double base = q[k] > 0.0 ? q[k] : (s[k] > 1.0 ? 1e-12 : 0.0);
          trial[k] = base * std::pow(s[k], step);
        }
        kernel::normalize(trial);
        const double ft = value_at(trial);
        if (ft <= f) {
          std::copy(trial.begin(), trial.end(), q.begin());
          f = ft;
          moved = true;
          break;
        }
      }
      if (!moved) {
        value_at(q);
        break;
      }
    }
  }
  return f / std::numbers::ln2;
}

InnerDual::SlopeEval InnerDual::evaluate(std::span<const double> q_yu, std::span<const double> tilt, double slope,
                                         std::span<double> q_store, Workspace& ws) const {
  ++ws.evaluations;
  SlopeEval ev{-rho_ * slope * budget_, -rho_ * budget_};
  for (std::size_t u = 0; u < nu_; ++u) {
    double weight = 0.0;
    for (std::size_t y = 0; y < ny_; ++y) weight += q_yu[y * nu_ + u];
    if (weight <= 0.0) continue;
    double dist = 0.0;
    ev.value += minimize_cell(q_yu, u, tilt, q_store.subspan(u * nxh_, nxh_), ws, dist);
    ev.derivative += rho_ * dist;
  }
  return ev;
}

double InnerDual::search(std::span<const double> q_yu, Workspace& ws, double& best_slope) const {
  const std::size_t stride = nu_ * nxh_, tstride = nx_ * nxh_;
  std::size_t best_k = 0;
  double best = -kInfinity;
  std::vector<SlopeEval> evals(grid_.size());
  for (std::size_t k = 0; k < grid_.size(); ++k) {
    evals[k] = evaluate(q_yu, std::span<const double>(grid_tilts_).subspan(k * tstride, tstride), grid_[k],
                        std::span<double>(ws.grid_q).subspan(k * stride, stride), ws);
    if (evals[k].value > best) {
      best = evals[k].value;
      best_k = k;
    }
  }
  best_slope = grid_[best_k];
  std::size_t lo_k, hi_k;
  if (evals[best_k].derivative > 0.0) {
    if (best_k + 1 == grid_.size()) return best;
    lo_k = best_k;
    hi_k = best_k + 1;
  } else {
    if (best_k == 0) return best;
    lo_k = best_k - 1;
    hi_k = best_k;
  }
  double lo = grid_[lo_k], hi = grid_[hi_k];
  std::copy_n(ws.grid_q.begin() + static_cast<std::ptrdiff_t>(best_k * stride), stride, ws.refine_q.begin());
  std::vector<double> tilt;
  for (int step = 0; step < kBisectionSteps && hi - lo > 1e-12 * (1.0 + hi); ++step) {
    const double mid = 0.5 * (lo + hi);
    tilt_for(mid, tilt);
    const SlopeEval ev = evaluate(q_yu, tilt, mid, ws.refine_q, ws);
    if (ev.value > best) {
      best = ev.value;
      best_slope = mid;
    }
    (ev.derivative > 0.0 ? lo : hi) = mid;
  }
  return best;
}

double InnerDual::value(std::span<const double> q_yu, Workspace& ws) const {
  double slope = 0.0;
  const double v = search(q_yu, ws, slope);
  ws.last_slope = slope;
  return v;
}

double InnerDual::at_slope(std::span<const double> q_yu, double slope, Workspace& ws) const {
  std::vector<double> tilt;
  tilt_for(slope, tilt);
  return evaluate(q_yu, tilt, slope, ws.refine_q, ws).value;
}

double InnerDual::value_near(std::span<const double> q_yu, Workspace& ws) const {
  if (ws.last_slope < 0.0) return value(q_yu, ws);
  const double slope_max = grid_.back();
  std::vector<double> tilt;
  double best = -kInfinity, best_slope = ws.last_slope;
  auto probe = [&](double s) {
    tilt_for(s, tilt);
    const SlopeEval ev = evaluate(q_yu, tilt, s, ws.refine_q, ws);
    if (ev.value > best) {
      best = ev.value;
      best_slope = s;
    }
    return ev.derivative;
  };

  // Walk from the previous slope until the derivative changes sign.
  double lo = ws.last_slope, hi = ws.last_slope;
  double d_lo = probe(lo), d_hi = d_lo;
  if (d_lo > 0.0) {
    while (d_hi > 0.0 && hi < slope_max) {
      lo = hi;
      d_lo = d_hi;
      hi = std::min(slope_max, hi > 0.0 ? hi * kWalkFactor : grid_[1]);
      d_hi = probe(hi);
    }
  } else if (d_lo < 0.0) {
    while (d_lo < 0.0 && lo > 0.0) {
      hi = lo;
      d_hi = d_lo;
      lo = lo > grid_[1] ? lo / kWalkFactor : 0.0;
      d_lo = probe(lo);
    }
  }
  // Illinois iteration on the derivative inside the bracket.
  if (d_lo > 0.0 && d_hi < 0.0) {
    int side = 0;
    for (int step = 0; step < kBisectionSteps && hi - lo > 1e-12 * (1.0 + hi); ++step) {
      double mid = (lo * d_hi - hi * d_lo) / (d_hi - d_lo);
      if (!(mid > lo && mid < hi)) mid = 0.5 * (lo + hi);
      const double d = probe(mid);
      if (std::abs(d) < 1e-13) break;
      if (d > 0.0) {
        lo = mid;
        d_lo = d;
        if (side == 1) d_hi *= 0.5;
        side = 1;
      } else {
        hi = mid;
        d_hi = d;
        if (side == -1) d_lo *= 0.5;
        side = -1;
      }
    }
  }
  ws.last_slope = best_slope;
  return best;
}

InnerDual::Solution InnerDual::solve(std::span<const double> q_yu, Workspace& ws) const {
  Solution sol;
  sol.value = value(q_yu, ws);
  sol.slope = ws.last_slope;

  // Re-solve the cells at the chosen slope to read off the maximizer.
  std::vector<double> tilt;
  tilt_for(sol.slope, tilt);
  sol.q_xhat.assign(nu_ * nxh_, 1.0 / static_cast<double>(nxh_));
  const SlopeEval ev = evaluate(q_yu, tilt, sol.slope, sol.q_xhat, ws);
  sol.value = std::max(sol.value, ev.value);

  sol.q_x_given_yu.assign(ny_ * nu_ * nx_, 0.0);
  for (std::size_t u = 0; u < nu_; ++u) {
    std::vector<double> apow(nx_);
    for (std::size_t x = 0; x < nx_; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < nxh_; ++k) acc += sol.q_xhat[u * nxh_ + k] * tilt[x * nxh_ + k];
      apow[x] = neg_power(acc, rho_);
    }
    for (std::size_t y = 0; y < ny_; ++y) {
      double* row = sol.q_x_given_yu.data() + (y * nu_ + u) * nx_;
      double z = 0.0;
      for (std::size_t x = 0; x < nx_; ++x) z += row[x] = p_x_given_y_[y * nx_ + x] * apow[x];
      for (std::size_t x = 0; x < nx_; ++x) row[x] /= z;
    }
  }
  return sol;
}

}  // namespace sideguess
