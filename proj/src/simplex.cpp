#include "sideguess/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sideguess/prob.hpp"

namespace sideguess {

namespace {

double sanitize(double v) { return std::isfinite(v) ? v : std::numeric_limits<double>::infinity(); }

}  // namespace

NelderMeadResult nelder_mead(const Objective& f, std::vector<double> x0, const NelderMeadOptions& opts) {
  const std::size_t n = x0.size();
  NelderMeadResult result;
  if (n == 0) {
    result.x = x0;
    result.value = sanitize(f(x0));
    result.evaluations = 1;
    result.converged = true;
    return result;
  }

  int evals = 0;
  auto eval = [&](const std::vector<double>& x) {
    ++evals;
    return sanitize(f(x));
  };

  std::vector<double> best_x = x0;
  double best_f = eval(x0);
  bool converged = false;

  for (int round = 0; round <= opts.restarts && evals < opts.max_evaluations; ++round) {
    std::vector<std::vector<double>> pts(n + 1, best_x);
    std::vector<double> vals(n + 1, best_f);
    for (std::size_t i = 0; i < n; ++i) {
      double step = opts.initial_step;
      if (round > 0) step *= 0.5;
      // Step inward when the base point sits near the upper edge of [0, 1].
      pts[i + 1][i] += (pts[i + 1][i] + step > 1.0) ? -step : step;
      vals[i + 1] = eval(pts[i + 1]);
    }

    converged = false;
    std::vector<std::size_t> order(n + 1);
    std::vector<double> centroid(n), trial(n), trial2(n);
    while (evals < opts.max_evaluations) {
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
      const std::size_t lo = order.front(), hi = order.back(), second = order[n - 1];

      double diameter = 0.0;
      for (std::size_t i = 0; i <= n; ++i)
        for (std::size_t k = 0; k < n; ++k) diameter = std::max(diameter, std::abs(pts[i][k] - pts[lo][k]));
      const double spread = vals[hi] - vals[lo];
      if ((std::isfinite(spread) && spread <= opts.f_tolerance && diameter <= opts.x_tolerance) || diameter < 1e-14) {
        converged = true;
        break;
      }

      std::fill(centroid.begin(), centroid.end(), 0.0);
      for (std::size_t i = 0; i <= n; ++i) {
        if (i == hi) continue;
        for (std::size_t k = 0; k < n; ++k) centroid[k] += pts[i][k];
      }
      for (double& c : centroid) c /= static_cast<double>(n);

      for (std::size_t k = 0; k < n; ++k) trial[k] = centroid[k] + (centroid[k] - pts[hi][k]);
      const double fr = eval(trial);
      if (fr < vals[lo]) {
        for (std::size_t k = 0; k < n; ++k) trial2[k] = centroid[k] + 2.0 * (centroid[k] - pts[hi][k]);
        const double fe = eval(trial2);
        if (fe < fr) {
          pts[hi] = trial2;
          vals[hi] = fe;
        } else {
          pts[hi] = trial;
          vals[hi] = fr;
        }
        continue;
      }
      if (fr < vals[second]) {
        pts[hi] = trial;
        vals[hi] = fr;
        continue;
      }
      const bool outside = fr < vals[hi];
      for (std::size_t k = 0; k < n; ++k) {
        trial2[k] = outside ? centroid[k] + 0.5 * (trial[k] - centroid[k])
                            : centroid[k] + 0.5 * (pts[hi][k] - centroid[k]);
      }
      const double fc = eval(trial2);
      if (fc < std::min(fr, vals[hi])) {
        pts[hi] = trial2;
        vals[hi] = fc;
        continue;
      }
      for (std::size_t i = 0; i <= n; ++i) {
        if (i == lo) continue;
        for (std::size_t k = 0; k < n; ++k) pts[i][k] = pts[lo][k] + 0.5 * (pts[i][k] - pts[lo][k]);
        vals[i] = eval(pts[i]);
        if (evals >= opts.max_evaluations) break;
      }
    }
    const auto it = std::min_element(vals.begin(), vals.end());
    const std::size_t idx = static_cast<std::size_t>(it - vals.begin());
    if (vals[idx] <= best_f) {
      best_f = vals[idx];
      best_x = pts[idx];
    }
  }

  result.x = std::move(best_x);
  result.value = best_f;
  result.evaluations = evals;
  result.converged = converged;
  return result;
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), 0x5eedu};
  return std::mt19937_64(seq);
}

std::vector<double> dirichlet_uniform(std::size_t k, std::mt19937_64& rng) {
  // Exponential spacings; avoids std::gamma_distribution's
  // implementation-defined sampling so draws are portable.
  std::vector<double> p(k);
  double s = 0.0;
  for (auto& v : p) {
    const double u = (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
    v = -std::log(u);
    s += v;
  }
  for (auto& v : p) v /= s;
  return p;
}

std::vector<double> to_free_coordinates(std::span<const double> pmfs, std::span<const SimplexBlock> blocks) {
  std::vector<double> free;
  std::size_t offset = 0;
  for (const auto& b : blocks) {
    for (std::size_t i = 0; i + 1 < b.size; ++i) free.push_back(pmfs[offset + i]);
    offset += b.size;
  }
  return free;
}

std::vector<double> from_free_coordinates(std::span<const double> free, std::span<const SimplexBlock> blocks) {
  std::vector<double> pmfs;
  std::size_t offset = 0;
  for (const auto& b : blocks) {
    std::vector<double> p(b.size);
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < b.size; ++i) {
      p[i] = free[offset + i];
      s += p[i];
    }
    p[b.size - 1] = 1.0 - s;
    const bool inside = std::all_of(p.begin(), p.end(), [](double v) { return v >= 0.0; });
    if (!inside) kernel::project_to_simplex(p);
    pmfs.insert(pmfs.end(), p.begin(), p.end());
    offset += b.size - 1;
  }
  return pmfs;
}

}  // namespace sideguess
