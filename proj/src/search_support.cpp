#include "search_support.hpp"

#include <algorithm>
#include <cmath>

#include "sideguess/prob.hpp"

namespace sideguess::detail {

double mutual_info_rows(std::span<const double> q_y, std::span<const double> rows, std::size_t nu) {
  const std::size_t ny = q_y.size();
  double q_u[64] = {};
  for (std::size_t y = 0; y < ny; ++y)
    for (std::size_t u = 0; u < nu; ++u) q_u[u] += q_y[y] * rows[y * nu + u];
  double mi = 0.0;
  for (std::size_t y = 0; y < ny; ++y) {
    if (q_y[y] <= 0.0) continue;
    for (std::size_t u = 0; u < nu; ++u) {
      const double r = rows[y * nu + u];
      if (r > 0.0) mi += q_y[y] * r * std::log2(r / q_u[u]);
    }
  }
  return std::max(mi, 0.0);
}

double retract_to_rate(std::span<const double> q_y, std::span<double> rows, std::size_t nu, double rate) {
  const std::size_t ny = q_y.size();
  const double before = mutual_info_rows(q_y, rows, nu);
  if (before <= rate) return before;
  std::vector<double> q_u(nu, 0.0);
  for (std::size_t y = 0; y < ny; ++y)
    for (std::size_t u = 0; u < nu; ++u) q_u[u] += q_y[y] * rows[y * nu + u];
  const std::vector<double> original(rows.begin(), rows.end());
  auto blend = [&](double t, std::span<double> out) {
    for (std::size_t y = 0; y < ny; ++y)
      for (std::size_t u = 0; u < nu; ++u) out[y * nu + u] = t * original[y * nu + u] + (1.0 - t) * q_u[u];
  };
  // Mutual information is convex along the segment and zero at t = 0.
  std::vector<double> trial(rows.size());
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    blend(mid, trial);
    (mutual_info_rows(q_y, trial, nu) <= rate ? lo : hi) = mid;
  }
  blend(lo, rows);
  return before;
}

std::vector<SimplexBlock> row_blocks(std::size_t ny, std::size_t nu) { return std::vector<SimplexBlock>(ny, {nu}); }

void joint_from_rows(std::span<const double> q_y, std::span<const double> rows, std::size_t nu, std::span<double> out) {
  for (std::size_t y = 0; y < q_y.size(); ++y)
    for (std::size_t u = 0; u < nu; ++u) out[y * nu + u] = q_y[y] * rows[y * nu + u];
}

std::vector<double> copy_rows(std::size_t ny, std::size_t nu) {
  std::vector<double> rows(ny * nu, 0.0);
  for (std::size_t y = 0; y < ny; ++y) rows[y * nu + y] = 1.0;
  return rows;
}

}  // namespace sideguess::detail
