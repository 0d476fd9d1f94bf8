// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "oracles/brute_force.hpp"
#include "sideguess/exponent.hpp"
#include "sideguess/finite_n.hpp"
#include "sideguess/instance_io.hpp"
#include "sideguess/rate_distortion.hpp"
#include "sideguess/simplex.hpp"

using namespace sideguess;

namespace {

const Alphabet kBin = Alphabet::indexed(2);

struct Outcome {
  bool pass = true;
  std::string detail;
};

double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * ((rng() >> 11) * 0x1.0p-53); }

Pmf random_pmf(std::size_t k, std::mt19937_64& rng) { return Pmf(dirichlet_uniform(k, rng)); }

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

ProblemSpec golden() { return load_instance(std::string(SIDEGUESS_DATA_DIR) + "/golden_binary.inst").to_spec(); }

Outcome arikan_sandwich() {
  auto rng = make_rng(101, 0);
  double worst = kInfinity;
  int bad = 0;
  for (int t = 0; t < 200; ++t) {
    const Pmf p = random_pmf(2 + rng() % 7, rng);
    for (double rho : {0.5, 1.0, 2.0}) {
      const ArikanBounds b = arikan_bounds(p, rho);
      const double m = oracle::sorted_order_moment(std::vector<double>(p.probs().begin(), p.probs().end()), rho);
      const double margin = std::min(m - b.lower, b.upper - m);
      worst = std::min(worst, margin);
      if (margin < -1e-12) ++bad;
    }
  }
  return {bad == 0, fmt("600 cases, %d outside, smallest margin %.3g", bad, worst)};
}

Outcome renyi_identity() {
  auto rng = make_rng(102, 0);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t k = 2 + t % 2;
    const Pmf p = random_pmf(k, rng);
    const auto ham = DistortionSpec::hamming(Alphabet::indexed(k), 0.0);
    for (double rho : {0.5, 1.0, 2.0})
      worst = std::max(worst, std::abs(no_help_exponent(p, ham, rho) - rho * renyi_entropy(p, 1.0 / (1.0 + rho))));
  }
  return {worst < 1e-4, fmt("150 cases, max error %.3g (tol 1e-4)", worst)};
}

Outcome direct_help_reduction() {
  auto rng = make_rng(103, 0);
  double worst = 0.0, lo = kInfinity, hi = 0.0;
  for (int t = 0; t < 10; ++t) {
    const std::size_t k = t < 7 ? 2 : 3;
    const Alphabet a = Alphabet::indexed(k);
    Pmf p = random_pmf(k, rng);
    if (k == 2) {
      const double b = uniform(rng, 0.15, 0.5);
      p = Pmf({1 - b, b});
    }
    std::vector<double> diag(k * k, 0.0);
    for (std::size_t i = 0; i < k; ++i) diag[i * k + i] = p[i];
    // R below 1 - h2(0.1) keeps the exponent positive.
    const double budget = uniform(rng, 0.02, 0.1), rho = uniform(rng, 0.5, 2.0), rate = uniform(rng, 0.05, 0.4);
    const auto ham = DistortionSpec::hamming(a, budget);
    const ProblemSpec spec(JointPmf(a, a, diag), ham, rho, rate);
    const double direct = direct_help_exponent(p, ham, rho, rate);
    worst = std::max(worst, std::abs(compute_exponent(spec).value - direct));
    lo = std::min(lo, direct);
    hi = std::max(hi, direct);
  }
  return {worst < 5e-3, fmt("10 diagonal instances (exponents %.3f to %.3f), max gap %.3g (tol 5e-3)", lo, hi, worst)};
}

Outcome useless_help_reduction() {
  auto rng = make_rng(104, 0);
  double worst = 0.0;
  auto gap = [&](const ProblemSpec& spec) {
    const double v = compute_exponent(spec).value;
    return std::abs(v - no_help_exponent(spec.p_x(), spec.distortion(), spec.rho()));
  };
  worst = std::max(worst, gap(golden().with_rate(0.0)));
  for (int t = 0; t < 10; ++t) {
    const std::size_t kx = t < 8 ? 2 : 3;
    const Alphabet ax = Alphabet::indexed(kx);
    const Pmf px = random_pmf(kx, rng), py = random_pmf(2, rng);
    std::vector<double> j;
    for (std::size_t x = 0; x < kx; ++x)
      for (std::size_t y = 0; y < 2; ++y) j.push_back(px[x] * py[y]);
    const double budget = uniform(rng, 0.02, 0.2), rho = uniform(rng, 0.5, 2.0);
    const ProblemSpec spec(JointPmf(ax, kBin, j), DistortionSpec::hamming(ax, budget), rho, 0.25);
    worst = std::max(worst, gap(spec));
    worst = std::max(worst, gap(spec.with_rate(0.5)));
  }
  return {worst < 5e-3, fmt("R = 0 plus 20 product-form runs, max gap %.3g (tol 5e-3)", worst)};
}

Outcome binary_rd_closed_form() {
  double worst = 0.0;
  for (double p : {0.05, 0.2, 0.35, 0.5, 0.8})
    for (int i = 0; i < 10; ++i) {
      const double budget = 0.06 * i;
      const double r = rd_function(Pmf({1 - p, p}), DistortionSpec::hamming(kBin, budget)).rate;
      worst = std::max(worst, std::abs(r - oracle::binary_hamming_rd(p, budget)));
    }
  return {worst < 1e-6, fmt("50 grid points, max error %.3g (tol 1e-6)", worst)};
}

Outcome conditional_rd_grid() {
  auto rng = make_rng(106, 0);
  double worst = 0.0;
  for (int t = 0; t < 5; ++t) {
    const double w = uniform(rng, 0.2, 0.8);
    const std::vector<double> q_u{w, 1 - w}, p1{uniform(rng, 0.05, 0.95), uniform(rng, 0.05, 0.95)};
    const double budget = uniform(rng, 0.03, 0.25);
    const std::vector<double> d{0, 1, 1, 0};
    const double exact = conditional_rd(Pmf(q_u), CondPmf(kBin, kBin, {1 - p1[0], p1[0], 1 - p1[1], p1[1]}),
                                        DistortionSpec(kBin, kBin, d, budget))
                             .rate;
    worst = std::max(worst, std::abs(exact - oracle::grid_conditional_rd(q_u, p1, d, budget, 0.005)));
  }
  return {worst < 2e-3, fmt("5 instances, max gap to the 0.005 grid %.3g (tol 2e-3)", worst)};
}

Outcome monotone_sweeps() {
  const ProblemSpec spec = golden();
  double worst_r = -kInfinity, worst_d = -kInfinity;
  double prev = kInfinity;
  for (int i = 0; i <= 10; ++i) {
    const double v = compute_exponent(spec.with_rate(0.1 * i)).value;
    worst_r = std::max(worst_r, v - prev);
    prev = v;
  }
  prev = kInfinity;
  for (int i = 0; i <= 10; ++i) {
    const double v = compute_exponent(spec.with_budget(0.05 * i)).value;
    worst_d = std::max(worst_d, v - prev);
    prev = v;
  }
  return {worst_r <= 1e-6 && worst_d <= 1e-6,
          fmt("largest increase over R %.3g, over D %.3g (tol 1e-6)", worst_r, worst_d)};
}

Outcome reverse_wyner() {
  auto rng = make_rng(108, 0);
  int bad = 0;
  double slack = kInfinity;
  for (int t = 0; t < 1000; ++t) {
    const ReverseWyner r = reverse_wyner_check(random_pmf(2 + rng() % 15, rng));
    if (!r.holds) ++bad;
    slack = std::min(slack, r.lhs - r.rhs);
  }
  return {bad == 0, fmt("1000 PMFs, %d failures, smallest slack %.3g", bad, slack)};
}

Outcome finite_n_sanity() {
  std::vector<std::string> failed;
  auto rng = make_rng(109, 0);
  for (int n : {1, 2}) {
    for (int t = 0; t < 3; ++t) {
      const JointPmf j(kBin, kBin, dirichlet_uniform(4, rng));
      const double budget = t == 0 ? 0.0 : 0.5;
      const ProblemSpec spec(j, DistortionSpec::hamming(kBin, budget), 1.0 + t * 0.5, 0.5);

      // No help: guess against P_X^n.
      std::vector<double> px_n(sequence_count(2, n), 1.0);
      for (std::uint64_t s = 0; s < px_n.size(); ++s)
        for (std::size_t x : sequence_symbols(s, 2, n)) px_n[s] *= spec.p_x()[x];
      const double alone = optimal_order_moment(px_n, spec.distortion(), n, spec.rho()).moment;
      const double m1 = best_helper_moment({spec, n, 1}).moment;
      if (m1 != alone) failed.push_back(fmt("M=1 n=%d (%.17g vs %.17g)", n, m1, alone));

      double prev = m1;
      for (std::uint64_t m = 2; m <= 4; ++m) {
        const double v = best_helper_moment({spec, n, m}).moment;
        if (v > prev) failed.push_back(fmt("monotone n=%d M=%d", n, static_cast<int>(m)));
        prev = v;
      }
    }
    const ProblemSpec diag(JointPmf(kBin, kBin, {0.7, 0.0, 0.0, 0.3}), DistortionSpec::hamming(kBin, 0.0), 2.0, 1.0);
    const double full = best_helper_moment({diag, n, sequence_count(2, n)}).moment;
    if (std::abs(full - 1.0) > 1e-12) failed.push_back(fmt("full rate n=%d gives %.17g", n, full));
  }
  std::string detail = "M=1 exact, full-rate diagonal, monotone in M over 6 instances";
  for (const auto& f : failed) detail += "; " + f;
  return {failed.empty(), detail};
}

Outcome dual_path_agreement() {
  auto rng = make_rng(110, 0);
  double worst = 0.0, per_u_gap = 0.0;
  int configs = 0;
  while (configs < 100) {
    const std::size_t kx = 2 + configs % 2, ky = 2;
    const Alphabet ax = Alphabet::indexed(kx);
    const ProblemSpec spec(JointPmf(ax, kBin, dirichlet_uniform(kx * ky, rng)),
                           DistortionSpec::hamming(ax, uniform(rng, 0.02, 0.3)), uniform(rng, 0.5, 2.0),
                           uniform(rng, 0.1, 0.8));
    std::vector<double> q_y = dirichlet_uniform(ky, rng), rows, x_rows;
    for (std::size_t y = 0; y < ky; ++y) {
      const auto r = dirichlet_uniform(spec.nu(), rng);
      rows.insert(rows.end(), r.begin(), r.end());
    }
    for (std::size_t i = 0; i < ky * spec.nu(); ++i) {
      const auto r = dirichlet_uniform(kx, rng);
      x_rows.insert(x_rows.end(), r.begin(), r.end());
    }
    const auto cfg = AuxConfiguration::from_arrays(spec, q_y, rows, x_rows);
    // Feasible means I(Y;U) <= R.
    if (cfg.mutual_info_yu() > spec.rate()) continue;
    const ObjectiveBreakdown b = evaluate_objective(spec, cfg, true);
    worst = std::max(worst, std::abs(b.value - b.decomposed_value));
    per_u_gap = std::max(per_u_gap, b.per_u_budget_rd_term - b.rd_term);
    ++configs;
  }
  std::printf("  diagnostic: per-u budget reading exceeds the joint R-D term by up to %.6g bits\n", per_u_gap);
  return {worst < 1e-8, fmt("100 configurations, max gap %.3g (tol 1e-8)", worst)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"arikan sandwich", 10, arikan_sandwich},
      {"renyi identity", 60, renyi_identity},
      {"direct-help reduction", 600, direct_help_reduction},
      {"useless-help reduction", 600, useless_help_reduction},
      {"binary R-D closed form", 5, binary_rd_closed_form},
      {"conditional R-D vs grid", 300, conditional_rd_grid},
      {"monotone sweeps", 1800, monotone_sweeps},
      {"reverse Wyner", 5, reverse_wyner},
      {"finite-n sanity", 120, finite_n_sanity},
      {"dual-path agreement", 60, dual_path_agreement},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > criteria[i].budget_s) {
      o.pass = false;
      o.detail += fmt("; over the %.0f s budget", criteria[i].budget_s);
    }
    failures += o.pass ? 0 : 1;
    std::printf("%s %2zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name, o.detail.c_str(),
                secs);
    std::fflush(stdout);
  }
  return failures;
}
