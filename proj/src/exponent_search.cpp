#include <algorithm>
#include <cmath>

#include "search_support.hpp"
#include "sideguess/exponent.hpp"
#include "sideguess/inner_dual.hpp"
#include "sideguess/simplex.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sideguess {

namespace {

constexpr double kInfeasiblePenalty = 1e-3;
constexpr std::uint64_t kMiddleStreamSalt = 0x6d1dd1e5ULL;
constexpr double kColdStep = 0.15;
constexpr double kWarmStep = 0.02;

struct MiddleResult {
  double value = kInfinity;
  std::vector<double> rows;  // [y][u]
  double spread = 0.0;
  bool converged = true;
};

// inf over Q_{U|Y} with I(Y;U) <= R of the inner supremum, for one Q_Y.
class MiddleSearch {
 public:
  MiddleSearch(const ProblemSpec& spec, const InnerDual& dual, const SolverOptions& opts)
      : spec_(spec), dual_(dual), opts_(opts), ny_(spec.ny()), nu_(spec.nu()), blocks_(detail::row_blocks(ny_, nu_)),
        ws_(dual.make_workspace()), joint_(ny_ * nu_) {}

  // Inner value at feasible rows, with a full slope search.
  double inner(std::span<const double> q_y, std::span<const double> rows) {
    detail::joint_from_rows(q_y, rows, nu_, joint_);
    return dual_.value(joint_, ws_);
  }
  // Same, tracking the slope from the previous call.
  double inner_near(std::span<const double> q_y, std::span<const double> rows) {
    detail::joint_from_rows(q_y, rows, nu_, joint_);
    return dual_.value_near(joint_, ws_);
  }

  // Free coordinates to feasible rows; returns the penalty for the raw point.
  double feasible_rows(std::span<const double> q_y, std::span<const double> free, std::vector<double>& rows) const {
    rows = from_free_coordinates(free, blocks_);
    const double raw = detail::retract_to_rate(q_y, rows, nu_, spec_.rate());
    return raw > spec_.rate() ? kInfeasiblePenalty * (raw - spec_.rate()) : 0.0;
  }

  MiddleResult polish(std::span<const double> q_y, std::vector<double> start, int max_evaluations, double step) {
    NelderMeadOptions nm;
    nm.max_evaluations = max_evaluations;
    nm.f_tolerance = opts_.tolerance;
    nm.x_tolerance = 1e-4;
    nm.initial_step = step;
    std::vector<double> rows;
    const Objective f = [&](std::span<const double> free) {
      const double penalty = feasible_rows(q_y, free, rows);
      return inner_near(q_y, rows) + penalty;
    };
    detail::retract_to_rate(q_y, start, nu_, spec_.rate());
    inner(q_y, start);
    const auto r = nelder_mead(f, to_free_coordinates(start, blocks_), nm);
    evaluations_ += r.evaluations;
    MiddleResult out;
    feasible_rows(q_y, r.x, out.rows);
    out.value = inner(q_y, out.rows);
    out.converged = r.converged;
    return out;
  }

  // Multistart: warm start (if any), the copy kernel u = y, and random
  // kernels, `starts` in all.
  MiddleResult run(std::span<const double> q_y, const std::vector<double>* warm, int starts, std::uint64_t stream) {
    if (spec_.rate() == 0.0) {
      // U must be independent of Y; every such kernel gives the same inner
      // value, so a constant U stands in for all of them.
      MiddleResult r;
      r.rows.assign(ny_ * nu_, 0.0);
      for (std::size_t y = 0; y < ny_; ++y) r.rows[y * nu_] = 1.0;
      r.value = inner(q_y, r.rows);
      return r;
    }
    std::vector<std::vector<double>> inits;
    if (warm != nullptr && !warm->empty()) inits.push_back(*warm);
    if (static_cast<int>(inits.size()) < std::max(starts, 1)) inits.push_back(detail::copy_rows(ny_, nu_));
    auto rng = make_rng(opts_.seed ^ kMiddleStreamSalt, stream);
    while (static_cast<int>(inits.size()) < std::max(starts, 1)) {
      std::vector<double> rows;
      for (std::size_t y = 0; y < ny_; ++y) {
        const auto r = dirichlet_uniform(nu_, rng);
        rows.insert(rows.end(), r.begin(), r.end());
      }
      inits.push_back(std::move(rows));
    }
    MiddleResult best;
    double worst = -kInfinity;
    for (std::size_t i = 0; i < inits.size(); ++i) {
      // A warm start is already close; a wide first simplex only wastes
      // evaluations there.
      const bool tracked = i == 0 && warm != nullptr && !warm->empty();
      MiddleResult r = tracked ? polish(q_y, inits[i], opts_.tracked_middle_evaluations, kWarmStep)
                               : polish(q_y, inits[i], opts_.middle_max_evaluations, kColdStep);
      worst = std::max(worst, r.value);
      best.converged = best.converged && r.converged;
      if (r.value < best.value) {
        best.value = r.value;
        best.rows = std::move(r.rows);
      }
    }
    best.spread = worst - best.value;
    return best;
  }

  // Exhaustive grid over each row of Q_{U|Y}, then a local polish.
  MiddleResult grid(std::span<const double> q_y, double step) {
    const auto row_grid = simplex_grid(nu_, step);
    std::vector<std::size_t> idx(ny_, 0);
    std::vector<double> rows(ny_ * nu_), best_rows;
    double best = kInfinity;
    for (;;) {
      for (std::size_t y = 0; y < ny_; ++y) std::copy(row_grid[idx[y]].begin(), row_grid[idx[y]].end(), rows.begin() + y * nu_);
      if (detail::mutual_info_rows(q_y, rows, nu_) <= spec_.rate()) {
        const double v = inner(q_y, rows);
        ++evaluations_;
        if (v < best) {
          best = v;
          best_rows = rows;
        }
      }
      std::size_t y = 0;
      while (y < ny_ && ++idx[y] == row_grid.size()) idx[y++] = 0;
      if (y == ny_) break;
    }
    MiddleResult r = polish(q_y, best_rows, opts_.middle_max_evaluations, step);
    if (r.value > best) {
      r.value = best;
      r.rows = best_rows;
    }
    return r;
  }

  InnerDual::Workspace& workspace() { return ws_; }
  [[nodiscard]] long long evaluations() const { return evaluations_ + ws_.evaluations; }

  static std::vector<std::vector<double>> simplex_grid(std::size_t k, double step) {
    const int m = std::max(1, static_cast<int>(std::lround(1.0 / step)));
    std::vector<std::vector<double>> pts;
    std::vector<int> c(k, 0);
    // Compositions of m into k parts, in lexicographic order.
    auto rec = [&](auto&& self, std::size_t i, int left) -> void {
      if (i + 1 == k) {
        c[i] = left;
        std::vector<double> p(k);
        for (std::size_t j = 0; j < k; ++j) p[j] = static_cast<double>(c[j]) / m;
        pts.push_back(std::move(p));
        return;
      }
      for (int v = 0; v <= left; ++v) {
        c[i] = v;
        self(self, i + 1, left - v);
      }
    };
    rec(rec, 0, m);
    return pts;
  }

 private:
  const ProblemSpec& spec_;
  const InnerDual& dual_;
  const SolverOptions& opts_;
  std::size_t ny_, nu_;
  std::vector<SimplexBlock> blocks_;
  InnerDual::Workspace ws_;
  std::vector<double> joint_;
  long long evaluations_ = 0;
};

struct StartOutcome {
  double value = -kInfinity;
  std::vector<double> q_y;
  std::vector<double> rows;
  long long evaluations = 0;
  bool converged = true;
};

std::vector<std::vector<double>> outer_starts(const ProblemSpec& spec, const SolverOptions& opts) {
  const std::size_t ny = spec.ny();
  std::vector<std::vector<double>> starts;
  starts.emplace_back(spec.p_y().probs().begin(), spec.p_y().probs().end());
  starts.emplace_back(ny, 1.0 / static_cast<double>(ny));
  for (int s = 2; s < opts.starts; ++s) {
    auto rng = make_rng(opts.seed, static_cast<std::uint64_t>(s));
    starts.push_back(dirichlet_uniform(ny, rng));
  }
  starts.resize(static_cast<std::size_t>(std::max(opts.starts, 1)));
  return starts;
}

// One outer local search: maximize the middle value over Q_Y from a start.
StartOutcome run_start(const ProblemSpec& spec, const InnerDual& dual, const SolverOptions& opts,
                       const std::vector<double>& start, std::size_t index) {
  MiddleSearch middle(spec, dual, opts);
  const std::vector<SimplexBlock> blocks{{spec.ny()}};
  std::vector<double> warm;
  std::uint64_t stream = static_cast<std::uint64_t>(index) << 32;
  StartOutcome out;

  const Objective f = [&](std::span<const double> free) {
    const auto q_y = from_free_coordinates(free, blocks);
    // Full multistart once; afterwards track the previous minimizer.
    const MiddleResult m = middle.run(q_y, &warm, warm.empty() ? opts.middle_starts : 1, stream++);
    warm = m.rows;
    const double v = m.value - kernel::kl_bits(q_y, spec.p_y().probs());
    if (v > out.value) {
      out.value = v;
      out.q_y = q_y;
      out.rows = m.rows;
    }
    return -v;
  };
  NelderMeadOptions nm;
  nm.max_evaluations = opts.max_evaluations;
  nm.f_tolerance = opts.tolerance;
  nm.x_tolerance = 1e-6;
  nm.initial_step = 0.1;
  const auto r = nelder_mead(f, to_free_coordinates(start, blocks), nm);
  out.converged = r.converged;
  // Tracking can get stuck in a local minimum of the middle problem; check
  // the winner against fresh starts.
  const MiddleResult check = middle.run(out.q_y, &out.rows, opts.middle_starts, stream++);
  const double kl = kernel::kl_bits(out.q_y, spec.p_y().probs());
  if (check.value - kl < out.value) {
    out.value = check.value - kl;
    out.rows = check.rows;
  }
  out.evaluations = middle.evaluations();
  return out;
}

// The middle value at the start point itself, used to rank starts.
StartOutcome screen_start(const ProblemSpec& spec, const InnerDual& dual, const SolverOptions& opts,
                          const std::vector<double>& start, std::size_t index) {
  MiddleSearch middle(spec, dual, opts);
  const MiddleResult m = middle.run(start, nullptr, opts.middle_starts, static_cast<std::uint64_t>(index) << 32);
  StartOutcome out;
  out.value = m.value - kernel::kl_bits(start, spec.p_y().probs());
  out.q_y = start;
  out.rows = m.rows;
  out.evaluations = middle.evaluations();
  return out;
}

int thread_count(const SolverOptions& opts) {
#ifdef _OPENMP
  return opts.threads > 0 ? opts.threads : omp_get_max_threads();
#else
  (void)opts;
  return 1;
#endif
}

// Grid mode: Q_Y on a grid, the middle on a grid with polish, then a polish
// of Q_Y around the best grid point.
StartOutcome run_grid(const ProblemSpec& spec, const InnerDual& dual, const SolverOptions& opts) {
  if (spec.nx() != 2 || spec.ny() != 2) throw DomainError("grid mode supports binary X and Y only");
  MiddleSearch middle(spec, dual, opts);
  StartOutcome out;
  const int m = std::max(1, static_cast<int>(std::lround(1.0 / opts.grid_step)));
  for (int i = 0; i <= m; ++i) {
    const double a = static_cast<double>(i) / m;
    const std::vector<double> q_y{a, 1.0 - a};
    const MiddleResult r = middle.grid(q_y, opts.middle_grid_step);
    const double v = r.value - kernel::kl_bits(q_y, spec.p_y().probs());
    if (v > out.value) {
      out.value = v;
      out.q_y = q_y;
      out.rows = r.rows;
    }
  }
  const StartOutcome polished = run_start(spec, dual, opts, out.q_y, 0);
  out.evaluations = middle.evaluations() + polished.evaluations;
  out.converged = polished.converged;
  if (polished.value > out.value) {
    out.value = polished.value;
    out.q_y = polished.q_y;
    out.rows = polished.rows;
  }
  return out;
}

ExponentResult finish(const ProblemSpec& spec, const InnerDual& dual, const SolverOptions& opts,
                      const std::vector<StartOutcome>& outcomes) {
  // First strictly better value wins, so ties go to the lowest start index.
  std::size_t best = 0;
  double lo = kInfinity;
  SolverStats stats;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].value > outcomes[best].value) best = i;
    lo = std::min(lo, outcomes[i].value);
    stats.evaluations += outcomes[i].evaluations;
    stats.converged = stats.converged && outcomes[i].converged;
  }
  const StartOutcome& top = outcomes[best];
  stats.starts = static_cast<int>(outcomes.size());
  stats.spread_across_starts = top.value - lo;

  // Re-run the middle search at the winner with extra starts to expose how
  // well the infimum is pinned down.
  MiddleSearch middle(spec, dual, opts);
  MiddleResult m = middle.run(top.q_y, &top.rows, std::max(opts.middle_starts, 2) + 2, 0xfeedULL);
  stats.middle_spread = m.spread;
  stats.evaluations += middle.evaluations();
  std::vector<double> rows = top.rows;
  if (m.value < middle.inner(top.q_y, rows)) rows = m.rows;

  const std::size_t ny = spec.ny(), nu = spec.nu(), nx = spec.nx();
  std::vector<double> joint(ny * nu);
  detail::joint_from_rows(top.q_y, rows, nu, joint);
  auto ws = dual.make_workspace();
  const InnerDual::Solution sol = dual.solve(joint, ws);

  // Rows for (y, u) cells with Q(y, u) = 0 are irrelevant to the value; keep
  // the tilted form so the certificate stays well defined.
  std::vector<double> q_x_given_yu(ny * nu * nx);
  std::copy(sol.q_x_given_yu.begin(), sol.q_x_given_yu.end(), q_x_given_yu.begin());

  ExponentResult result{0.0,
                        AuxConfiguration::from_arrays(spec, top.q_y, rows, std::move(q_x_given_yu)),
                        0.0,
                        0.0,
                        0.0,
                        stats};
  const ObjectiveBreakdown b = evaluate_objective(spec, result.achieving);
  result.value = b.value;
  result.rd_term = b.rd_term;
  result.kl_term = b.kl_term;
  result.mutual_info_yu = result.achieving.mutual_info_yu();
  result.solver_stats.inner_duality_gap = sol.value - (b.value + kernel::kl_bits(top.q_y, spec.p_y().probs()));
  if (result.value < 0.0 && result.value > -1e-9) {
    result.value = 0.0;
    result.kl_term = spec.rho() * result.rd_term;
  }
  return result;
}

ExponentResult compute(const ProblemSpec& spec, const SolverOptions& opts, bool parallel) {
  if (opts.starts < 1) throw DomainError("at least one start is required");
  const InnerDual dual(spec);
  std::vector<StartOutcome> outcomes;
  if (opts.grid_mode) {
    outcomes.push_back(run_grid(spec, dual, opts));
    return finish(spec, dual, opts, outcomes);
  }
  const auto starts = outer_starts(spec, opts);
  const long n = static_cast<long>(starts.size());
  outcomes.resize(starts.size());
  auto screen = [&](long i) {
    const auto k = static_cast<std::size_t>(i);
    outcomes[k] = screen_start(spec, dual, opts, starts[k], k);
  };
  if (parallel) {
#pragma omp parallel for schedule(dynamic, 1) num_threads(thread_count(opts))
    for (long i = 0; i < n; ++i) screen(i);
  } else {
    for (long i = 0; i < n; ++i) screen(i);
  }

  // Local searches from the best-ranked starts; ties go to the lower index.
  std::vector<std::size_t> order(starts.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return outcomes[a].value > outcomes[b].value; });
  order.resize(std::min(order.size(), static_cast<std::size_t>(std::max(opts.polished_starts, 1))));
  std::sort(order.begin(), order.end());
  const long m = static_cast<long>(order.size());
  std::vector<StartOutcome> polished(order.size());
  auto polish = [&](long j) {
    const auto k = order[static_cast<std::size_t>(j)];
    polished[static_cast<std::size_t>(j)] = run_start(spec, dual, opts, starts[k], k);
  };
  if (parallel) {
#pragma omp parallel for schedule(dynamic, 1) num_threads(thread_count(opts))
    for (long j = 0; j < m; ++j) polish(j);
  } else {
    for (long j = 0; j < m; ++j) polish(j);
  }
  long long screening_evaluations = 0;
  for (const auto& o : outcomes) screening_evaluations += o.evaluations;
  std::vector<StartOutcome> finals(std::move(polished));
  finals.front().evaluations += screening_evaluations;
  ExponentResult r = finish(spec, dual, opts, finals);
  r.solver_stats.starts = static_cast<int>(starts.size());
  return r;
}

}  // namespace

ExponentResult compute_exponent(const ProblemSpec& spec, const SolverOptions& opts) {
  return compute(spec, opts, true);
}

ExponentResult compute_exponent_serial(const ProblemSpec& spec, const SolverOptions& opts) {
  return compute(spec, opts, false);
}

}  // namespace sideguess
