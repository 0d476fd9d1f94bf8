#include "sideguess/exponent.hpp"

#include <algorithm>
#include <cmath>

#include "search_support.hpp"
#include "sideguess/simplex.hpp"

namespace sideguess {

namespace {

constexpr std::size_t kMaxObservationLetters = 32;

JointPmf prune(const JointPmf& p) {
  const Pmf px = p.row_marginal(), py = p.col_marginal();
  std::vector<std::size_t> xs, ys;
  for (std::size_t x = 0; x < p.rows(); ++x)
    if (px[x] > 0.0) xs.push_back(x);
  for (std::size_t y = 0; y < p.cols(); ++y)
    if (py[y] > 0.0) ys.push_back(y);
  std::vector<std::string> xl, yl;
  for (auto x : xs) xl.push_back(p.row_alphabet().symbol(x));
  for (auto y : ys) yl.push_back(p.col_alphabet().symbol(y));
  std::vector<double> probs;
  for (auto x : xs)
    for (auto y : ys) probs.push_back(p.at(x, y));
  return JointPmf(Alphabet(std::move(xl)), Alphabet(std::move(yl)), std::move(probs));
}

DistortionSpec prune_sources(const JointPmf& original, const DistortionSpec& d) {
  if (!(original.row_alphabet() == d.source_alphabet())) {
    throw StructuralError("distortion source alphabet must match the rows of P_XY");
  }
  const Pmf px = original.row_marginal();
  std::vector<std::size_t> keep;
  for (std::size_t x = 0; x < px.size(); ++x)
    if (px[x] > 0.0) keep.push_back(x);
  return d.restricted_to_sources(keep);
}

}  // namespace

ProblemSpec::ProblemSpec(JointPmf p_xy, DistortionSpec distortion, double rho, double rate)
    : p_xy_(prune(p_xy)), distortion_(prune_sources(p_xy, distortion)), rho_(rho), rate_(rate),
      p_x_(p_xy_.row_marginal()), p_y_(p_xy_.col_marginal()), p_x_given_y_(condition(p_xy_.transposed())) {
  if (!(rho > 0.0) || !std::isfinite(rho)) throw DomainError("rho must be positive and finite");
  if (!(rate >= 0.0) || !std::isfinite(rate)) throw DomainError("rate must be nonnegative and finite");
  if (ny() > kMaxObservationLetters) throw DomainError("at most 32 observation letters are supported");
}

ProblemSpec ProblemSpec::with_rate(double rate) const { return ProblemSpec(p_xy_, distortion_, rho_, rate); }
ProblemSpec ProblemSpec::with_budget(double budget) const {
  return ProblemSpec(p_xy_, distortion_.with_budget(budget), rho_, rate_);
}
ProblemSpec ProblemSpec::with_rho(double rho) const { return ProblemSpec(p_xy_, distortion_, rho, rate_); }

AuxConfiguration AuxConfiguration::from_arrays(const ProblemSpec& spec, std::vector<double> q_y,
                                               std::vector<double> q_u_given_y, std::vector<double> q_x_given_yu) {
  Alphabet u = Alphabet::indexed(spec.nu());
  Alphabet yu = product_alphabet(spec.y_alphabet(), u);
  return AuxConfiguration{u, Pmf(spec.y_alphabet(), std::move(q_y)),
                          CondPmf(spec.y_alphabet(), u, std::move(q_u_given_y)),
                          CondPmf(std::move(yu), spec.x_alphabet(), std::move(q_x_given_yu))};
}

Pmf AuxConfiguration::q_u() const { return q_yu().col_marginal(); }

JointPmf AuxConfiguration::q_yu() const { return compose(q_y, q_u_given_y); }

CondPmf AuxConfiguration::q_x_given_u() const {
  const std::size_t ny = q_y.size(), nu = u_alphabet.size(), nx = q_x_given_yu.target_size();
  const JointPmf j = q_yu();
  std::vector<double> rows(nu * nx, 0.0);
  for (std::size_t u = 0; u < nu; ++u) {
    double w = 0.0;
    for (std::size_t y = 0; y < ny; ++y) w += j.at(y, u);
    for (std::size_t y = 0; y < ny; ++y) {
      const double share = w > 0.0 ? j.at(y, u) / w : 1.0 / static_cast<double>(ny);
      for (std::size_t x = 0; x < nx; ++x) rows[u * nx + x] += share * q_x_given_yu.at(y * nu + u, x);
    }
  }
  for (std::size_t u = 0; u < nu; ++u) kernel::normalize(std::span<double>(rows).subspan(u * nx, nx));
  return CondPmf(u_alphabet, q_x_given_yu.target_alphabet(), std::move(rows));
}

double AuxConfiguration::mutual_info_yu() const { return mutual_information(q_yu()); }

ObjectiveBreakdown evaluate_objective(const ProblemSpec& spec, const AuxConfiguration& cfg, bool with_per_u_reading) {
  const std::size_t nx = spec.nx(), ny = spec.ny(), nu = spec.nu();
  if (!(cfg.q_y.alphabet() == spec.y_alphabet()) || cfg.u_alphabet.size() != nu ||
      !(cfg.q_u_given_y.given_alphabet() == spec.y_alphabet()) || cfg.q_u_given_y.target_size() != nu ||
      cfg.q_x_given_yu.given_size() != ny * nu || !(cfg.q_x_given_yu.target_alphabet() == spec.x_alphabet())) {
    throw StructuralError("auxiliary configuration does not match the problem alphabets");
  }

  ObjectiveBreakdown out;
  const Pmf q_u = cfg.q_u();
  const CondPmf q_x_u = cfg.q_x_given_u();
  out.rd = conditional_rd(q_u, q_x_u, spec.distortion());
  out.rd_term = out.rd.rate;

  // Direct route: D(Q_XYU || P_XY Q_{U|Y}) over the full joint.
  std::vector<double> q(nx * ny * nu), p(nx * ny * nu);
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t y = 0; y < ny; ++y)
      for (std::size_t u = 0; u < nu; ++u) {
        const std::size_t i = (x * ny + y) * nu + u;
        q[i] = cfg.q_y[y] * cfg.q_u_given_y.at(y, u) * cfg.q_x_given_yu.at(y * nu + u, x);
        p[i] = spec.p_xy().at(x, y) * cfg.q_u_given_y.at(y, u);
      }
  out.kl_term = kernel::kl_bits(q, p);
  out.value = std::isinf(out.kl_term) ? -kInfinity : spec.rho() * out.rd_term - out.kl_term;

  // Decomposed route: sum_u Q_U(u) Psi_u with the rate apportioned per u by
  // the achieving kernel.
  const auto joints = per_u_joints(q_x_u, out.rd.achieving_kernel);
  const double h_y = entropy(cfg.q_y);
  const JointPmf q_yu = cfg.q_yu();
  double decomposed = 0.0;
  for (std::size_t u = 0; u < nu; ++u) {
    const double w = q_u[u];
    if (w <= 0.0) continue;
    std::vector<double> y_given_u(ny), qj(nx * ny), pj(nx * ny);
    for (std::size_t y = 0; y < ny; ++y) y_given_u[y] = q_yu.at(y, u) / w;
    for (std::size_t x = 0; x < nx; ++x)
      for (std::size_t y = 0; y < ny; ++y) {
        qj[x * ny + y] = y_given_u[y] * cfg.q_x_given_yu.at(y * nu + u, x);
        pj[x * ny + y] = spec.p_xy().at(x, y);
      }
    const double kl_u = kernel::kl_bits(qj, pj);
    if (std::isinf(kl_u)) {
      decomposed = -kInfinity;
      break;
    }
    const double psi =
        spec.rho() * mutual_information(joints[u]) + h_y - kernel::entropy_bits(y_given_u) - kl_u;
    decomposed += w * psi;
  }
  out.decomposed_value = decomposed;
  if (with_per_u_reading) out.per_u_budget_rd_term = per_u_budget_rd(q_u, q_x_u, spec.distortion());
  return out;
}

double objective(const ProblemSpec& spec, const AuxConfiguration& cfg) { return evaluate_objective(spec, cfg).value; }

ArikanBounds arikan_bounds(const Pmf& p_x, double rho) {
  if (!(rho > 0.0)) throw DomainError("rho must be positive");
  const double exponent = rho * renyi_entropy(p_x, 1.0 / (1.0 + rho));
  ArikanBounds b;
  b.upper = std::exp2(exponent);
  b.lower = b.upper / std::pow(1.0 + std::log2(static_cast<double>(p_x.size())), rho);
  return b;
}

namespace {

void require_positive(const Pmf& p_x, const DistortionSpec& distortion) {
  for (double v : p_x.probs())
    if (!(v > 0.0)) throw DomainError("source pmf must be strictly positive");
  if (!(p_x.alphabet() == distortion.source_alphabet())) throw StructuralError("source alphabet mismatch");
}

std::vector<std::vector<double>> source_starts(const Pmf& p_x, double rho, int count, std::uint64_t seed) {
  const std::size_t n = p_x.size();
  std::vector<std::vector<double>> starts;
  starts.emplace_back(p_x.probs().begin(), p_x.probs().end());
  starts.emplace_back(n, 1.0 / static_cast<double>(n));
  std::vector<double> tilted(n);
  for (std::size_t i = 0; i < n; ++i) tilted[i] = std::pow(p_x[i], 1.0 / (1.0 + rho));
  kernel::normalize(tilted);
  starts.push_back(tilted);
  for (int s = 3; s < count; ++s) {
    auto rng = make_rng(seed, static_cast<std::uint64_t>(s));
    starts.push_back(dirichlet_uniform(n, rng));
  }
  return starts;
}

}  // namespace

double no_help_exponent(const Pmf& p_x, const DistortionSpec& distortion, double rho, const SolverOptions& opts) {
  require_positive(p_x, distortion);
  if (!(rho > 0.0)) throw DomainError("rho must be positive");
  const std::size_t n = p_x.size();
  const std::vector<SimplexBlock> blocks{{n}};
  auto value_at = [&](std::span<const double> q) {
    const Pmf qx(p_x.alphabet(), {q.begin(), q.end()});
    return rho * rd_function(qx, distortion).rate - kl_divergence(qx, p_x);
  };
  const Objective f = [&](std::span<const double> free) {
    return -value_at(from_free_coordinates(free, blocks));
  };
  NelderMeadOptions nm;
  nm.max_evaluations = 600;
  nm.f_tolerance = opts.tolerance;
  nm.x_tolerance = 1e-9;
  double best = 0.0;  // Q_X = P_X is always available and scores >= 0
  for (const auto& start : source_starts(p_x, rho, std::min(opts.starts, 8), opts.seed)) {
    const auto r = nelder_mead(f, to_free_coordinates(start, blocks), nm);
    best = std::max(best, -r.value);
  }
  return best;
}

double direct_help_exponent(const Pmf& p_x, const DistortionSpec& distortion, double rho, double rate,
                            const SolverOptions& opts) {
  require_positive(p_x, distortion);
  if (!(rho > 0.0)) throw DomainError("rho must be positive");
  if (!(rate >= 0.0)) throw DomainError("rate must be nonnegative");
  const std::size_t nx = p_x.size(), nu = nx + 1;
  const Alphabet u_alpha = Alphabet::indexed(nu);
  const std::vector<SimplexBlock> x_blocks{{nx}};
  const auto u_blocks = detail::row_blocks(nx, nu);

  // Conditional R-D of the decomposition Q_X(x) Q(u | x). Consecutive calls
  // are close, so each starts its slope search where the last one ended.
  double slope_hint = 0.0;
  auto middle_value = [&](std::span<const double> q_x, std::span<const double> rows) {
    std::vector<double> q_u(nu, 0.0), x_given_u(nu * nx, 0.0);
    for (std::size_t x = 0; x < nx; ++x)
      for (std::size_t u = 0; u < nu; ++u) q_u[u] += q_x[x] * rows[x * nu + u];
    for (std::size_t u = 0; u < nu; ++u)
      for (std::size_t x = 0; x < nx; ++x)
        x_given_u[u * nx + x] = q_u[u] > 0.0 ? q_x[x] * rows[x * nu + u] / q_u[u] : q_x[x];
    const Pmf qu(u_alpha, q_u);
    for (std::size_t u = 0; u < nu; ++u) kernel::normalize(std::span<double>(x_given_u).subspan(u * nx, nx));
    RdOptions ro;
    ro.slope_hint = slope_hint;
    const RdResult r = conditional_rd(qu, CondPmf(u_alpha, p_x.alphabet(), x_given_u), distortion, ro);
    if (r.slope > 0.0 && std::isfinite(r.slope)) slope_hint = r.slope;
    return r.rate;
  };

  NelderMeadOptions middle_nm;
  middle_nm.max_evaluations = opts.middle_max_evaluations;
  middle_nm.f_tolerance = opts.tolerance;
  middle_nm.x_tolerance = 1e-4;

  // Multistart when warm is empty; otherwise a local polish of warm.
  auto middle = [&](std::span<const double> q_x, std::vector<double>& warm, int starts, std::uint64_t stream) {
    const Objective f = [&](std::span<const double> free) {
      auto rows = from_free_coordinates(free, u_blocks);
      const double raw = detail::retract_to_rate(q_x, rows, nu, rate);
      const double penalty = raw > rate ? 1e-3 * (raw - rate) : 0.0;
      return middle_value(q_x, rows) + penalty;
    };
    std::vector<std::vector<double>> inits;
    if (!warm.empty()) inits.push_back(warm);
    inits.push_back(detail::copy_rows(nx, nu));
    auto rng = make_rng(opts.seed ^ 0xd1cec0deULL, stream);
    while (static_cast<int>(inits.size()) < std::max(starts, 1)) {
      std::vector<double> rows;
      for (std::size_t x = 0; x < nx; ++x) {
        const auto r = dirichlet_uniform(nu, rng);
        rows.insert(rows.end(), r.begin(), r.end());
      }
      inits.push_back(rows);
    }
    inits.resize(static_cast<std::size_t>(std::max(starts, 1)));
    double best = kInfinity;
    for (std::size_t i = 0; i < inits.size(); ++i) {
      middle_nm.initial_step = i == 0 && !warm.empty() ? 0.02 : 0.2;
      auto r = nelder_mead(f, to_free_coordinates(inits[i], u_blocks), middle_nm);
      auto rows = from_free_coordinates(r.x, u_blocks);
      detail::retract_to_rate(q_x, rows, nu, rate);
      const double v = middle_value(q_x, rows);
      if (v < best) {
        best = v;
        warm = rows;
      }
    }
    return best;
  };

  NelderMeadOptions outer_nm;
  outer_nm.max_evaluations = opts.max_evaluations;
  outer_nm.f_tolerance = opts.tolerance;
  outer_nm.x_tolerance = 1e-6;
  double best = 0.0;
  std::uint64_t stream = 0;
  for (const auto& start : source_starts(p_x, rho, std::min(opts.starts, 3), opts.seed)) {
    std::vector<double> warm;
    std::vector<double> top_x;
    std::vector<double> top_rows;
    double top = -kInfinity;
    const Objective f = [&](std::span<const double> free) {
      const auto q_x = from_free_coordinates(free, x_blocks);
      const double v = rho * middle(q_x, warm, warm.empty() ? opts.middle_starts : 1, stream++) -
                       kernel::kl_bits(q_x, p_x.probs());
      if (v > top) {
        top = v;
        top_x = q_x;
        top_rows = warm;
      }
      return -v;
    };
    nelder_mead(f, to_free_coordinates(start, x_blocks), outer_nm);
    // The tracked middle may sit in a local minimum; recheck the winner.
    const double check = rho * middle(top_x, top_rows, opts.middle_starts + 1, stream++) -
                         kernel::kl_bits(top_x, p_x.probs());
    best = std::max(best, std::min(top, check));
  }
  return best;
}

}  // namespace sideguess
