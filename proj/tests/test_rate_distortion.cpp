#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles/brute_force.hpp"
#include "sideguess/rate_distortion.hpp"
#include "sideguess/simplex.hpp"

using namespace sideguess;

namespace {

const Alphabet kBin = Alphabet::indexed(2);

Pmf bern(double p) { return Pmf({1.0 - p, p}); }

CondPmf rows_of(std::initializer_list<double> p1) {
  std::vector<double> r;
  for (double p : p1) {
    r.push_back(1.0 - p);
    r.push_back(p);
  }
  return CondPmf(Alphabet::indexed(p1.size()), kBin, r);
}

}  // namespace

TEST_CASE("distortion spec rejects uncoverable budgets") {
  CHECK_THROWS_AS(DistortionSpec(kBin, Alphabet::indexed(1), {0.0, 1.0}, 0.5), DomainError);
  CHECK_NOTHROW(DistortionSpec(kBin, Alphabet::indexed(1), {0.0, 1.0}, 1.0));
  CHECK_THROWS_AS(DistortionSpec(kBin, kBin, {0.0, -1.0, 1.0, 0.0}, 0.5), DomainError);
  CHECK_THROWS_AS(DistortionSpec(kBin, kBin, {0.0, 1.0, 1.0}, 0.5), StructuralError);
  CHECK(DistortionSpec::hamming(kBin, 0.1).coverable_budget() == 0.0);
}

TEST_CASE("rd_function examples") {
  const auto spec = DistortionSpec::hamming(kBin, 0.1);
  const RdResult r = rd_function(bern(0.25), spec);
  CHECK(std::abs(r.rate - 0.342282530869851643) < 1e-6);
  CHECK(r.achieved_distortion <= 0.1 + 1e-9);
  CHECK(std::abs(r.achieved_distortion - 0.1) < 1e-9);

  const RdResult lossless = rd_function(bern(0.25), spec.with_budget(0.0));
  CHECK(std::abs(lossless.rate - 0.8112781244591328639) < 1e-12);
  CHECK(lossless.achieved_distortion == 0.0);

  for (double budget : {0.25, 0.3, 1.0}) {
    const RdResult z = rd_function(bern(0.25), spec.with_budget(budget));
    CHECK(z.rate == 0.0);
    CHECK(z.achieved_distortion <= budget);
  }
}

TEST_CASE("distortion_of examples") {
  const auto spec = DistortionSpec::hamming(kBin, 0.1);
  CHECK(distortion_of(bern(0.25), CondPmf::identity(kBin), spec) == 0.0);
  const CondPmf constant(kBin, kBin, {1.0, 0.0, 1.0, 0.0});
  CHECK(distortion_of(bern(0.25), constant, spec) == doctest::Approx(0.25));
  const CondPmf flip(kBin, kBin, {0.9, 0.1, 0.1, 0.9});
  CHECK(distortion_of(bern(0.25), flip, spec) == doctest::Approx(0.1).epsilon(1e-14));
}

TEST_CASE("conditional_rd examples") {
  const auto spec = DistortionSpec::hamming(kBin, 0.15);

  const Pmf one = Pmf::point_mass(Alphabet::indexed(1), 0);
  const RdResult degenerate = conditional_rd(one, rows_of({0.3}), spec);
  CHECK(degenerate.rate == rd_function(bern(0.3), spec).rate);

  const RdResult same = conditional_rd(Pmf({0.3, 0.7}), rows_of({0.3, 0.3}), spec);
  CHECK(std::abs(same.rate - rd_function(bern(0.3), spec).rate) < 1e-6);

  // Rows Bern(0.1), Bern(0.4): the common-slope allocation spends crossover
  // 0.1 in the first cell and 0.2 in the second.
  const RdResult split = conditional_rd(Pmf({0.5, 0.5}), rows_of({0.1, 0.4}), spec);
  const double closed = oracle::binary_hamming_conditional_rd({0.5, 0.5}, {0.1, 0.4}, 0.15);
  const double grid = oracle::grid_conditional_rd({0.5, 0.5}, {0.1, 0.4}, {0.0, 1.0, 1.0, 0.0}, 0.15, 0.005);
  CHECK(std::abs(closed - 0.5 * (oracle::h2(0.4) - oracle::h2(0.2))) < 1e-12);
  CHECK(std::abs(split.rate - closed) < 1e-6);
  CHECK(std::abs(split.rate - grid) < 2e-3);
  CHECK(split.rate <= grid + 1e-9);
  CHECK(split.rate <= per_u_budget_rd(Pmf({0.5, 0.5}), rows_of({0.1, 0.4}), spec) + 1e-9);
}

TEST_CASE("property: achieving kernel reproduces rate and distortion") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t nu = 1 + rng() % 3, nx = 2 + rng() % 2;
    const Alphabet ax = Alphabet::indexed(nx);
    std::vector<double> d(nx * nx);
    for (std::size_t i = 0; i < nx; ++i)
      for (std::size_t j = 0; j < nx; ++j) d[i * nx + j] = i == j ? 0.0 : 0.2 + 0.8 * (rng() % 1000) / 1000.0;
    const double budget = 0.02 + 0.3 * (rng() % 1000) / 1000.0;
    const DistortionSpec spec(ax, ax, d, budget);
    const Pmf q_u(dirichlet_uniform(nu, rng));
    std::vector<double> rows;
    for (std::size_t u = 0; u < nu; ++u) {
      const auto r = dirichlet_uniform(nx, rng);
      rows.insert(rows.end(), r.begin(), r.end());
    }
    const CondPmf q_xu(Alphabet::indexed(nu), ax, rows);
    const RdResult res = conditional_rd(q_u, q_xu, spec);
    const auto joints = per_u_joints(q_xu, res.achieving_kernel);
    CHECK(std::abs(conditional_mutual_information(q_u, joints) - res.rate) < 1e-8);
    CHECK(std::abs(distortion_of(q_u, q_xu, res.achieving_kernel, spec) - res.achieved_distortion) < 1e-9);
    CHECK(res.achieved_distortion <= budget + 1e-9);
    CHECK(res.rate >= 0.0);
    CHECK(res.rate <= per_u_budget_rd(q_u, q_xu, spec) + 1e-9);
  }
}

TEST_CASE("property: rd nonincreasing and convex in the budget") {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 10; ++trial) {
    const Alphabet a3 = Alphabet::indexed(3);
    const Pmf q(dirichlet_uniform(3, rng));
    std::vector<double> d{0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0};
    const DistortionSpec base(a3, a3, d, 0.0);
    std::vector<double> rates;
    const int n = 12;
    for (int i = 0; i <= n; ++i) rates.push_back(rd_function(q, base.with_budget(0.05 + 0.05 * i)).rate);
    for (int i = 0; i < n; ++i) CHECK(rates[i + 1] <= rates[i] + 1e-9);
    for (int i = 1; i < n; ++i) CHECK(rates[i] <= 0.5 * (rates[i - 1] + rates[i + 1]) + 1e-7);
    CHECK(rd_function(q, base).rate <= entropy(q) + 1e-12);
  }
}

TEST_CASE("binary hamming closed form over a grid") {
  const auto spec = DistortionSpec::hamming(kBin, 0.0);
  for (double p : {0.1, 0.2, 0.3, 0.4, 0.5}) {
    for (int k = 1; k <= 10; ++k) {
      const double budget = p * k / 11.0;
      const double r = rd_function(bern(p), spec.with_budget(budget)).rate;
      CHECK_MESSAGE(std::abs(r - oracle::binary_hamming_rd(p, budget)) < 1e-6, "p=", p, " D=", budget);
    }
  }
}

TEST_CASE("linear piece of the curve is time-shared") {
  // Two reconstruction letters equally good for every source letter give a
  // straight R-D segment; the budget must still be met exactly.
  const Alphabet ax = Alphabet::indexed(2), axh = Alphabet::indexed(3);
  const DistortionSpec spec(ax, axh, {0.0, 1.0, 0.5, 1.0, 0.0, 0.5}, 0.3);
  const RdResult r = rd_function(Pmf({0.5, 0.5}), spec);
  CHECK(r.achieved_distortion <= 0.3 + 1e-9);
  CHECK(std::abs(r.achieved_distortion - 0.3) < 1e-6);
}
