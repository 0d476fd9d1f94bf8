#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "oracles/brute_force.hpp"
#include "sideguess/finite_n.hpp"
#include "sideguess/simplex.hpp"

using namespace sideguess;

namespace {

const Alphabet kBin = Alphabet::indexed(2);

JointPmf dsbs(double e) { return JointPmf(kBin, kBin, {(1 - e) / 2, e / 2, e / 2, (1 - e) / 2}); }

ProblemSpec dsbs_spec(double e, double budget, double rho) {
  return ProblemSpec(dsbs(e), DistortionSpec::hamming(kBin, budget), rho, 0.0);
}

// P^n over sequences, first symbol most significant.
std::vector<double> product_pmf(const std::vector<double>& p, int n) {
  std::vector<double> out{1.0};
  for (int i = 0; i < n; ++i) {
    std::vector<double> next;
    for (double a : out)
      for (double b : p) next.push_back(a * b);
    out = next;
  }
  return out;
}

}  // namespace

TEST_CASE("covers") {
  const auto ham = DistortionSpec::hamming(kBin, 0.5);
  const std::vector<std::size_t> a{0, 1}, b{1, 1};
  CHECK(covers(a, a, ham.with_budget(0.1), 2));
  CHECK(covers(a, b, ham, 2));
  CHECK_FALSE(covers(a, b, ham.with_budget(0.4), 2));
  CHECK_THROWS_AS(covers(a, std::vector<std::size_t>{1}, ham, 2), StructuralError);
}

TEST_CASE("sequence indexing is lexicographic") {
  CHECK(sequence_count(3, 4) == 81);
  CHECK(sequence_symbols(5, 2, 3) == std::vector<std::size_t>{1, 0, 1});
}

TEST_CASE("optimal order examples") {
  const auto ham = DistortionSpec::hamming(kBin, 0.0);
  const OrderResult r = optimal_order_moment(std::vector<double>{0.75, 0.25}, ham, 1, 1.0);
  CHECK(r.moment == doctest::Approx(1.25).epsilon(1e-15));
  CHECK(r.order == std::vector<std::uint32_t>{0, 1});
  CHECK(r.exact);

  // Brute-force permutation value.
  const OrderResult u = optimal_order_moment(std::vector<double>(4, 0.25), ham.with_budget(0.5), 2, 1.0);
  CHECK(u.moment == doctest::Approx(1.25).epsilon(1e-15));
  CHECK(u.order.size() == 4);
  CHECK(u.order.front() == 0);
}

TEST_CASE("lossless order equals the sorted-probability moment") {
  auto rng = make_rng(11, 0);
  for (int t = 0; t < 30; ++t) {
    const std::size_t k = 2 + t % 7;
    const auto p = dirichlet_uniform(k, rng);
    const auto ham = DistortionSpec::hamming(Alphabet::indexed(k), 0.0);
    for (double rho : {0.5, 1.0, 2.0}) {
      const double want = oracle::sorted_order_moment(p, rho);
      CHECK(optimal_order_moment(p, ham, 1, rho).moment == doctest::Approx(want).epsilon(1e-13));
      CHECK(optimal_order_moment(p, ham, 1, rho, OrderMode::greedy).moment ==
            doctest::Approx(want).epsilon(1e-13));
    }
  }
}

TEST_CASE("greedy is an upper bound on the exhaustive order") {
  auto rng = make_rng(12, 0);
  const auto ham = DistortionSpec::hamming(kBin, 1.0 / 3.0);
  for (int t = 0; t < 40; ++t) {
    const auto w = dirichlet_uniform(8, rng);
    const OrderResult ex = optimal_order_moment(w, ham, 3, 1.5);
    const OrderResult gr = optimal_order_moment(w, ham, 3, 1.5, OrderMode::greedy);
    CHECK(gr.moment >= ex.moment - 1e-14);
    CHECK_FALSE(gr.exact);
    CHECK(std::set<std::uint32_t>(gr.order.begin(), gr.order.end()).size() == gr.order.size());
  }
}

TEST_CASE("exhaustive order is capped at eight candidates") {
  const auto ham = DistortionSpec::hamming(Alphabet::indexed(3), 0.5);
  CHECK_THROWS_AS(optimal_order_moment(std::vector<double>(9, 1.0 / 9), ham, 2, 1.0), SizeCapError);
  CHECK_NOTHROW(optimal_order_moment(std::vector<double>(9, 1.0 / 9), ham, 2, 1.0, OrderMode::greedy));
}

TEST_CASE("helper oracle reference values") {
  // From tests/oracles/finite_n_values.py (all tables, all permutations).
  const OracleResult a = best_helper_moment({dsbs_spec(0.1, 0.0, 1.0), 1, 2});
  CHECK(a.moment == doctest::Approx(1.1).epsilon(1e-14));
  CHECK(a.exact);
  CHECK(a.best_helper.table == std::vector<std::uint32_t>{0, 1});

  CHECK(best_helper_moment({dsbs_spec(0.1, 0.0, 1.0), 2, 2}).moment == doctest::Approx(1.7).epsilon(1e-14));
  CHECK(best_helper_moment({dsbs_spec(0.2, 0.5, 2.0), 2, 3}).moment == doctest::Approx(1.21).epsilon(1e-14));
}

TEST_CASE("helper oracle sanity") {
  for (int n : {1, 2}) {
    const ProblemSpec s = dsbs_spec(0.15, 0.0, 1.0);
    const auto marginal = product_pmf({0.5, 0.5}, n);
    const double no_help = optimal_order_moment(marginal, s.distortion(), n, 1.0).moment;
    CHECK(best_helper_moment({s, n, 1}).moment == doctest::Approx(no_help).epsilon(1e-12));

    const ProblemSpec diag(JointPmf(kBin, kBin, {0.7, 0.0, 0.0, 0.3}), DistortionSpec::hamming(kBin, 0.0), 1.0, 0.0);
    const OracleResult full = best_helper_moment({diag, n, sequence_count(2, n)});
    CHECK(full.moment == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(full.normalized_exponent == doctest::Approx(0.0).epsilon(1e-14));

    double prev = kInfinity;
    for (std::uint64_t m = 1; m <= sequence_count(2, n); ++m) {
      const double v = best_helper_moment({dsbs_spec(0.2, 0.5, 2.0), n, m}).moment;
      CHECK(v <= prev + 1e-14);
      prev = v;
    }
  }
}

TEST_CASE("helper oracle monotone in D and rho") {
  for (int n : {1, 2}) {
    double prev = kInfinity;
    for (double d : {0.0, 0.5, 1.0}) {
      const double v = best_helper_moment({dsbs_spec(0.2, d, 1.0), n, 2}).moment;
      CHECK(v <= prev + 1e-14);
      prev = v;
    }
    prev = 0.0;
    for (double rho : {0.5, 1.0, 2.0}) {
      const double v = best_helper_moment({dsbs_spec(0.2, 0.0, rho), n, 2}).moment;
      CHECK(v >= prev - 1e-14);
      prev = v;
    }
  }
}

TEST_CASE("lossless oracle lies within Arikan's bounds") {
  auto rng = make_rng(13, 0);
  for (int t = 0; t < 20; ++t) {
    const auto p = dirichlet_uniform(3, rng);
    std::vector<double> joint;
    for (double v : p) joint.insert(joint.end(), {v / 2, v / 2});
    const ProblemSpec s(JointPmf(Alphabet::indexed(3), kBin, joint),
                        DistortionSpec::hamming(Alphabet::indexed(3), 0.0), 1.0, 0.0);
    const double m = best_helper_moment({s, 1, 1}).moment;
    const ArikanBounds b = arikan_bounds(Pmf(p), 1.0);
    CHECK(m >= b.lower);
    CHECK(m <= b.upper);
  }
}

TEST_CASE("random-restart helper search is an upper bound") {
  const FiniteNInstance inst{dsbs_spec(0.2, 0.5, 2.0), 2, 2};
  OracleOptions o;
  o.helper_mode = HelperMode::random_restart;
  o.restarts = 4;
  o.max_evaluations = 200;
  const OracleResult r = best_helper_moment(inst, o);
  CHECK_FALSE(r.exact);
  CHECK(r.moment >= best_helper_moment(inst).moment - 1e-14);
  CHECK(r.moment == best_helper_moment_serial(inst, o).moment);
}

TEST_CASE("orders cover every source and repeat nothing") {
  const FiniteNInstance inst{dsbs_spec(0.2, 0.5, 1.0), 2, 2};
  const OracleResult r = best_helper_moment(inst);
  for (const auto& order : r.best_orders.per_message) {
    CHECK(std::set<std::uint32_t>(order.begin(), order.end()).size() == order.size());
    for (std::uint64_t x = 0; x < 4; ++x) {
      bool hit = false;
      for (auto c : order) hit = hit || covers(sequence_symbols(x, 2, 2), sequence_symbols(c, 2, 2),
                                               inst.spec.distortion(), 2);
      CHECK(hit);
    }
  }
}

TEST_CASE("instance caps") {
  CHECK_THROWS_AS(FiniteNInstance({dsbs_spec(0.1, 0.0, 1.0), 0, 1}).validate(), StructuralError);
  CHECK_THROWS_AS(FiniteNInstance({dsbs_spec(0.1, 0.0, 1.0), 1, 0}).validate(), StructuralError);
  CHECK_THROWS_AS(FiniteNInstance({dsbs_spec(0.1, 0.0, 1.0), 10, 1}).validate(), SizeCapError);
  CHECK_THROWS_AS(best_helper_moment({dsbs_spec(0.1, 0.5, 1.0), 5, 3}), SizeCapError);
}

TEST_CASE("reverse Wyner check") {
  const ReverseWyner point = reverse_wyner_check(Pmf::point_mass(Alphabet::indexed(4), 2));
  CHECK(point.lhs == 0.0);
  CHECK(point.rhs == doctest::Approx(-std::log2(std::log(4.0) + 1.5)));
  CHECK(point.holds);

  const ReverseWyner u = reverse_wyner_check(Pmf::uniform(kBin));
  CHECK(u.lhs == doctest::Approx(0.5));
  CHECK(u.rhs == doctest::Approx(1.0 - std::log2(std::log(2.0) + 1.5)));
  CHECK(u.rhs == doctest::Approx(-0.133).epsilon(1e-2));

  auto rng = make_rng(14, 0);
  for (int t = 0; t < 300; ++t) CHECK(reverse_wyner_check(Pmf(dirichlet_uniform(2 + t % 15, rng))).holds);
  for (std::size_t k : {2u, 16u, 1000u}) CHECK(reverse_wyner_check(Pmf::uniform(Alphabet::indexed(k))).holds);
}

TEST_CASE("message budget") {
  CHECK(message_budget(0.0, 3) == 1);
  CHECK(message_budget(0.5, 1) == 1);
  CHECK(message_budget(0.5, 2) == 2);
  CHECK(message_budget(1.0 / 3.0, 3) == 2);
  CHECK(message_budget(0.1, 10) == 2);
  CHECK(message_budget(1.0, 3) == 8);
}

TEST_CASE("trend report at zero rate sits inside the lossless bounds") {
  const ProblemSpec s = dsbs_spec(0.2, 0.0, 1.0);
  const TrendReport t = exponent_trend_report(s, {1, 2, 3});
  REQUIRE(t.rows.size() == 3);
  const double h = renyi_entropy(s.p_x(), 0.5);
  for (const auto& row : t.rows) {
    CHECK(row.exact);
    CHECK(row.messages == 1);
    CHECK(row.normalized_exponent <= h + 1e-12);
    CHECK(row.normalized_exponent >= h - std::log2(1.0 + row.n) / row.n - 1e-12);
  }
  CHECK(t.exponent == doctest::Approx(h).epsilon(1e-6));

  const TrendReport flat = exponent_trend_report(dsbs_spec(0.2, 1.0, 1.0), {1, 2});
  for (const auto& row : flat.rows) CHECK(row.normalized_exponent == 0.0);
  CHECK(flat.exponent == 0.0);
}
