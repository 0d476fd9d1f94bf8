#include <string>

#include "doctest.h"
#include "sideguess/instance_io.hpp"
#include "sideguess/simplex.hpp"

using namespace sideguess;

namespace {

const std::string kGood = R"(# comment
x_alphabet = [0, 1]
y_alphabet = ["lo", "hi#1"]   # '#' inside a string is kept
xhat_alphabet = [0, 1]
p_xy = [[0.45, 0.05],
        [0.05, 0.45]]
distortion = [[0, 1], [1, 0]]
D = 0.05
rho = 1
R = 0.3
)";

std::string replace(std::string s, const std::string& from, const std::string& to) {
  const auto i = s.find(from);
  REQUIRE(i != std::string::npos);
  return s.replace(i, from.size(), to);
}

std::string error_of(const std::string& text) {
  try {
    parse_instance(text);
  } catch (const InstanceError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("parses a well-formed instance") {
  const InstanceFile f = parse_instance(kGood);
  CHECK(f.x_alphabet == std::vector<std::string>{"0", "1"});
  CHECK(f.y_alphabet == std::vector<std::string>{"lo", "hi#1"});
  CHECK(f.p_xy[1][0] == 0.05);
  CHECK(f.D == 0.05);
  CHECK(f.R == 0.3);
  const ProblemSpec s = f.to_spec();
  CHECK(s.nx() == 2);
  CHECK(s.p_y()[0] == doctest::Approx(0.5));
}

TEST_CASE("dump round-trips exactly") {
  const InstanceFile f = parse_instance(kGood);
  const InstanceFile g = parse_instance(dump_instance(f));
  CHECK(g.to_spec() == f.to_spec());
  CHECK(dump_instance(g) == dump_instance(f));

  auto rng = make_rng(21, 0);
  for (int t = 0; t < 20; ++t) {
    InstanceFile r;
    r.x_alphabet = {"a", "b", "c"};
    r.y_alphabet = {"0", "1"};
    r.xhat_alphabet = {"a", "b", "c"};
    const auto p = dirichlet_uniform(6, rng);
    r.p_xy = {{p[0], p[1]}, {p[2], p[3]}, {p[4], p[5]}};
    r.distortion = {{0, 1, 2}, {1, 0, 1}, {2, 1, 0}};
    r.D = 0.1 * t;
    r.rho = 0.5 + 0.1 * t;
    r.R = 1.0 / (t + 3);
    const InstanceFile back = parse_instance(dump_instance(r));
    CHECK(back.p_xy == r.p_xy);
    CHECK(back.to_spec() == r.to_spec());
  }
}

TEST_CASE("shipped instances parse") {
  for (const char* name : {"golden_binary.inst", "diagonal_binary.inst", "degenerate.inst"})
    CHECK_NOTHROW(load_instance(std::string(SIDEGUESS_DATA_DIR) + "/" + name).to_spec());
  CHECK_THROWS_AS(load_instance(std::string(SIDEGUESS_DATA_DIR) + "/missing.inst"), InstanceError);
}

TEST_CASE("structural errors carry coordinates") {
  CHECK(error_of(replace(kGood, "[0.05, 0.45]]", "[0.05, -0.45]]")).find("p_xy[1][1]") != std::string::npos);
  CHECK(error_of(replace(kGood, "[0.05, 0.45]]", "[0.05, 0.45, 0]]")).find("p_xy row 1") != std::string::npos);
  CHECK(error_of(replace(kGood, "[[0, 1], [1, 0]]", "[[0, 1], [1, \"x\"]]")).find("distortion[1][1]") !=
        std::string::npos);
  CHECK(error_of(replace(kGood, "[[0, 1], [1, 0]]", "[[0, 1]]")).find("expected 2 rows") != std::string::npos);
  CHECK(error_of(replace(kGood, "[[0, 1], [1, 0]]", "[[0, 1], [1, 1]]")).find("distortion row 1") !=
        std::string::npos);
  CHECK(error_of(replace(kGood, "0.45]]", "0.46]]")).find("sum") != std::string::npos);
  CHECK(error_of(replace(kGood, "y_alphabet = [\"lo\", \"hi#1\"]", "y_alphabet = [\"lo\", \"lo\"]"))
            .find("y_alphabet[1]") != std::string::npos);
}

TEST_CASE("syntax errors carry line numbers") {
  CHECK(error_of(replace(kGood, "rho = 1", "rho 1")).find("line 9") != std::string::npos);
  CHECK(error_of(replace(kGood, "rho = 1", "gamma = 1")).find("unknown key 'gamma'") != std::string::npos);
  CHECK(error_of(replace(kGood, "rho = 1", "D = 1")).find("duplicate key 'D'") != std::string::npos);
  CHECK(error_of(replace(kGood, "rho = 1\n", "")).find("missing key 'rho'") != std::string::npos);
  CHECK(error_of(replace(kGood, "R = 0.3", "R = 0.3.1")).find("line 10") != std::string::npos);
  CHECK(error_of(replace(kGood, "R = 0.3", "R = -1")).find("R must be nonnegative") != std::string::npos);
  CHECK(error_of(replace(kGood, "rho = 1", "rho = 0")).find("rho must be positive") != std::string::npos);
  CHECK(error_of(replace(kGood, "[[0.45, 0.05],", "[[0.45, 0.05],,")).find("line 5") != std::string::npos);
}
