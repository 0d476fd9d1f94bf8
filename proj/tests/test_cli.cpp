#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "sideguess/cli.hpp"
#include "sideguess/instance_io.hpp"

using namespace sideguess;

namespace {

const std::string kData = SIDEGUESS_DATA_DIR;

struct Run {
  int status;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "sideguess");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int status = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {status, out.str(), err.str()};
}

double field(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  std::string k;
  double v;
  while (in >> k) {
    if (k == key && in >> v) return v;
  }
  FAIL("missing field " << key);
  return 0.0;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::filesystem::path temp_file(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("sideguess_test_" + name);
  std::filesystem::remove(p);
  return p;
}

}  // namespace

TEST_CASE("renyi, bounds and rd verbs") {
  const Run r = run({"renyi", "--pmf", "0.25,0.25,0.25,0.25", "--alpha", "0.5"});
  CHECK(r.status == kExitOk);
  CHECK(r.out == "2.000000\n");

  const Run b = run({"bounds", "--pmf", "0.5,0.25,0.25", "--rho", "1"});
  CHECK(b.status == kExitOk);
  CHECK(field(b.out, "upper") == doctest::Approx(2.9142).epsilon(1e-4));
  CHECK(field(b.out, "moment") == doctest::Approx(1.75));

  const Run d = run({"rd", "--pmf", "0.75,0.25", "--D", "0.1"});
  CHECK(d.status == kExitOk);
  CHECK(field(d.out, "rate_bits") == doctest::Approx(0.342283).epsilon(1e-6));
}

TEST_CASE("degenerate budget prints zero") {
  const Run r = run({"exponent", kData + "/degenerate.inst", "--starts", "4"});
  CHECK(r.status == kExitOk);
  CHECK(r.out.rfind("exponent_bits 0.000000\n", 0) == 0);
  CHECK(r.out.find("converged") != std::string::npos);
}

TEST_CASE("dump re-parses to the same spec") {
  const std::string path = kData + "/golden_binary.inst";
  const Run r = run({"exponent", path, "--dump"});
  CHECK(r.status == kExitOk);
  CHECK(parse_instance(r.out).to_spec() == load_instance(path).to_spec());
}

TEST_CASE("exit codes") {
  CHECK(run({}).status == kExitInput);
  CHECK(run({"--help"}).status == kExitOk);
  CHECK(run({"frobnicate"}).status == kExitInput);
  CHECK(run({"exponent", kData + "/missing.inst"}).status == kExitInput);
  CHECK(run({"sweep", kData + "/golden_binary.inst", "--param", "gamma", "--from", "0", "--to", "1"}).status ==
        kExitInput);
  CHECK(run({"sweep", kData + "/golden_binary.inst", "--param", "R", "--from", "1", "--to", "0"}).status ==
        kExitInput);
  CHECK(run({"renyi", "--pmf", "0.5,0.6", "--alpha", "2"}).status == kExitInput);
  CHECK(run({"exponent", kData + "/golden_binary.inst", "--direct-help"}).status == kExitInput);

  const Run cap = run({"oracle", kData + "/golden_binary.inst", "--n", "20"});
  CHECK(cap.status == kExitCap);
  CHECK(cap.err.find("1000000") != std::string::npos);
}

TEST_CASE("thread count from the environment") {
  ::setenv("SIDEGUESS_THREADS", "many", 1);
  CHECK(run({"renyi", "--pmf", "1", "--alpha", "2"}).status == kExitInput);
  ::setenv("SIDEGUESS_THREADS", "1", 1);
  CHECK(run({"renyi", "--pmf", "1", "--alpha", "2"}).status == kExitOk);
  ::unsetenv("SIDEGUESS_THREADS");
}

TEST_CASE("sweep CSV is well-formed and reproducible") {
  const auto path = temp_file("sweep.csv");
  const std::vector<std::string> args{"sweep", kData + "/degenerate.inst", "--param", "rho", "--from", "0.5",
                                      "--to",  "2",                        "--steps", "4",  "--starts", "2",
                                      "--out", path.string()};
  const Run a = run(args);
  CHECK(a.status == kExitOk);
  const auto rows = lines(a.out);
  REQUIRE(rows.size() == 5);
  CHECK(rows[0] == "param,value,exponent_bits,converged");
  CHECK(rows[1] == "rho,0.500000000000,0.000000000000,1");
  CHECK(rows[4].rfind("rho,2.000000000000,", 0) == 0);
  CHECK(slurp(path) == a.out);

  const Run b = run(args);
  CHECK(b.out == a.out);
  // Appending keeps a single header.
  CHECK(slurp(path) == a.out + a.out.substr(rows[0].size() + 1));
  std::filesystem::remove(path);
}

TEST_CASE("sweep over R is nonincreasing on the golden instance") {
  const Run r = run({"sweep", kData + "/golden_binary.inst", "--param", "R", "--from", "0", "--to", "1", "--steps",
                     "3", "--starts", "4"});
  REQUIRE(r.status == kExitOk);
  const auto rows = lines(r.out);
  REQUIRE(rows.size() == 4);
  double prev = 1e9;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double v = std::stod(rows[i].substr(rows[i].find(',', 2) + 1));
    CHECK(v <= prev + 1e-6);
    prev = v;
  }
}

TEST_CASE("diagonal instance agrees with the direct-help solver") {
  const std::string path = kData + "/diagonal_binary.inst";
  const Run full = run({"exponent", path, "--starts", "8"});
  const Run direct = run({"exponent", path, "--direct-help"});
  REQUIRE(full.status == kExitOk);
  REQUIRE(direct.status == kExitOk);
  CHECK(std::abs(field(full.out, "exponent_bits") - field(direct.out, "exponent_bits")) < 5e-3);
}
