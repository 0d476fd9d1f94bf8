#include "sideguess/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "sideguess/finite_n.hpp"
#include "sideguess/instance_io.hpp"

namespace sideguess {

namespace {

struct Common {
  std::string out_path;
  std::uint64_t seed = 0;
  int threads = 0;
  int starts = 32;
  int max_evals = 400;
  double tol = 1e-9;
};

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string csv_number(double v) { return fixed(v, 12); }

// Appends rows under `header`; the header is written only into an empty file.
void append_csv(const std::string& path, const std::string& header, const std::vector<std::string>& rows) {
  if (path.empty()) return;
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream f(path, std::ios::app);
  if (!f) throw InstanceError("cannot open " + path + " for appending");
  if (fresh) f << header << "\n";
  for (const auto& r : rows) f << r << "\n";
}

SolverOptions solver_options(const Common& c) {
  SolverOptions o;
  o.seed = c.seed;
  o.threads = c.threads;
  o.starts = c.starts;
  o.max_evaluations = c.max_evals;
  o.tolerance = c.tol;
  return o;
}

Pmf pmf_arg(const std::vector<double>& v) {
  if (v.empty()) throw InstanceError("--pmf needs at least one probability");
  return Pmf(v);
}

void print_row(std::ostream& out, const std::string& label, std::span<const double> v) {
  out << label;
  for (double x : v) out << " " << fixed(x);
  out << "\n";
}

bool is_diagonal(const ProblemSpec& s) {
  if (s.nx() != s.ny()) return false;
  std::vector<int> hit(s.ny(), 0);
  for (std::size_t x = 0; x < s.nx(); ++x) {
    int nonzero = 0;
    for (std::size_t y = 0; y < s.ny(); ++y)
      if (s.p_xy().at(x, y) > 0.0) {
        ++nonzero;
        ++hit[y];
      }
    if (nonzero != 1) return false;
  }
  return std::all_of(hit.begin(), hit.end(), [](int h) { return h == 1; });
}

int cmd_exponent(const Common& c, const std::string& file, bool grid, bool direct, bool dump, std::ostream& out) {
  const InstanceFile f = load_instance(file);
  if (dump) {
    out << dump_instance(f);
    return kExitOk;
  }
  const ProblemSpec spec = f.to_spec();
  SolverOptions o = solver_options(c);
  o.grid_mode = grid;
  if (direct) {
    if (!is_diagonal(spec)) throw InstanceError("--direct-help needs p_xy supported on a one-to-one map x -> y");
    const double v = direct_help_exponent(spec.p_x(), spec.distortion(), spec.rho(), spec.rate(), o);
    out << "exponent_bits " << fixed(v) << "\n";
    out << "solver direct-help\n";
    append_csv(c.out_path, "instance,solver,rho,R,D,exponent_bits,converged",
               {file + ",direct-help," + csv_number(spec.rho()) + "," + csv_number(spec.rate()) + "," +
                csv_number(spec.distortion().budget()) + "," + csv_number(v) + ",1"});
    return kExitOk;
  }

  const ExponentResult r = compute_exponent(spec, o);
  const auto& a = r.achieving;
  const std::size_t nu = spec.nu(), nx = spec.nx();
  out << "exponent_bits " << fixed(r.value) << "\n";
  print_row(out, "Q_Y", a.q_y.probs());
  out << "Q_U|Y\n";
  for (std::size_t y = 0; y < spec.ny(); ++y) print_row(out, "  y=" + spec.y_alphabet().symbol(y), a.q_u_given_y.row(y));
  out << "Q_X|YU\n";
  for (std::size_t y = 0; y < spec.ny(); ++y)
    for (std::size_t u = 0; u < nu; ++u)
      print_row(out, "  y=" + spec.y_alphabet().symbol(y) + " u=" + std::to_string(u),
                a.q_x_given_yu.data().subspan((y * nu + u) * nx, nx));
  out << "I(Y;U) " << fixed(r.mutual_info_yu) << "\n";
  out << "rd_term " << fixed(r.rd_term) << "\n";
  out << "kl_term " << fixed(r.kl_term) << "\n";
  const auto& st = r.solver_stats;
  char buf[256];
  std::snprintf(buf, sizeof buf, "starts %d spread %.3g middle_spread %.3g duality_gap %.3g\n", st.starts,
                st.spread_across_starts, st.middle_spread, st.inner_duality_gap);
  out << buf;
  out << (st.converged ? "converged\n" : "NONCONVERGED\n");
  append_csv(c.out_path, "instance,solver,rho,R,D,exponent_bits,converged",
             {file + "," + (grid ? "grid" : "multistart") + "," + csv_number(spec.rho()) + "," +
              csv_number(spec.rate()) + "," + csv_number(spec.distortion().budget()) + "," + csv_number(r.value) +
              "," + (st.converged ? "1" : "0")});
  return kExitOk;
}

int cmd_rd(const Common& c, const std::string& file, const std::vector<double>& pmf, double budget,
           std::ostream& out) {
  Pmf p;
  DistortionSpec d;
  if (!file.empty()) {
    const ProblemSpec spec = load_instance(file).to_spec();
    p = spec.p_x();
    d = spec.distortion();
  } else {
    p = pmf_arg(pmf);
    d = DistortionSpec::hamming(p.alphabet(), budget);
  }
  const RdResult r = rd_function(p, d);
  out << "rate_bits " << fixed(r.rate) << "\n";
  out << "distortion " << fixed(r.achieved_distortion) << "\n";
  append_csv(c.out_path, "D,rate_bits", {csv_number(d.budget()) + "," + csv_number(r.rate)});
  return kExitOk;
}

int cmd_renyi(const Common& c, const std::vector<double>& pmf, double alpha, std::ostream& out) {
  const double h = renyi_entropy(pmf_arg(pmf), alpha);
  out << fixed(h) << "\n";
  append_csv(c.out_path, "alpha,renyi_bits", {csv_number(alpha) + "," + csv_number(h)});
  return kExitOk;
}

int cmd_bounds(const Common& c, const std::vector<double>& pmf, double rho, std::ostream& out) {
  const Pmf p = pmf_arg(pmf);
  const ArikanBounds b = arikan_bounds(p, rho);
  const double m = optimal_order_moment(p.probs(), DistortionSpec::hamming(p.alphabet(), 0.0), 1, rho,
                                        p.size() <= kMaxExhaustiveCandidates ? OrderMode::exhaustive
                                                                             : OrderMode::greedy)
                       .moment;
  out << "lower " << fixed(b.lower) << "\n";
  out << "moment " << fixed(m) << "\n";
  out << "upper " << fixed(b.upper) << "\n";
  append_csv(c.out_path, "rho,lower,moment,upper",
             {csv_number(rho) + "," + csv_number(b.lower) + "," + csv_number(m) + "," + csv_number(b.upper)});
  return kExitOk;
}

int cmd_oracle(const Common& c, const std::string& file, const std::vector<int>& ns, std::ostream& out) {
  const ProblemSpec spec = load_instance(file).to_spec();
  OracleOptions o;
  o.seed = c.seed;
  o.threads = c.threads;
  const TrendReport t = exponent_trend_report(spec, ns, o, solver_options(c));
  const std::string header = "n,messages,normalized_exponent_bits,exact,exponent_bits";
  std::vector<std::string> rows;
  for (const auto& r : t.rows)
    rows.push_back(std::to_string(r.n) + "," + std::to_string(r.messages) + "," +
                   csv_number(r.normalized_exponent) + "," + (r.exact ? "1" : "0") + "," + csv_number(t.exponent));
  out << header << "\n";
  for (const auto& r : rows) out << r << "\n";
  append_csv(c.out_path, header, rows);
  return kExitOk;
}

int cmd_sweep(const Common& c, const std::string& file, const std::string& param, double from, double to, int steps,
              std::ostream& out) {
  if (!(from <= to)) throw InstanceError("--from must not exceed --to");
  if (steps < 2) throw InstanceError("--steps must be at least 2");
  const ProblemSpec base = load_instance(file).to_spec();
  const std::string header = "param,value,exponent_bits,converged";
  out << header << "\n";
  std::vector<std::string> rows;
  for (int i = 0; i < steps; ++i) {
    const double v = i + 1 == steps ? to : from + (to - from) * i / (steps - 1);
    const ProblemSpec s = param == "R" ? base.with_rate(v) : param == "D" ? base.with_budget(v) : base.with_rho(v);
    const ExponentResult r = compute_exponent(s, solver_options(c));
    rows.push_back(param + "," + csv_number(v) + "," + csv_number(r.value) + "," +
                   (r.solver_stats.converged ? "1" : "0"));
    out << rows.back() << "\n" << std::flush;
  }
  append_csv(c.out_path, header, rows);
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Guessing exponents with rate-limited side information", "sideguess"};
  app.require_subcommand(1);
  Common c;
  if (const char* env = std::getenv("SIDEGUESS_THREADS")) {
    try {
      c.threads = std::stoi(env);
    } catch (const std::exception&) {
      err << "SIDEGUESS_THREADS must be an integer\n";
      return kExitInput;
    }
  }
  app.add_option("--out", c.out_path, "Append CSV records to this file");
  app.add_option("--seed", c.seed, "Seed for every random draw");
  app.add_option("--threads", c.threads, "Worker threads (0: available parallelism)")->check(CLI::NonNegativeNumber);
  app.add_option("--starts", c.starts, "Outer multistart count")->check(CLI::PositiveNumber);
  app.add_option("--max-evals", c.max_evals, "Evaluations per outer local search")->check(CLI::PositiveNumber);
  app.add_option("--tol", c.tol, "Local-search tolerance in bits")->check(CLI::PositiveNumber);

  std::string file;
  bool grid = false, direct = false, dump = false;
  auto* exponent = app.add_subcommand("exponent", "Guessing exponent of an instance file")->fallthrough();
  exponent->add_option("file", file, "Instance file")->required();
  exponent->add_flag("--grid-mode", grid, "Exhaustive grid with local polish (binary X and Y)");
  exponent->add_flag("--direct-help", direct, "Helper observes X (p_xy must be one-to-one)");
  exponent->add_flag("--dump", dump, "Print the parsed instance and exit");

  std::vector<double> pmf;
  double budget = 0.0, alpha = 1.0, rho = 1.0;
  auto* rd = app.add_subcommand("rd", "Rate-distortion function")->fallthrough();
  auto* rd_file = rd->add_option("file", file, "Instance file (uses P_X and its distortion)");
  rd->add_option("--pmf", pmf, "Comma-separated PMF, Hamming distortion")->delimiter(',')->excludes(rd_file);
  rd->add_option("--D", budget, "Distortion budget for --pmf")->check(CLI::NonNegativeNumber);

  auto* renyi = app.add_subcommand("renyi", "Renyi entropy in bits")->fallthrough();
  renyi->add_option("--pmf", pmf, "Comma-separated PMF")->delimiter(',')->required();
  renyi->add_option("--alpha", alpha, "Order")->required();

  auto* bounds = app.add_subcommand("bounds", "Arikan bounds on the lossless guessing moment")->fallthrough();
  bounds->add_option("--pmf", pmf, "Comma-separated PMF")->delimiter(',')->required();
  bounds->add_option("--rho", rho, "Moment order")->required()->check(CLI::PositiveNumber);

  std::vector<int> ns{1, 2, 3};
  auto* oracle = app.add_subcommand("oracle", "Exact finite-blocklength moments per n")->fallthrough();
  oracle->add_option("file", file, "Instance file")->required();
  oracle->add_option("--n", ns, "Comma-separated blocklengths")->delimiter(',')->check(CLI::PositiveNumber);

  std::string param;
  double from = 0.0, to = 1.0;
  int steps = 11;
  auto* sweep = app.add_subcommand("sweep", "Exponent over a parameter grid (CSV)")->fallthrough();
  sweep->add_option("file", file, "Instance file")->required();
  sweep->add_option("--param", param, "R, D or rho")->required()->check(CLI::IsMember({"R", "D", "rho"}));
  sweep->add_option("--from", from, "First value")->required();
  sweep->add_option("--to", to, "Last value")->required();
  sweep->add_option("--steps", steps, "Grid points (at least 2)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }

  try {
    if (*exponent) return cmd_exponent(c, file, grid, direct, dump, out);
    if (*rd) {
      if (file.empty() && pmf.empty()) throw InstanceError("rd needs an instance file or --pmf");
      return cmd_rd(c, file, pmf, budget, out);
    }
    if (*renyi) return cmd_renyi(c, pmf, alpha, out);
    if (*bounds) return cmd_bounds(c, pmf, rho, out);
    if (*oracle) return cmd_oracle(c, file, ns, out);
    return cmd_sweep(c, file, param, from, to, steps, out);
  } catch (const SizeCapError& e) {
    err << "size cap: " << e.what() << "\n";
    return kExitCap;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
}

}  // namespace sideguess
