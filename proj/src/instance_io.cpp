#include "sideguess/instance_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace sideguess {

namespace {

using nlohmann::json;

const std::vector<std::string> kKeys{"x_alphabet", "y_alphabet", "xhat_alphabet", "p_xy",
                                     "distortion", "D",          "rho",           "R"};

[[noreturn]] void fail(const std::string& what) { throw InstanceError(what); }

std::string at(const std::string& key, std::size_t r, std::size_t c) {
  return key + "[" + std::to_string(r) + "][" + std::to_string(c) + "]";
}

struct Entry {
  json value;
  int line = 0;
};

// Drops a '#' comment that is not inside a string literal.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\\' && quoted) {
      ++i;
    } else if (line[i] == '"') {
      quoted = !quoted;
    } else if (line[i] == '#' && !quoted) {
      return line.substr(0, i);
    }
  }
  return line;
}

int bracket_depth(const std::string& s) {
  int depth = 0;
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && quoted) ++i;
    else if (s[i] == '"') quoted = !quoted;
    else if (!quoted && (s[i] == '[' || s[i] == '{')) ++depth;
    else if (!quoted && (s[i] == ']' || s[i] == '}')) --depth;
  }
  return depth;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::map<std::string, Entry> split_entries(std::string_view text) {
  std::map<std::string, Entry> out;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    const int start = line_no;
    while (bracket_depth(value) > 0 && std::getline(in, raw)) {
      ++line_no;
      value += "\n" + strip_comment(raw);
    }
    if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end())
      fail("line " + std::to_string(start) + ": unknown key '" + key + "'");
    if (out.count(key)) fail("line " + std::to_string(start) + ": duplicate key '" + key + "'");
    if (bracket_depth(value) != 0) fail("line " + std::to_string(start) + ": unbalanced brackets in '" + key + "'");
    try {
      out[key] = {json::parse(value), start};
    } catch (const json::parse_error&) {
      fail("line " + std::to_string(start) + ": cannot parse value of '" + key + "'");
    }
  }
  for (const auto& k : kKeys)
    if (!out.count(k)) fail("missing key '" + k + "'");
  return out;
}

std::vector<std::string> alphabet(const std::string& key, const Entry& e) {
  if (!e.value.is_array() || e.value.empty())
    fail("line " + std::to_string(e.line) + ": " + key + " must be a nonempty list");
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < e.value.size(); ++i) {
    const json& v = e.value[i];
    if (!v.is_string() && !v.is_number())
      fail(key + "[" + std::to_string(i) + "]: symbols must be strings or numbers");
    std::string s = v.is_string() ? v.get<std::string>() : v.dump();
    if (!seen.insert(s).second) fail(key + "[" + std::to_string(i) + "]: duplicate symbol '" + s + "'");
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::vector<double>> matrix(const std::string& key, const Entry& e, std::size_t rows, std::size_t cols) {
  if (!e.value.is_array()) fail("line " + std::to_string(e.line) + ": " + key + " must be a list of rows");
  if (e.value.size() != rows)
    fail(key + ": expected " + std::to_string(rows) + " rows, found " + std::to_string(e.value.size()));
  std::vector<std::vector<double>> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const json& row = e.value[r];
    if (!row.is_array()) fail(key + " row " + std::to_string(r) + ": not a list");
    if (row.size() != cols)
      fail(key + " row " + std::to_string(r) + ": expected " + std::to_string(cols) + " columns, found " +
           std::to_string(row.size()));
    for (std::size_t c = 0; c < cols; ++c) {
      if (!row[c].is_number()) fail(at(key, r, c) + ": not a number");
      const double v = row[c].get<double>();
      if (!std::isfinite(v)) fail(at(key, r, c) + ": not finite");
      if (v < 0.0) fail(at(key, r, c) + ": negative entry");
      out[r].push_back(v);
    }
  }
  return out;
}

double real(const std::string& key, const Entry& e) {
  if (!e.value.is_number() || !std::isfinite(e.value.get<double>()))
    fail("line " + std::to_string(e.line) + ": " + key + " must be a finite number");
  return e.value.get<double>();
}

void validate(const InstanceFile& f) {
  double total = 0.0;
  for (const auto& row : f.p_xy)
    for (double v : row) total += v;
  if (std::abs(total - 1.0) > kPmfTolerance) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", total);
    fail(std::string("p_xy: entries sum to ") + buf + ", not 1");
  }
  if (f.D < 0.0) fail("D must be nonnegative");
  if (!(f.rho > 0.0)) fail("rho must be positive");
  if (f.R < 0.0) fail("R must be nonnegative");
  for (std::size_t x = 0; x < f.distortion.size(); ++x) {
    double lo = kInfinity;
    for (double v : f.distortion[x]) lo = std::min(lo, v);
    if (lo > f.D) fail("distortion row " + std::to_string(x) + ": no reconstruction within D");
  }
  if (f.y_alphabet.size() > 32) fail("y_alphabet: at most 32 symbols are supported");
}

std::vector<double> flatten(const std::vector<std::vector<double>>& m) {
  std::vector<double> out;
  for (const auto& row : m) out.insert(out.end(), row.begin(), row.end());
  return out;
}

std::string number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_matrix(std::ostringstream& out, const std::string& key, const std::vector<std::vector<double>>& m) {
  out << key << " = [";
  const std::string pad(key.size() + 4, ' ');
  for (std::size_t r = 0; r < m.size(); ++r) {
    out << (r ? ",\n" + pad : "") << "[";
    for (std::size_t c = 0; c < m[r].size(); ++c) out << (c ? ", " : "") << number(m[r][c]);
    out << "]";
  }
  out << "]\n";
}

}  // namespace

ProblemSpec InstanceFile::to_spec() const {
  const Alphabet ax(x_alphabet), ay(y_alphabet), ah(xhat_alphabet);
  return ProblemSpec(JointPmf(ax, ay, flatten(p_xy)), DistortionSpec(ax, ah, flatten(distortion), D), rho, R);
}

InstanceFile InstanceFile::from_spec(const ProblemSpec& spec) {
  InstanceFile f;
  f.x_alphabet = spec.x_alphabet().symbols();
  f.y_alphabet = spec.y_alphabet().symbols();
  f.xhat_alphabet = spec.distortion().reconstruction_alphabet().symbols();
  for (std::size_t x = 0; x < spec.nx(); ++x) {
    f.p_xy.emplace_back();
    for (std::size_t y = 0; y < spec.ny(); ++y) f.p_xy.back().push_back(spec.p_xy().at(x, y));
    f.distortion.emplace_back();
    for (std::size_t h = 0; h < spec.nxh(); ++h) f.distortion.back().push_back(spec.distortion()(x, h));
  }
  f.D = spec.distortion().budget();
  f.rho = spec.rho();
  f.R = spec.rate();
  return f;
}

InstanceFile parse_instance(std::string_view text) {
  const auto e = split_entries(text);
  InstanceFile f;
  f.x_alphabet = alphabet("x_alphabet", e.at("x_alphabet"));
  f.y_alphabet = alphabet("y_alphabet", e.at("y_alphabet"));
  f.xhat_alphabet = alphabet("xhat_alphabet", e.at("xhat_alphabet"));
  f.p_xy = matrix("p_xy", e.at("p_xy"), f.x_alphabet.size(), f.y_alphabet.size());
  f.distortion = matrix("distortion", e.at("distortion"), f.x_alphabet.size(), f.xhat_alphabet.size());
  f.D = real("D", e.at("D"));
  f.rho = real("rho", e.at("rho"));
  f.R = real("R", e.at("R"));
  validate(f);
  return f;
}

InstanceFile load_instance(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InstanceError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_instance(ss.str());
  } catch (const InstanceError& err) {
    throw InstanceError(path.string() + ": " + err.what());
  }
}

std::string dump_instance(const InstanceFile& f) {
  std::ostringstream out;
  out << "x_alphabet = " << json(f.x_alphabet).dump() << "\n";
  out << "y_alphabet = " << json(f.y_alphabet).dump() << "\n";
  out << "xhat_alphabet = " << json(f.xhat_alphabet).dump() << "\n";
  write_matrix(out, "p_xy", f.p_xy);
  write_matrix(out, "distortion", f.distortion);
  out << "D = " << number(f.D) << "\n";
  out << "rho = " << number(f.rho) << "\n";
  out << "R = " << number(f.R) << "\n";
  return out.str();
}

}  // namespace sideguess
