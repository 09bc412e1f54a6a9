#ifndef IDIKIT_CONFIG_HPP
#define IDIKIT_CONFIG_HPP

#include "idikit/bolza.hpp"
#include "idikit/catalog.hpp"
#include "idikit/conditions.hpp"

#include <cctype>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace idikit {

// Parse failure with the offending line (0 when the field is missing altogether) and field name.
struct ConfigError : std::runtime_error {
  int line;
  std::string field;
  ConfigError(int line_, std::string field_, const std::string& what)
      : std::runtime_error(format(line_, field_, what)), line(line_), field(std::move(field_)) {}

 private:
  static std::string format(int line, const std::string& field, const std::string& what) {
    std::string s = "config error";
    if (line > 0) s += " at line " + std::to_string(line);
    if (!field.empty()) s += " (field '" + field + "')";
    return s + ": " + what;
  }
};

// Sections of key = value lines. Section names may be dotted ([problem.velocity]).
class ConfigDocument {
 public:
  struct Entry {
    std::string value;
    int line = 0;
  };

  static ConfigDocument parse(std::istream& in) {
    ConfigDocument doc;
    std::string raw, section;
    int lineno = 0;
    while (std::getline(in, raw)) {
      ++lineno;
      std::string s = strip(strip_comment(raw));
      if (s.empty()) continue;
      if (s.front() == '[') {
        if (s.back() != ']') throw ConfigError(lineno, "", "unterminated section header");
        section = strip(s.substr(1, s.size() - 2));
        if (section.empty() || !valid_name(section, true)) throw ConfigError(lineno, section, "invalid section name");
        if (doc.sections_.count(section)) throw ConfigError(lineno, section, "duplicate section");
        doc.sections_[section];
        continue;
      }
      auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError(lineno, s, "expected 'key = value'");
      std::string key = strip(s.substr(0, eq));
      std::string value = strip(s.substr(eq + 1));
      if (section.empty()) throw ConfigError(lineno, key, "key outside of any section");
      if (key.empty() || !valid_name(key, false)) throw ConfigError(lineno, key, "invalid key");
      const std::string full = section + "." + key;
      auto& sec = doc.sections_[section];
      if (sec.count(key)) throw ConfigError(lineno, full, "duplicate key");
      sec[key] = {value, lineno};
    }
    return doc;
  }

  static ConfigDocument parse_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }

  static ConfigDocument load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(0, "", "cannot open '" + path + "'");
    return parse(in);
  }

  bool has_section(const std::string& s) const { return sections_.count(s) > 0; }
  bool has(const std::string& s, const std::string& k) const {
    auto it = sections_.find(s);
    return it != sections_.end() && it->second.count(k);
  }
  const Entry* find(const std::string& s, const std::string& k) const {
    auto it = sections_.find(s);
    if (it == sections_.end()) return nullptr;
    auto jt = it->second.find(k);
    return jt == it->second.end() ? nullptr : &jt->second;
  }
  const std::map<std::string, std::map<std::string, Entry>>& sections() const { return sections_; }

 private:
  static std::string strip_comment(const std::string& s) {
    auto p = s.find('#');
    return p == std::string::npos ? s : s.substr(0, p);
  }
  static std::string strip(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }
  static bool valid_name(const std::string& s, bool dots) {
    for (char c : s)
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || (dots && c == '.'))) return false;
    return true;
  }
  std::map<std::string, std::map<std::string, Entry>> sections_;
};

// Typed access with line/field diagnostics.
class ConfigReader {
 public:
  explicit ConfigReader(const ConfigDocument& d) : d_(d) {}

  const ConfigDocument& doc() const { return d_; }

  bool has(const std::string& s, const std::string& k) const { return d_.has(s, k); }

  std::string str(const std::string& s, const std::string& k) const { return entry(s, k).value; }
  std::string str(const std::string& s, const std::string& k, const std::string& def) const {
    return has(s, k) ? str(s, k) : def;
  }

  double real(const std::string& s, const std::string& k) const {
    const auto& e = entry(s, k);
    return to_real(e.value, e.line, s + "." + k);
  }
  double real(const std::string& s, const std::string& k, double def) const { return has(s, k) ? real(s, k) : def; }

  long long integer(const std::string& s, const std::string& k) const {
    const auto& e = entry(s, k);
    return to_int(e.value, e.line, s + "." + k);
  }
  long long integer(const std::string& s, const std::string& k, long long def) const {
    return has(s, k) ? integer(s, k) : def;
  }

  std::vector<double> reals(const std::string& s, const std::string& k) const {
    const auto& e = entry(s, k);
    std::vector<double> out;
    for (const auto& tok : split(e.value, ", \t")) out.push_back(to_real(tok, e.line, s + "." + k));
    if (out.empty()) throw ConfigError(e.line, s + "." + k, "empty list");
    return out;
  }
  std::vector<long long> integers(const std::string& s, const std::string& k) const {
    const auto& e = entry(s, k);
    std::vector<long long> out;
    for (const auto& tok : split(e.value, ", \t")) out.push_back(to_int(tok, e.line, s + "." + k));
    if (out.empty()) throw ConfigError(e.line, s + "." + k, "empty list");
    return out;
  }
  std::vector<std::string> words(const std::string& s, const std::string& k) const { return split(entry(s, k).value, ", \t"); }

  Vector vector(const std::string& s, const std::string& k, Eigen::Index n) const {
    auto v = reals(s, k);
    if (static_cast<Eigen::Index>(v.size()) != n)
      throw ConfigError(line(s, k), s + "." + k, "expected " + std::to_string(n) + " entries, got " + std::to_string(v.size()));
    return Eigen::Map<Vector>(v.data(), n);
  }

  // Rows separated by ';'.
  std::vector<Vector> rows(const std::string& s, const std::string& k, Eigen::Index n) const {
    const auto& e = entry(s, k);
    std::vector<Vector> out;
    for (const auto& r : split(e.value, ";")) {
      std::vector<double> v;
      for (const auto& tok : split(r, ", \t")) v.push_back(to_real(tok, e.line, s + "." + k));
      if (v.empty()) continue;
      if (static_cast<Eigen::Index>(v.size()) != n)
        throw ConfigError(e.line, s + "." + k, "each row needs " + std::to_string(n) + " entries");
      out.push_back(Eigen::Map<Vector>(v.data(), n));
    }
    if (out.empty()) throw ConfigError(e.line, s + "." + k, "empty row list");
    return out;
  }

  Matrix matrix(const std::string& s, const std::string& k, Eigen::Index n) const {
    auto r = rows(s, k, n);
    if (static_cast<Eigen::Index>(r.size()) != n) throw ConfigError(line(s, k), s + "." + k, "matrix must be square");
    Matrix M(n, n);
    for (Eigen::Index i = 0; i < n; ++i) M.row(i) = r[i].transpose();
    return M;
  }

  int line(const std::string& s, const std::string& k) const {
    const auto* e = d_.find(s, k);
    return e ? e->line : 0;
  }

  [[noreturn]] void fail(const std::string& s, const std::string& k, const std::string& what) const {
    throw ConfigError(line(s, k), s + "." + k, what);
  }

 private:
  const ConfigDocument::Entry& entry(const std::string& s, const std::string& k) const {
    const auto* e = d_.find(s, k);
    if (!e) throw ConfigError(0, s + "." + k, "missing required field");
    return *e;
  }
  static std::vector<std::string> split(const std::string& s, const char* seps) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
      if (std::strchr(seps, c)) {
        if (!cur.empty()) out.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
  }
  static double to_real(const std::string& tok, int line, const std::string& field) {
    try {
      std::size_t pos = 0;
      double v = std::stod(tok, &pos);
      if (pos != tok.size() || !std::isfinite(v)) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      throw ConfigError(line, field, "not a finite number: '" + tok + "'");
    }
  }
  static long long to_int(const std::string& tok, int line, const std::string& field) {
    try {
      std::size_t pos = 0;
      long long v = std::stoll(tok, &pos);
      if (pos != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      throw ConfigError(line, field, "not an integer: '" + tok + "'");
    }
  }
  const ConfigDocument& d_;
};

struct AuditOptions {
  std::vector<SelectionPolicy::Kind> policies = {SelectionPolicy::Kind::MinNorm, SelectionPolicy::Kind::ExtremePoint,
                                                 SelectionPolicy::Kind::ConstantControl};
  std::optional<Vector> control;  // constant control; default is the support point of U along e_1
  int gronwall_instances = 1000;
  int growth_samples = 200;
};

struct ExperimentConfig {
  std::string source;   // canonical text of the parsed document, stored in run records
  std::string problem_id;  // catalog name, or "inline"
  Problem problem;
  bool reference_simulated = false;  // inline problems: reference is a fine min-norm simulation
  int reference_k = 0;
  std::vector<int> meshes;
  SolverOptions solver;
  ConditionOptions conditions;
  AuditOptions audit;
  std::string output_dir = "out";
  unsigned long long seed = 0;
  bool parallel = true;
};

namespace detail {

inline const char* kProblem = "problem";

inline DriftFn affine_drift(const Matrix& A, const Vector& b) {
  return [A, b](double, const Vector& x) { return Vector(A * x + b); };
}

inline VelocityMap read_velocity(const ConfigReader& r, int n) {
  const std::string s = "problem.velocity";
  if (!r.doc().has_section(s)) throw ConfigError(0, s, "missing section");
  Matrix A = r.has(s, "A") ? r.matrix(s, "A", n) : Matrix(Matrix::Zero(n, n));
  Vector b = r.has(s, "b") ? r.vector(s, "b", n) : Vector(Vector::Zero(n));
  DriftFn f = affine_drift(A, b);
  DriftJacobian J = [A](double, const Vector&) { return A; };
  const std::string fam = r.str(s, "family");
  try {
    if (fam == "singleton") return VelocityMap::singleton(n, f, J);
    if (fam == "ball") return VelocityMap::ball(n, f, J, r.real(s, "radius"));
    if (fam == "polytope") return VelocityMap::polytope(n, f, J, r.rows(s, "vertices", n));
  } catch (const InvalidMapError& e) {
    r.fail(s, "family", e.what());
  }
  r.fail(s, "family", "unknown family '" + fam + "' (singleton, ball, polytope)");
}

// g(t,s,x) = c e^{-rate (t-s)} x.
inline VolterraKernel read_kernel(const ConfigReader& r, int n) {
  const std::string s = "problem.kernel";
  if (!r.doc().has_section(s)) return VolterraKernel::zero(n);
  const std::string name = r.str(s, "name", "zero");
  if (name == "zero") return VolterraKernel::zero(n);
  if (name != "exponential") r.fail(s, "name", "unknown kernel '" + name + "' (zero, exponential)");
  const double c = r.real(s, "coefficient");
  const double rate = r.real(s, "rate", 0.0);
  if (rate < 0.0) r.fail(s, "rate", "rate must be nonnegative");
  return VolterraKernel(
      n, [c, rate](double t, double u, const Vector& x) { return Vector(c * std::exp(-rate * (t - u)) * x); },
      [c, rate, n](double t, double u, const Vector&) { return Matrix(c * std::exp(-rate * (t - u)) * Matrix::Identity(n, n)); },
      std::abs(c), std::abs(c));
}

inline TerminalCost read_terminal(const ConfigReader& r, int n) {
  const std::string s = "problem.terminal";
  const std::string name = r.has(s, "name") ? r.str(s, "name") : "zero";
  if (name == "zero") return TerminalCost::zero(n);
  if (name == "linear") return TerminalCost::linear(r.vector(s, "c", n));
  if (name == "quadratic")
    return TerminalCost::quadratic(r.real(s, "weight", 1.0), r.has(s, "target") ? r.vector(s, "target", n) : Vector(Vector::Zero(n)));
  r.fail(s, "name", "unknown terminal cost '" + name + "' (zero, linear, quadratic)");
}

inline RunningCost read_running(const ConfigReader& r, int n) {
  const std::string s = "problem.running";
  const std::string name = r.has(s, "name") ? r.str(s, "name") : "zero";
  if (name == "zero") return RunningCost::zero(n);
  if (name == "quadratic") {
    double qx = r.real(s, "qx", 0.0), qv = r.real(s, "qv", 0.0);
    if (qx < 0.0) r.fail(s, "qx", "must be nonnegative");
    if (qv < 0.0) r.fail(s, "qv", "must be nonnegative");
    return RunningCost::quadratic(qx, qv);
  }
  r.fail(s, "name", "unknown running cost '" + name + "' (zero, quadratic)");
}

inline EndpointSet read_endpoint(const ConfigReader& r, int n) {
  const std::string s = "problem.endpoint";
  const std::string shape = r.has(s, "shape") ? r.str(s, "shape") : "whole";
  try {
    if (shape == "whole") return EndpointSet::whole(n);
    if (shape == "box") return EndpointSet::box(r.vector(s, "lo", n), r.vector(s, "hi", n));
    if (shape == "ball") return EndpointSet::ball(r.vector(s, "center", n), r.real(s, "radius"));
    if (shape == "singleton") return EndpointSet::singleton(r.vector(s, "center", n));
  } catch (const DomainError& e) {
    r.fail(s, "shape", e.what());
  }
  r.fail(s, "shape", "unknown endpoint shape '" + shape + "' (whole, box, ball, singleton)");
}

inline SelectionPolicy::Kind read_policy(const ConfigReader& r, const std::string& word) {
  if (word == "min_norm") return SelectionPolicy::Kind::MinNorm;
  if (word == "extreme_point") return SelectionPolicy::Kind::ExtremePoint;
  if (word == "constant_control") return SelectionPolicy::Kind::ConstantControl;
  r.fail("audit", "policies", "unknown policy '" + word + "'");
}

}  // namespace detail

inline ExperimentConfig parse_experiment(const ConfigDocument& doc) {
  ConfigReader r(doc);
  ExperimentConfig c{"", "", catalog_cos_t(), false, 0, {}, {}, {}, {}, "out", 0, true};
  for (const auto& [name, _] : doc.sections()) {
    static const std::vector<std::string> known = {"problem",         "problem.velocity", "problem.kernel",
                                                   "problem.terminal", "problem.running",  "problem.endpoint",
                                                   "mesh",            "solver",           "conditions",
                                                   "audit",           "output",           "run"};
    if (std::find(known.begin(), known.end(), name) == known.end())
      throw ConfigError(0, name, "unknown section");
  }
  const std::string P = detail::kProblem;
  if (!doc.has_section(P)) throw ConfigError(0, P, "missing section");
  const double T = r.real(P, "T");
  if (!(T > 0.0)) r.fail(P, "T", "T must be positive");
  c.problem_id = r.str(P, "id", "inline");
  if (c.problem_id != "inline") {
    try {
      c.problem = catalog_problem(c.problem_id);
    } catch (const DomainError&) {
      r.fail(P, "id", "unknown catalog problem '" + c.problem_id + "'");
    }
    if (std::abs(c.problem.T - T) > 1e-12)
      r.fail(P, "T", "catalog problem '" + c.problem_id + "' has horizon " + std::to_string(c.problem.T));
    if (r.has(P, "epsilon")) c.problem.epsilon = r.real(P, "epsilon");
  } else {
    const long long n = r.integer(P, "dim");
    if (n < 1 || n > 16) r.fail(P, "dim", "dimension must lie in 1..16");
    const int d = static_cast<int>(n);
    Vector lo = r.has(P, "box_lo") ? r.vector(P, "box_lo", d) : Vector(Vector::Constant(d, -10.0));
    Vector hi = r.has(P, "box_hi") ? r.vector(P, "box_hi", d) : Vector(Vector::Constant(d, 10.0));
    if ((hi - lo).minCoeff() <= 0.0) r.fail(P, "box_hi", "box must have positive width");
    c.problem = Problem{"inline",
                        d,
                        T,
                        r.vector(P, "x0", d),
                        detail::read_velocity(r, d),
                        detail::read_kernel(r, d),
                        detail::read_terminal(r, d),
                        detail::read_running(r, d),
                        detail::read_endpoint(r, d),
                        r.real(P, "epsilon", 1.0),
                        {lo, hi},
                        {},
                        std::nullopt};
    GrowthConstants g = sample_growth_constants(c.problem.F, c.problem.box, T);
    c.problem.constants = {g.m_F, g.l_F};
    c.reference_simulated = true;
  }
  if (!(c.problem.epsilon > 0.0)) r.fail(P, "epsilon", "epsilon must be positive");
  if (r.has(P, "m_F")) c.problem.constants.m_F = r.real(P, "m_F");
  if (r.has(P, "l_F")) c.problem.constants.l_F = r.real(P, "l_F");
  if (c.problem.constants.m_F < 0.0) r.fail(P, "m_F", "must be nonnegative");
  if (c.problem.constants.l_F < 0.0) r.fail(P, "l_F", "must be nonnegative");

  if (!doc.has_section("mesh")) throw ConfigError(0, "mesh", "missing section");
  for (long long k : r.integers("mesh", "k")) {
    if (k < 2 || k > 100000) r.fail("mesh", "k", "mesh sizes must lie in 2..100000");
    if (!c.meshes.empty() && k <= c.meshes.back()) r.fail("mesh", "k", "mesh sizes must be strictly increasing");
    c.meshes.push_back(static_cast<int>(k));
  }
  c.reference_k = static_cast<int>(r.integer("mesh", "reference_k", 8LL * c.meshes.back()));
  if (c.reference_simulated && c.reference_k < c.meshes.back()) r.fail("mesh", "reference_k", "must be at least the finest mesh");

  const std::string S = "solver";
  c.solver.max_iterations = static_cast<int>(r.integer(S, "max_iterations", c.solver.max_iterations));
  c.solver.tol_stat = r.real(S, "tol_stat", c.solver.tol_stat);
  c.solver.armijo_c1 = r.real(S, "armijo_c1", c.solver.armijo_c1);
  c.solver.endpoint_tol = r.real(S, "endpoint_tol", c.solver.endpoint_tol);
  c.solver.rho0 = r.real(S, "rho0", c.solver.rho0);
  c.solver.max_outer = static_cast<int>(r.integer(S, "max_outer", c.solver.max_outer));
  if (c.solver.max_iterations < 0) r.fail(S, "max_iterations", "must be nonnegative");
  if (!(c.solver.tol_stat > 0.0)) r.fail(S, "tol_stat", "must be positive");
  if (!(c.solver.armijo_c1 > 0.0 && c.solver.armijo_c1 < 1.0)) r.fail(S, "armijo_c1", "must lie in (0,1)");
  if (!(c.solver.rho0 > 0.0)) r.fail(S, "rho0", "must be positive");

  const std::string C = "conditions";
  c.conditions.el_tol = r.real(C, "el_tol", c.conditions.el_tol);
  const std::string form = r.str(C, "form", "exact");
  if (form == "exact")
    c.conditions.form = ConditionForm::exact;
  else if (form == "as_stated")
    c.conditions.form = ConditionForm::as_stated;
  else
    r.fail(C, "form", "unknown form '" + form + "' (exact, as_stated)");

  const std::string A = "audit";
  if (r.has(A, "policies")) {
    c.audit.policies.clear();
    for (const auto& w : r.words(A, "policies")) c.audit.policies.push_back(detail::read_policy(r, w));
  }
  if (r.has(A, "control")) c.audit.control = r.vector(A, "control", c.problem.dim);
  c.audit.gronwall_instances = static_cast<int>(r.integer(A, "gronwall_instances", c.audit.gronwall_instances));
  c.audit.growth_samples = static_cast<int>(r.integer(A, "growth_samples", c.audit.growth_samples));
  if (c.audit.gronwall_instances < 0) r.fail(A, "gronwall_instances", "must be nonnegative");
  if (c.audit.growth_samples < 1) r.fail(A, "growth_samples", "must be positive");

  c.output_dir = r.str("output", "dir", c.output_dir);
  const long long seed = r.integer("run", "seed", 0);
  if (seed < 0) r.fail("run", "seed", "must be nonnegative");
  c.seed = static_cast<unsigned long long>(seed);
  const std::string par = r.str("run", "parallel", "true");
  if (par != "true" && par != "false") r.fail("run", "parallel", "expected true or false");
  c.parallel = par == "true";

  std::ostringstream canon;
  for (const auto& [sec, kv] : doc.sections()) {
    canon << '[' << sec << "]\n";
    for (const auto& [k, e] : kv) canon << k << " = " << e.value << '\n';
  }
  c.source = canon.str();
  return c;
}

inline ExperimentConfig parse_experiment_string(const std::string& text) {
  return parse_experiment(ConfigDocument::parse_string(text));
}

inline ExperimentConfig load_experiment(const std::string& path) { return parse_experiment(ConfigDocument::load(path)); }

}  // namespace idikit

#endif
