#ifndef IDIKIT_EXPERIMENT_HPP
#define IDIKIT_EXPERIMENT_HPP

#include "idikit/config.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <future>

namespace idikit {

using Json = nlohmann::ordered_json;

inline constexpr const char* kSchemaLine = "# idi-kit schema v1";

// Fixed-format number for the CSV outputs.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10e", v);
  return buf;
}

// Non-finite numbers become null so that every numeric JSON field stays finite.
inline Json jnum(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json jvec(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(jnum(v(i)));
  return a;
}

struct RunRecord {
  std::string command;
  Json json;
  std::map<std::string, std::string> files;  // file name -> contents
  int exit_code = 0;
};

struct ReferenceArc {
  Arc arc;
  std::string source;  // "closed_form" or "simulated:k=..."
};

inline ReferenceArc experiment_reference(const ExperimentConfig& c) {
  if (c.problem.reference) return {*c.problem.reference, "closed_form"};
  TimeMesh m = TimeMesh::uniform(c.problem.T, c.reference_k);
  DiscreteTrajectory tr = simulate(c.problem, m, SelectionPolicy::min_norm());
  return {tr.extension().as_arc(), "simulated:k=" + std::to_string(c.reference_k)};
}

// One mesh of the pipeline: approximation, (P_k), multipliers and residuals.
struct MeshRun {
  int k = 0;
  double h = 0.0;
  ApproximationErrorReport approx;
  SolveResult solve;
  ConditionReport cond;
  MultiplierSet multipliers;
  CostBreakdown cost;
  double solution_sup_error = 0.0;
  double solution_w12_error = 0.0;
  bool adjoint_bound_ok = true;
  std::string status = "ok";
  std::string error;
};

inline MeshRun run_mesh(const ExperimentConfig& c, const Arc& xbar, int k) {
  MeshRun r;
  r.k = k;
  const Problem& P = c.problem;
  TimeMesh m = TimeMesh::uniform(P.T, k);
  r.h = m.h_max();
  try {
    ApproximationResult ar = approximate_arc(P, xbar, m);
    r.approx = ar.report;
    DiscreteBolzaProblem B = make_bolza_problem(P, m, xbar, ar.report.zeta_k);
    r.solve = solve_Pk(B, controls_from(B, ar.trajectory), c.solver);
    r.cost = cost_breakdown(B, r.solve.trajectory);
    W12Distance d = w12_distance(r.solve.trajectory.extension(), xbar);
    r.solution_sup_error = d.sup;
    r.solution_w12_error = d.w12();
    auto [M, rep] = check_conditions(B, r.solve, ar.report.nu_k, c.conditions);
    r.multipliers = std::move(M);
    r.cond = std::move(rep);
    r.adjoint_bound_ok = r.cond.adjoint_norm_max <= r.cond.adjoint_bound;
    if (!r.solve.stationary) r.status = "nonstationary";
  } catch (const std::exception& e) {
    r.status = "failed";
    r.error = e.what();
  }
  return r;
}

inline std::vector<MeshRun> run_meshes(const ExperimentConfig& c, const Arc& xbar) {
  std::vector<MeshRun> out(c.meshes.size());
  if (!c.parallel) {
    for (std::size_t i = 0; i < c.meshes.size(); ++i) out[i] = run_mesh(c, xbar, c.meshes[i]);
    return out;
  }
  std::vector<std::future<MeshRun>> fut;
  for (int k : c.meshes) fut.push_back(std::async(std::launch::async, [&c, &xbar, k] { return run_mesh(c, xbar, k); }));
  for (std::size_t i = 0; i < fut.size(); ++i) out[i] = fut[i].get();
  return out;
}

inline Json config_json(const ExperimentConfig& c, const ReferenceArc& ref) {
  Json j;
  j["problem"] = c.problem.name;
  j["problem_id"] = c.problem_id;
  j["T"] = c.problem.T;
  j["dim"] = c.problem.dim;
  j["epsilon"] = c.problem.epsilon;
  j["m_F"] = jnum(c.problem.constants.m_F);
  j["l_F"] = jnum(c.problem.constants.l_F);
  j["beta"] = c.problem.kernel.beta();
  j["alpha"] = c.problem.kernel.alpha();
  j["meshes"] = c.meshes;
  j["reference"] = ref.source;
  j["seed"] = c.seed;
  j["solver"] = {{"max_iterations", c.solver.max_iterations}, {"tol_stat", c.solver.tol_stat},
                 {"armijo_c1", c.solver.armijo_c1},           {"endpoint_tol", c.solver.endpoint_tol},
                 {"rho0", c.solver.rho0},                     {"max_outer", c.solver.max_outer}};
  j["conditions"] = {{"el_tol", c.conditions.el_tol},
                     {"form", c.conditions.form == ConditionForm::exact ? "exact" : "as_stated"}};
  j["source"] = c.source;
  return j;
}

inline Json approx_json(const ApproximationErrorReport& a) {
  return Json{{"xi_k", jnum(a.xi_k)},
              {"zeta_k", jnum(a.zeta_k)},
              {"beta_k", jnum(a.beta_k)},
              {"nu_k", jnum(a.nu_k)},
              {"tau", jnum(a.tau)},
              {"int_c", jnum(a.int_c)},
              {"int_c2", jnum(a.int_c2)},
              {"reference_residual", jnum(a.reference_residual)},
              {"nodal_sup_error", jnum(a.nodal_sup_error)},
              {"sup_error", jnum(a.sup_error)},
              {"deriv_l2_error", jnum(a.deriv_l2_error)},
              {"w12_error", jnum(a.w12_error())}};
}

inline Json solve_json(const SolveResult& s) {
  Json log = Json::array();
  for (const auto& e : s.log)
    log.push_back({{"iteration", e.iteration}, {"stage", e.stage}, {"merit", jnum(e.merit)}, {"cost", jnum(e.cost)},
                   {"step", jnum(e.step)}, {"stationarity", jnum(e.stationarity)}});
  return Json{{"stationary", s.stationary},
              {"iterations", s.iterations},
              {"stationarity", jnum(s.stationarity)},
              {"cost", jnum(s.cost)},
              {"endpoint_violation", jnum(s.endpoint_violation)},
              {"endpoint_normal", s.endpoint_normal.size() ? jvec(s.endpoint_normal) : Json::array()},
              {"rho", jnum(s.rho)},
              {"tube_active", s.tube_active},
              {"tube_gap", jnum(s.tube_gap)},
              {"budget_active", s.budget_active},
              {"budget_gap", jnum(s.budget_gap)},
              {"rejected_by_trust_region", s.rejected_by_trust_region},
              {"descent_ok", s.descent_ok},
              {"log", log}};
}

inline Json condition_json(const ConditionReport& r) {
  Json el = Json::array(), vt = Json::array(), vr = Json::array();
  for (double x : r.el_residuals) el.push_back(jnum(x));
  for (double x : r.volterra_taus) vt.push_back(jnum(x));
  for (double x : r.volterra_residuals) vr.push_back(jnum(x));
  return Json{{"problem", r.problem},
              {"k", r.k},
              {"h", jnum(r.h)},
              {"el_residuals", el},
              {"el_residual_max", jnum(r.el_residual_max)},
              {"transversality", jnum(r.transversality)},
              {"nontriviality", jnum(r.nontriviality)},
              {"volterra_taus", vt},
              {"volterra_residuals", vr},
              {"volterra_median", jnum(r.volterra_median)},
              {"adjoint_norm_max", jnum(r.adjoint_norm_max)},
              {"adjoint_bound", jnum(r.adjoint_bound)},
              {"abnormal", r.abnormal},
              {"degenerate", r.degenerate},
              {"p0_flagged", r.p0_flagged}};
}

inline Json mesh_json(const MeshRun& r) {
  Json j{{"k", r.k}, {"h", r.h}, {"status", r.status}};
  if (!r.error.empty()) j["error"] = r.error;
  if (r.status == "failed") return j;
  j["approximation"] = approx_json(r.approx);
  j["solver"] = solve_json(r.solve);
  j["cost"] = {{"terminal", jnum(r.cost.terminal)}, {"running", jnum(r.cost.running)}, {"penalty", jnum(r.cost.penalty)},
               {"total", jnum(r.cost.total())}};
  j["solution_sup_error"] = jnum(r.solution_sup_error);
  j["solution_w12_error"] = jnum(r.solution_w12_error);
  j["conditions"] = condition_json(r.cond);
  j["multipliers"] = {{"lambda", jnum(r.multipliers.lambda)}, {"scale", jnum(r.multipliers.scale)}};
  return j;
}

inline Json record_header(const std::string& command, const ExperimentConfig& c, const ReferenceArc& ref) {
  Json j;
  j["tool"] = "idikit";
  j["version"] = kVersion;
  j["command"] = command;
  j["config"] = config_json(c, ref);
  return j;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// CSV columns after the schema line; 'status' flags non-stationary or failed meshes.
inline constexpr const char* kConvergeHeader =
    "k,h,sup_err,w12_err,zeta_k,beta_k,J_k,EL_residual_max,volterra_residual_median,transversality_residual,nontriviality,"
    "status";

inline RunRecord run_convergence_study(const ExperimentConfig& c) {
  auto t0 = std::chrono::steady_clock::now();
  ReferenceArc ref = experiment_reference(c);
  std::vector<MeshRun> runs = run_meshes(c, ref.arc);
  std::ostringstream csv;
  csv << kSchemaLine << '\n' << kConvergeHeader << '\n';
  RunRecord rec;
  rec.command = "converge";
  rec.json = record_header("converge", c, ref);
  Json meshes = Json::array();
  for (const auto& r : runs) {
    const bool ok = r.status != "failed";
    const double nan = std::numeric_limits<double>::quiet_NaN();
    csv << r.k << ',' << fmt(r.h) << ',' << fmt(ok ? r.approx.sup_error : nan) << ','
        << fmt(ok ? r.approx.w12_error() : nan) << ',' << fmt(ok ? r.approx.zeta_k : nan) << ','
        << fmt(ok ? r.approx.beta_k : nan) << ',' << fmt(ok ? r.cost.total() : nan) << ','
        << fmt(ok ? r.cond.el_residual_max : nan) << ',' << fmt(ok ? r.cond.volterra_median : nan) << ','
        << fmt(ok ? r.cond.transversality : nan) << ',' << fmt(ok ? r.cond.nontriviality : nan) << ',' << r.status
        << '\n';
    meshes.push_back(mesh_json(r));
  }
  rec.json["meshes"] = meshes;
  rec.json["wall_clock_seconds"] = seconds_since(t0);
  rec.files["converge.csv"] = csv.str();
  rec.files["converge.json"] = rec.json.dump(2) + "\n";
  rec.exit_code = 0;
  return rec;
}

// Per-node and per-sample residuals; exit code 1 when any discrete condition fails.
inline RunRecord run_conditions(const ExperimentConfig& c) {
  auto t0 = std::chrono::steady_clock::now();
  ReferenceArc ref = experiment_reference(c);
  std::vector<MeshRun> runs = run_meshes(c, ref.arc);
  std::ostringstream nodes, vol, summary;
  nodes << kSchemaLine << '\n' << "k,j,t,el_residual,p_norm\n";
  vol << kSchemaLine << '\n' << "k,tau,volterra_residual\n";
  summary << kSchemaLine << '\n'
          << "k,el_residual_max,transversality_residual,nontriviality,adjoint_norm_max,adjoint_bound,abnormal,p0_flagged,"
             "verdict\n";
  RunRecord rec;
  rec.command = "conditions";
  rec.json = record_header("conditions", c, ref);
  Json meshes = Json::array();
  bool all_ok = true;
  for (const auto& r : runs) {
    meshes.push_back(mesh_json(r));
    if (r.status == "failed") {
      all_ok = false;
      summary << r.k << ",nan,nan,nan,nan,nan,0,0,FAIL\n";
      continue;
    }
    TimeMesh m = TimeMesh::uniform(c.problem.T, r.k);
    for (int j = 0; j <= r.k; ++j) {
      nodes << r.k << ',' << j << ',' << fmt(m.t(j)) << ','
            << (j < r.k ? fmt(r.cond.el_residuals[j]) : std::string("nan")) << ',' << fmt(r.multipliers.p[j].norm())
            << '\n';
    }
    for (std::size_t i = 0; i < r.cond.volterra_taus.size(); ++i)
      vol << r.k << ',' << fmt(r.cond.volterra_taus[i]) << ',' << fmt(r.cond.volterra_residuals[i]) << '\n';
    const bool ok = r.solve.stationary && r.cond.el_residual_max <= c.conditions.el_tol && r.cond.transversality <= 1e-6 &&
                    r.cond.nontriviality == 1.0 && r.adjoint_bound_ok;
    all_ok = all_ok && ok;
    summary << r.k << ',' << fmt(r.cond.el_residual_max) << ',' << fmt(r.cond.transversality) << ','
            << fmt(r.cond.nontriviality) << ',' << fmt(r.cond.adjoint_norm_max) << ',' << fmt(r.cond.adjoint_bound)
            << ',' << (r.cond.abnormal ? 1 : 0) << ',' << (r.cond.p0_flagged ? 1 : 0) << ',' << (ok ? "PASS" : "FAIL")
            << '\n';
  }
  rec.json["meshes"] = meshes;
  rec.json["passed"] = all_ok;
  rec.json["wall_clock_seconds"] = seconds_since(t0);
  rec.files["conditions.csv"] = summary.str();
  rec.files["conditions_nodes.csv"] = nodes.str();
  rec.files["conditions_volterra.csv"] = vol.str();
  rec.files["conditions.json"] = rec.json.dump(2) + "\n";
  rec.exit_code = all_ok ? 0 : 1;
  return rec;
}

inline SelectionPolicy make_policy(const ExperimentConfig& c, SelectionPolicy::Kind kind, int k) {
  switch (kind) {
    case SelectionPolicy::Kind::MinNorm:
      return SelectionPolicy::min_norm();
    case SelectionPolicy::Kind::ExtremePoint:
      return SelectionPolicy::extreme_point(c.seed * 1000003ULL + static_cast<unsigned long long>(k));
    case SelectionPolicy::Kind::ConstantControl:
      return SelectionPolicy::constant_control(
          c.audit.control ? *c.audit.control : c.problem.F.support_offset(Vector::Unit(c.problem.dim, 0)));
  }
  return SelectionPolicy::min_norm();
}

// Nodal trajectories for every policy and mesh.
inline RunRecord run_simulate(const ExperimentConfig& c) {
  auto t0 = std::chrono::steady_clock::now();
  const Problem& P = c.problem;
  std::ostringstream csv;
  csv << kSchemaLine << '\n' << "policy,k,j,t";
  for (int d = 0; d < P.dim; ++d) csv << ",x" << d + 1;
  csv << '\n';
  RunRecord rec;
  rec.command = "simulate";
  rec.json = record_header("simulate", c, ReferenceArc{{}, c.problem.reference ? "closed_form" : "none"});
  Json runs = Json::array();
  for (auto kind : c.audit.policies) {
    for (int k : c.meshes) {
      TimeMesh m = TimeMesh::uniform(P.T, k);
      DiscreteTrajectory tr = simulate(P, m, make_policy(c, kind, k));
      for (int j = 0; j <= k; ++j) {
        csv << policy_name(kind) << ',' << k << ',' << j << ',' << fmt(m.t(j));
        for (int d = 0; d < P.dim; ++d) csv << ',' << fmt(tr.x[j](d));
        csv << '\n';
      }
      Json r{{"policy", policy_name(kind)}, {"k", k}, {"feasibility_residual", jnum(feasibility_residual(P, tr))},
             {"x_T", jvec(tr.x.back())}};
      if (P.reference) r["sup_error_vs_reference"] = jnum(w12_distance(tr.extension(), *P.reference).sup);
      runs.push_back(r);
    }
  }
  rec.json["runs"] = runs;
  rec.json["wall_clock_seconds"] = seconds_since(t0);
  rec.files["simulate.csv"] = csv.str();
  rec.files["simulate.json"] = rec.json.dump(2) + "\n";
  return rec;
}

// Randomized Gronwall suites: generated sequences satisfy each hypothesis with equality
// (the extremal case) or with random slack, and must stay below the certified bound.
struct SuiteOutcome {
  int instances = 0;
  int failures = 0;
  double worst_slack = std::numeric_limits<double>::infinity();  // min (bound - actual) / max(1, bound)
  Json first_failure;
};

inline SuiteOutcome gronwall_forward_suite(int instances, unsigned long long seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SuiteOutcome o;
  for (int it = 0; it < instances; ++it) {
    const int N = 1 + static_cast<int>(u(rng) * 30);
    std::vector<double> s(N), r(N), g(N);
    for (int n = 0; n < N; ++n) {
      s[n] = u(rng);
      r[n] = 0.1 * u(rng);
      g[n] = 0.2 * u(rng);
    }
    const double e0 = u(rng);
    auto B = discrete_gronwall_forward(e0, s, r, g);
    std::vector<double> e{e0};
    double sum = 0.0;
    for (int n = 0; n < N; ++n) {
      double next = s[n] + r[n] * sum + (1.0 + g[n]) * e[n];
      next *= 0.5 + 0.5 * (it % 2 == 0 ? 1.0 : u(rng));
      sum += e[n];
      e.push_back(next);
    }
    ++o.instances;
    for (int n = 0; n <= N; ++n) {
      double slack = (B[n] - e[n]) / std::max(1.0, B[n]);
      o.worst_slack = std::min(o.worst_slack, slack);
      if (slack < -1e-12) {
        if (o.failures++ == 0)
          o.first_failure = {{"suite", "forward"}, {"instance", it}, {"index", n}, {"e0", e0}, {"sigma", s}, {"rho", r}, {"gamma", g}};
        break;
      }
    }
  }
  return o;
}

inline SuiteOutcome gronwall_backward_suite(int instances, unsigned long long seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SuiteOutcome o;
  for (int it = 0; it < instances; ++it) {
    const int k = 2 + static_cast<int>(u(rng) * 30);
    std::vector<double> c(k), b(k), a(k);
    for (int j = 0; j < k; ++j) {
      c[j] = u(rng);
      b[j] = 0.1 * u(rng);
      a[j] = 0.2 * u(rng);
    }
    const double xk = u(rng);
    auto bound = discrete_gronwall_backward(xk, c, b, a);
    std::vector<double> x(k + 2, 0.0);
    x[k] = xk;
    for (int j = k - 1; j >= 0; --j) {
      double tail = 0.0;
      for (int i = j + 1; i <= k; ++i) tail += x[i + 1];
      x[j] = c[j] + b[j] * tail + (1.0 + a[j]) * x[j + 1];
      x[j] *= 0.5 + 0.5 * (it % 2 == 0 ? 1.0 : u(rng));
    }
    ++o.instances;
    for (int j = 0; j <= k - 2; ++j) {
      double slack = (bound[j] - x[j + 1]) / std::max(1.0, bound[j]);
      o.worst_slack = std::min(o.worst_slack, slack);
      if (slack < -1e-12) {
        if (o.failures++ == 0)
          o.first_failure = {{"suite", "backward"}, {"instance", it}, {"index", j}, {"x_k", xk}, {"c", c}, {"b", b}, {"a", a}};
        break;
      }
    }
  }
  return o;
}

// rho' = a + b1 rho + b2 int rho with constant random coefficients, integrated by RK4 on the
// augmented system (rho, int rho) with 50 substeps per grid cell.
inline SuiteOutcome gronwall_continuous_suite(int instances, unsigned long long seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SuiteOutcome o;
  for (int it = 0; it < instances; ++it) {
    const double a = 2.0 * u(rng), b1 = 2.0 * u(rng), b2 = 2.0 * u(rng), rho0 = u(rng), T = 0.5 + 1.5 * u(rng);
    std::vector<double> grid(21);
    for (int i = 0; i <= 20; ++i) grid[i] = T * i / 20.0;
    auto bound = continuous_gronwall(
        rho0, [a](double) { return a; }, [b1](double) { return b1; }, [b2](double) { return b2; }, grid);
    double r = rho0, q = 0.0;
    auto rhs = [&](double rr, double qq) { return std::array<double, 2>{a + b1 * rr + b2 * qq, rr}; };
    ++o.instances;
    for (int i = 0; i < 20; ++i) {
      const double dt = (grid[i + 1] - grid[i]) / 50.0;
      for (int s = 0; s < 50; ++s) {
        auto k1 = rhs(r, q);
        auto k2 = rhs(r + 0.5 * dt * k1[0], q + 0.5 * dt * k1[1]);
        auto k3 = rhs(r + 0.5 * dt * k2[0], q + 0.5 * dt * k2[1]);
        auto k4 = rhs(r + dt * k3[0], q + dt * k3[1]);
        r += dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]);
        q += dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]);
      }
      double slack = (bound[i + 1] - r) / std::max(1.0, bound[i + 1]);
      o.worst_slack = std::min(o.worst_slack, slack);
      if (slack < -1e-9) {
        if (o.failures++ == 0)
          o.first_failure = {{"suite", "continuous"}, {"instance", it}, {"a", a}, {"b1", b1}, {"b2", b2}, {"rho0", rho0}, {"T", T}};
        break;
      }
    }
  }
  return o;
}

struct AuditRow {
  std::string audit;
  std::string policy;
  int k = 0;
  bool pass = true;
  double value = 0.0;  // measured quantity (worst ratio or slack)
  std::string witness;
};

// A-priori bounds along simulated trajectories, declared constants, kernel growth and Gronwall suites.
inline RunRecord run_bound_audit(const ExperimentConfig& c) {
  auto t0 = std::chrono::steady_clock::now();
  const Problem& P = c.problem;
  std::vector<AuditRow> rows;
  Json failures = Json::array();
  const AprioriBounds ab = apriori_bounds(P.x0, P.constants.m_F, P.kernel.beta(), P.T);

  for (auto kind : c.audit.policies) {
    for (int k : c.meshes) {
      TimeMesh m = TimeMesh::uniform(P.T, k);
      SelectionPolicy pol = make_policy(c, kind, k);
      DiscreteTrajectory tr = simulate(P, m, pol);
      AuditRow r1{"M1", policy_name(kind), k, true, 0.0, ""};
      AuditRow r2{"M2", policy_name(kind), k, true, 0.0, ""};
      for (int j = 0; j <= k; ++j) {
        double v = (1.0 + tr.x[j].norm()) / ab.M1;
        r1.value = std::max(r1.value, v);
        if (v > 1.0 + 1e-12 && r1.pass) {
          r1.pass = false;
          r1.witness = "t=" + fmt(m.t(j));
        }
      }
      for (int j = 0; j < k; ++j) {
        double v = ab.M2 > 0.0 ? tr.v[j].norm() / ab.M2 : (tr.v[j].norm() > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
        r2.value = std::max(r2.value, v);
        if (v > 1.0 + 1e-12 && r2.pass) {
          r2.pass = false;
          r2.witness = "t=" + fmt(m.t(j));
        }
      }
      for (const auto* r : {&r1, &r2}) {
        rows.push_back(*r);
        if (!r->pass)
          failures.push_back({{"audit", r->audit}, {"policy", r->policy}, {"k", k}, {"witness", r->witness},
                              {"seed", pol.seed}, {"M1", ab.M1}, {"M2", ab.M2}});
      }
    }
  }

  {
    GrowthConstants g = sample_growth_constants(P.F, P.box, P.T);
    AuditRow rm{"declared_m_F", "-", 0, g.m_F <= P.constants.m_F * (1.0 + 1e-9) + 1e-12, g.m_F, ""};
    AuditRow rl{"declared_l_F", "-", 0, g.l_F <= P.constants.l_F * (1.0 + 1e-9) + 1e-12, g.l_F, ""};
    if (!rm.pass) rm.witness = "sampled=" + fmt(g.m_F);
    if (!rl.pass) rl.witness = "sampled=" + fmt(g.l_F);
    for (const auto* r : {&rm, &rl}) {
      rows.push_back(*r);
      if (!r->pass) failures.push_back({{"audit", r->audit}, {"sampled", r->value}});
    }
  }
  {
    auto viol = growth_audit(P.kernel, P.T, ab.M1, c.audit.growth_samples, static_cast<unsigned>(c.seed));
    AuditRow r{"kernel_growth", "-", 0, viol.empty(), static_cast<double>(viol.size()), ""};
    if (!viol.empty()) {
      r.witness = "t=" + fmt(viol[0].t) + " s=" + fmt(viol[0].s);
      failures.push_back({{"audit", "kernel_growth"}, {"t", viol[0].t}, {"s", viol[0].s}, {"x", jvec(viol[0].x)},
                          {"value", viol[0].value}, {"bound", viol[0].bound}});
    }
    rows.push_back(r);
    JacobianCheck jc = jacobian_fd_check(P.kernel, P.T, ab.M1, c.audit.growth_samples, static_cast<unsigned>(c.seed));
    rows.push_back({"kernel_jacobian", "-", 0, jc.max_relative_error < 1e-6, jc.max_relative_error, ""});
  }
  {
    const int n = c.audit.gronwall_instances;
    std::pair<const char*, SuiteOutcome> suites[] = {{"gronwall_forward", gronwall_forward_suite(n, c.seed + 1)},
                                                     {"gronwall_backward", gronwall_backward_suite(n, c.seed + 2)},
                                                     {"gronwall_continuous", gronwall_continuous_suite(n, c.seed + 3)}};
    for (auto& [name, o] : suites) {
      rows.push_back({name, "-", o.instances, o.failures == 0, o.instances ? o.worst_slack : 0.0,
                      o.failures ? std::to_string(o.failures) + " failing" : ""});
      if (o.failures) failures.push_back(o.first_failure);
    }
  }

  std::ostringstream csv;
  csv << kSchemaLine << '\n' << "audit,policy,k,status,value,witness\n";
  bool all = true;
  for (const auto& r : rows) {
    all = all && r.pass;
    csv << r.audit << ',' << r.policy << ',' << r.k << ',' << (r.pass ? "PASS" : "FAIL") << ',' << fmt(r.value) << ','
        << r.witness << '\n';
  }
  RunRecord rec;
  rec.command = "audit";
  rec.json = record_header("audit", c, ReferenceArc{{}, c.problem.reference ? "closed_form" : "none"});
  rec.json["M1"] = ab.M1;
  rec.json["M2"] = ab.M2;
  rec.json["passed"] = all;
  rec.json["failures"] = failures;
  rec.json["wall_clock_seconds"] = seconds_since(t0);
  rec.files["audit.csv"] = csv.str();
  rec.files["audit.json"] = rec.json.dump(2) + "\n";
  rec.exit_code = all ? 0 : 1;
  return rec;
}

}  // namespace idikit

#endif
