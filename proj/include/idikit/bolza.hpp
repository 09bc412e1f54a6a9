#ifndef IDIKIT_BOLZA_HPP
#define IDIKIT_BOLZA_HPP

#include "idikit/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace idikit {

// (P_k): minimize phi(x_k) + sum h_j l(t_j,x_j,v_j) + 1/2 sum int_cell |v_j - xbar'|^2
// over v_j in F(t_j,x_j) + w_j, with x_k in Omega + zeta_k B and the localization budgets.
struct DiscreteBolzaProblem {
  Problem data;
  TimeMesh mesh;
  Arc xbar;
  double epsilon = 1.0;
  double zeta_k = 0.0;
  std::vector<Vector> dxbar;    // xbar(t_{j+1}) - xbar(t_j)
  std::vector<double> xbar_sq;  // int_cell |xbar'|^2
  std::vector<double> xbar_var; // int_cell |xbar'|^2 - |dxbar|^2 / h, the part of the penalty no control can remove
  std::vector<Vector> xbar_nodes;
};

inline DiscreteBolzaProblem make_bolza_problem(const Problem& P, const TimeMesh& mesh, const Arc& xbar, double zeta_k) {
  require(zeta_k >= 0.0, "bolza problem: zeta_k must be nonnegative");
  DiscreteBolzaProblem B{P, mesh, xbar, P.epsilon, zeta_k, {}, {}, {}, {}};
  for (int j = 0; j <= mesh.k(); ++j) B.xbar_nodes.push_back(xbar.value(mesh.t(j)));
  for (int j = 0; j < mesh.k(); ++j) {
    B.dxbar.push_back(B.xbar_nodes[j + 1] - B.xbar_nodes[j]);
    B.xbar_sq.push_back(integrate_scalar([&](double t) { return xbar.derivative(t).squaredNorm(); }, mesh.t(j), mesh.t(j + 1)));
    B.xbar_var.push_back(std::max(0.0, B.xbar_sq[j] - B.dxbar[j].squaredNorm() / mesh.h(j)));
  }
  return B;
}

// Deviations u_j in U, v_j = f(t_j,x_j) + u_j + w_j.
struct ControlParameterization {
  std::vector<Vector> u;
};

inline DiscreteTrajectory forward(const DiscreteBolzaProblem& B, const ControlParameterization& c) {
  const TimeMesh& m = B.mesh;
  require(static_cast<int>(c.u.size()) == m.k(), "forward: control count mismatch");
  DiscreteTrajectory tr{m, {}, {}, {}};
  tr.x.push_back(B.data.x0);
  for (int j = 0; j < m.k(); ++j) {
    Vector w = kernel_average_w(B.data.kernel, m, tr.x, j);
    Vector v = B.data.F.f(m.t(j), tr.x[j]) + c.u[j] + w;
    tr.x.push_back(tr.x[j] + m.h(j) * v);
    tr.v.push_back(std::move(v));
    tr.w.push_back(std::move(w));
  }
  return tr;
}

// Controls reproducing a feasible trajectory on the same mesh.
inline ControlParameterization controls_from(const DiscreteBolzaProblem& B, const DiscreteTrajectory& tr) {
  ControlParameterization c;
  for (int j = 0; j < B.mesh.k(); ++j)
    c.u.push_back(B.data.F.project_offset(tr.v[j] - tr.w[j] - B.data.F.f(B.mesh.t(j), tr.x[j])));
  return c;
}

struct CostBreakdown {
  double terminal = 0.0;
  double running = 0.0;
  double penalty = 0.0;  // 1/2 sum int |v_j - xbar'|^2
  double total() const { return terminal + running + penalty; }
};

// Sums run in long double and the penalty is written as h|v - dxbar/h|^2 plus a constant, so
// differences between nearby iterates stay above rounding noise for longer.
inline CostBreakdown cost_breakdown(const DiscreteBolzaProblem& B, const DiscreteTrajectory& tr) {
  CostBreakdown c;
  const TimeMesh& m = B.mesh;
  c.terminal = B.data.phi.value(tr.x.back());
  long double run = 0.0L, pen = 0.0L;
  for (int j = 0; j < m.k(); ++j) {
    const double h = m.h(j);
    run += static_cast<long double>(h * B.data.l.value(m.t(j), tr.x[j], tr.v[j]));
    pen += 0.5L * static_cast<long double>(h * (tr.v[j] - B.dxbar[j] / h).squaredNorm());
    pen += 0.5L * static_cast<long double>(B.xbar_var[j]);
  }
  c.running = static_cast<double>(run);
  c.penalty = static_cast<double>(pen);
  return c;
}

inline double cost_Jk(const DiscreteBolzaProblem& B, const DiscreteTrajectory& tr) { return cost_breakdown(B, tr).total(); }

// Backward sweep along a trajectory. With lambda = 1 and p_k = -(grad phi + n) it yields the exact
// gradient of the cost (plus n . x_k) with respect to u_j as -h_j eta_j.
struct AdjointSweep {
  std::vector<Vector> p;      // p_0..p_k
  std::vector<Vector> eta;    // eta_j = p_{j+1} - lambda (grad_v l_j + theta_j / h_j)
  std::vector<Vector> theta;  // theta_j
  std::vector<Vector> grad;   // d cost / d u_j
};

inline AdjointSweep adjoint_sweep(const DiscreteBolzaProblem& B, const DiscreteTrajectory& tr, const QuadratureTensors& q,
                                  double lambda, const Vector& p_k) {
  const TimeMesh& m = B.mesh;
  const int k = m.k();
  const Problem& P = B.data;
  AdjointSweep s;
  s.p.assign(k + 1, Vector::Zero(P.dim));
  s.eta.assign(k, Vector::Zero(P.dim));
  s.theta.resize(k);
  s.grad.resize(k);
  s.p[k] = p_k;
  for (int j = k - 1; j >= 0; --j) {
    const double h = m.h(j), t = m.t(j);
    s.theta[j] = h * tr.v[j] - B.dxbar[j];
    Vector Ghat = P.l.grad_v(t, tr.x[j], tr.v[j]) + s.theta[j] / h;
    s.eta[j] = s.p[j + 1] - lambda * Ghat;
    s.grad[j] = -h * s.eta[j];
    Vector pj = s.p[j + 1] - h * lambda * P.l.grad_x(t, tr.x[j], tr.v[j]) +
                h * P.F.jacobian(t, tr.x[j]).transpose() * s.eta[j];
    if (!P.kernel.is_zero()) {
      pj += q.mu[j] * s.eta[j];
      for (int nu = j + 1; nu <= k - 1; ++nu) pj += q.xi[nu][j] * s.eta[nu];
    }
    s.p[j] = std::move(pj);
  }
  return s;
}

// Gradient of cost_Jk (plus an optional linear term n . x_k) with respect to the deviations u_j.
inline std::vector<Vector> cost_gradient(const DiscreteBolzaProblem& B, const ControlParameterization& c,
                                         const Vector* terminal_extra = nullptr) {
  if (!B.data.l.smooth()) throw UnsupportedError("cost_gradient: nonsmooth running cost is not supported in the solver");
  DiscreteTrajectory tr = forward(B, c);
  QuadratureTensors q = compute_tensors(B.data.kernel, B.mesh, tr.x, !B.data.kernel.is_zero());
  Vector pk = -B.data.phi.gradient(tr.x.back());
  if (terminal_extra) pk -= *terminal_extra;
  return adjoint_sweep(B, tr, q, 1.0, pk).grad;
}

struct SolverOptions {
  int max_iterations = 5000;
  double tol_stat = 1e-8;
  double armijo_c1 = 1e-4;
  double endpoint_tol = 1e-6;
  double rho0 = 10.0;
  int max_outer = 25;
};

struct SolverLogEntry {
  int iteration;
  int stage;  // multiplier-update stage for the endpoint constraint
  double merit;
  double cost;
  double step;
  double stationarity;
};

struct SolveResult {
  DiscreteTrajectory trajectory;
  ControlParameterization controls;
  std::vector<SolverLogEntry> log;
  bool stationary = false;
  int iterations = 0;
  double stationarity = 0.0;
  double cost = 0.0;
  double endpoint_violation = 0.0;
  std::vector<double> endpoint_multipliers;
  Vector endpoint_normal;  // sum nu_i grad c_i(x_k), an element of N_{Omega_k}(x_k)
  double rho = 0.0;
  bool tube_active = false;    // nodal eps/2 tube
  bool budget_active = false;  // derivative L2 budget eps/2
  double tube_gap = 0.0;
  double budget_gap = 0.0;
  int rejected_by_trust_region = 0;
  bool descent_ok = true;
};

namespace detail {

inline double tube_excess(const DiscreteBolzaProblem& B, const DiscreteTrajectory& tr) {
  double m = 0.0;
  for (int j = 0; j <= B.mesh.k(); ++j) m = std::max(m, (tr.x[j] - B.xbar_nodes[j]).norm());
  return m - 0.5 * B.epsilon;
}

inline double budget_excess(const DiscreteBolzaProblem& B, const DiscreteTrajectory& tr) {
  return 2.0 * cost_breakdown(B, tr).penalty - 0.5 * B.epsilon;
}

}  // namespace detail

// Projected gradient in the L2-in-time metric with Armijo backtracking and Barzilai-Borwein trial steps.
// The endpoint constraint enters through an augmented Lagrangian with multiplier updates and x10 escalation.
inline SolveResult solve_Pk(const DiscreteBolzaProblem& B, const ControlParameterization& init, const SolverOptions& opt = {}) {
  const TimeMesh& m = B.mesh;
  const int k = m.k();
  const Problem& P = B.data;
  const double zeta = B.zeta_k;

  ControlParameterization u = init;
  for (int j = 0; j < k; ++j) u.u[j] = P.F.project_offset(u.u[j]);

  std::vector<double> nu;
  double rho = opt.rho0;
  {
    auto cs = P.omega.constraints(P.x0, zeta);
    nu.assign(cs.size(), 0.0);
  }

  struct Eval {
    DiscreteTrajectory tr;
    double merit;
    double cost;
    Vector term_grad;  // gradient of the augmented term w.r.t. x_k
  };
  auto evaluate = [&](const ControlParameterization& c) {
    Eval e{forward(B, c), 0.0, 0.0, Vector::Zero(P.dim)};
    e.cost = cost_Jk(B, e.tr);
    double aug = 0.0;
    auto cs = P.omega.constraints(e.tr.x.back(), zeta);
    for (std::size_t i = 0; i < cs.size(); ++i) {
      if (cs[i].equality) {
        aug += nu[i] * cs[i].value + 0.5 * rho * cs[i].value * cs[i].value;
        e.term_grad += (nu[i] + rho * cs[i].value) * cs[i].gradient;
      } else {
        double s = std::max(0.0, nu[i] + rho * cs[i].value);
        aug += (s * s - nu[i] * nu[i]) / (2.0 * rho);
        e.term_grad += s * cs[i].gradient;
      }
    }
    e.merit = e.cost + aug;
    return e;
  };
  auto gradient = [&](const ControlParameterization& c, const Eval& e) {
    QuadratureTensors q = compute_tensors(P.kernel, m, e.tr.x, !P.kernel.is_zero());
    Vector pk = -P.phi.gradient(e.tr.x.back()) - e.term_grad;
    (void)c;
    return adjoint_sweep(B, e.tr, q, 1.0, pk).grad;
  };
  auto project_step = [&](const ControlParameterization& c, const std::vector<Vector>& g, double s) {
    ControlParameterization out;
    out.u.resize(k);
    for (int j = 0; j < k; ++j) out.u[j] = P.F.project_offset(c.u[j] - s * g[j] / m.h(j));
    return out;
  };
  auto stationarity = [&](const ControlParameterization& c, const std::vector<Vector>& g) {
    double mx = 0.0;
    for (int j = 0; j < k; ++j) mx = std::max(mx, (P.F.project_offset(c.u[j] - g[j] / m.h(j)) - c.u[j]).norm());
    return mx;
  };

  SolveResult R;
  const bool tube_ok0 = detail::tube_excess(B, forward(B, u)) <= 0.0;
  const bool budget_ok0 = detail::budget_excess(B, forward(B, u)) <= 0.0;

  int iter = 0;
  int stage = 0;
  double prev_violation = std::numeric_limits<double>::infinity();
  bool inner_stationary = false;
  Eval cur = evaluate(u);
  std::vector<Vector> g = gradient(u, cur);
  double stat = stationarity(u, g);
  for (;;) {
    // Inner projected-gradient loop.
    double bb = 1.0;
    inner_stationary = false;
    ControlParameterization prev_u;
    std::vector<Vector> prev_g;
    bool have_prev = false;
    while (iter < opt.max_iterations) {
      stat = stationarity(u, g);
      if (stat < opt.tol_stat) {
        inner_stationary = true;
        break;
      }
      if (have_prev) {
        double ss = 0.0, sy = 0.0;
        for (int j = 0; j < k; ++j) {
          Vector du = u.u[j] - prev_u.u[j];
          Vector dg = (g[j] - prev_g[j]) / m.h(j);
          ss += m.h(j) * du.squaredNorm();
          sy += m.h(j) * du.dot(dg);
        }
        if (sy > 0.0 && std::isfinite(ss / sy)) bb = std::clamp(ss / sy, 1e-10, 1e10);
      }
      double s = bb;
      bool accepted = false;
      Eval trial{};
      ControlParameterization cand;
      for (int bt = 0; bt < 80; ++bt, s *= 0.5) {
        cand = project_step(u, g, s);
        double dec = 0.0;
        for (int j = 0; j < k; ++j) dec += g[j].dot(cand.u[j] - u.u[j]);
        if (dec >= 0.0) continue;
        trial = evaluate(cand);
        if (!(trial.merit <= cur.merit + opt.armijo_c1 * dec)) continue;
        if (!(trial.merit < cur.merit)) continue;
        if ((tube_ok0 && detail::tube_excess(B, trial.tr) > 0.0) ||
            (budget_ok0 && detail::budget_excess(B, trial.tr) > 0.0)) {
          ++R.rejected_by_trust_region;
          continue;
        }
        accepted = true;
        break;
      }
      ++iter;
      if (!accepted) break;
      prev_u = u;
      prev_g = g;
      have_prev = true;
      u = std::move(cand);
      cur = std::move(trial);
      g = gradient(u, cur);
      R.log.push_back({iter, stage, cur.merit, cur.cost, s, stationarity(u, g)});
    }
    // Multiplier update for the endpoint constraint.
    auto cs = P.omega.constraints(cur.tr.x.back(), zeta);
    if (cs.empty()) break;
    double viol = 0.0;
    for (std::size_t i = 0; i < cs.size(); ++i) {
      if (cs[i].equality) {
        viol = std::max(viol, std::abs(cs[i].value));
        nu[i] += rho * cs[i].value;
      } else {
        viol = std::max(viol, std::max(0.0, cs[i].value));
        nu[i] = std::max(0.0, nu[i] + rho * cs[i].value);
      }
    }
    R.endpoint_violation = viol;
    if ((viol < opt.endpoint_tol && inner_stationary) || iter >= opt.max_iterations || stage >= opt.max_outer) break;
    if (viol > 0.25 * prev_violation) rho *= 10.0;
    prev_violation = viol;
    ++stage;
    cur = evaluate(u);
    g = gradient(u, cur);
  }

  R.controls = u;
  R.trajectory = cur.tr;
  R.cost = cur.cost;
  R.iterations = iter;
  R.stationarity = stat;
  R.stationary = inner_stationary;
  R.rho = rho;
  R.endpoint_multipliers = nu;
  R.endpoint_normal = Vector::Zero(P.dim);
  {
    auto cs = P.omega.constraints(cur.tr.x.back(), zeta);
    for (std::size_t i = 0; i < cs.size(); ++i) R.endpoint_normal += nu[i] * cs[i].gradient;
    if (!cs.empty() && R.endpoint_violation >= opt.endpoint_tol) R.stationary = false;
  }
  R.tube_gap = -detail::tube_excess(B, cur.tr);
  R.budget_gap = -detail::budget_excess(B, cur.tr);
  R.tube_active = R.tube_gap <= 1e-6 * std::max(1.0, B.epsilon);
  R.budget_active = R.budget_gap <= 1e-6 * std::max(1.0, B.epsilon);
  for (std::size_t i = 1; i < R.log.size(); ++i)
    if (R.log[i].stage == R.log[i - 1].stage && !(R.log[i].merit < R.log[i - 1].merit)) R.descent_ok = false;
  return R;
}

}  // namespace idikit

#endif
