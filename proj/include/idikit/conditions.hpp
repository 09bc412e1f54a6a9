#ifndef IDIKIT_CONDITIONS_HPP
#define IDIKIT_CONDITIONS_HPP

#include "idikit/bolza.hpp"

#include <random>

namespace idikit {

// exact: the first-order system of the discrete problem as it is solved here.
// as_stated: doubled mu_j p_{j+1} coupling and memory sums over p alone.
enum class ConditionForm { exact, as_stated };

struct MultiplierSet {
  double lambda = 1.0;
  std::vector<Vector> p;      // p_0..p_k
  std::vector<Vector> eta;    // graph-normal component per cell
  std::vector<Vector> theta;  // theta_j
  QuadratureTensors tensors;  // xi, mu along the trajectory the multipliers belong to
  Vector endpoint_normal;     // element of N_{Omega_k}(x_k) used at the terminal node
  double scale = 1.0;         // raw lambda + |p_k| before normalization
  bool normalized = false;
  bool degenerate = false;    // adjoint identically zero
  bool abnormal = false;      // lambda = 0 branch
  ConditionForm form = ConditionForm::exact;
};

namespace detail {

inline Vector stack(const Vector& a, const Vector& b) {
  Vector s(a.size() + b.size());
  s << a, b;
  return s;
}

// N_U part of the graph-normal generators: the second halves of (-J^T e, e).
inline PolyhedralSet second_half(const PolyhedralSet& G, Eigen::Index n) {
  PolyhedralSet K;
  for (const auto& r : G.rays) K.rays.push_back(r.tail(n));
  for (const auto& l : G.lines) K.lines.push_back(l.tail(n));
  return K;
}

inline Vector l_v_selection(const RunningCost& l, double t, const Vector& x, const Vector& v) {
  if (l.smooth()) return l.grad_v(t, x, v);
  auto gs = l.active_gradients(t, x, v);
  Vector s = Vector::Zero(v.size());
  for (const auto& g : gs) s += g.tail(v.size());
  return s / static_cast<double>(gs.size());
}

inline Vector l_x_selection(const RunningCost& l, double t, const Vector& x, const Vector& v) {
  if (l.smooth()) return l.grad_x(t, x, v);
  auto gs = l.active_gradients(t, x, v);
  Vector s = Vector::Zero(x.size());
  for (const auto& g : gs) s += g.head(x.size());
  return s / static_cast<double>(gs.size());
}

// First component of the left-hand pair at node j without the (p_{j+1}-p_j)/h term.
inline Vector memory_terms(const DiscreteBolzaProblem& B, const QuadratureTensors& q, const std::vector<Vector>& p,
                           const std::vector<Vector>& eta, double lambda, const std::vector<Vector>& Ghat, int j,
                           ConditionForm form) {
  const int k = B.mesh.k();
  const double h = B.mesh.h(j);
  Vector a = Vector::Zero(B.data.dim);
  if (B.data.kernel.is_zero()) return a;
  if (form == ConditionForm::exact) {
    a += q.mu[j] * eta[j];
    for (int nu = j + 1; nu <= k - 1; ++nu) a += q.xi[nu][j] * eta[nu];
  } else {
    a += 2.0 * q.mu[j] * p[j + 1] - lambda * q.mu[j] * Ghat[j];
    for (int nu = j + 1; nu <= k - 1; ++nu) a += q.xi[nu][j] * p[nu + 1];
  }
  return a / h;
}

}  // namespace detail

struct AdjointContext {
  DiscreteTrajectory trajectory;
  QuadratureTensors tensors;
};

// Backward recursion for the discrete multipliers with lambda given and
// -p_k = lambda grad phi(x_k) + endpoint_normal. Interior steps pick p_j so that the first
// component matches the lift of the nearest graph-normal element.
inline MultiplierSet adjoint_solve_smooth(const DiscreteBolzaProblem& B, const DiscreteTrajectory& tr, double lambda,
                                          const Vector& endpoint_normal, ConditionForm form = ConditionForm::exact,
                                          bool normalize = true) {
  require(lambda >= 0.0, "adjoint_solve_smooth: lambda must be nonnegative");
  const TimeMesh& m = B.mesh;
  const int k = m.k();
  const Problem& P = B.data;
  const Eigen::Index n = P.dim;
  MultiplierSet M;
  M.tensors = compute_tensors(P.kernel, m, tr.x, !P.kernel.is_zero());
  const QuadratureTensors& q = M.tensors;
  M.lambda = lambda;
  M.form = form;
  M.endpoint_normal = endpoint_normal;
  M.p.assign(k + 1, Vector::Zero(n));
  M.eta.assign(k, Vector::Zero(n));
  M.theta.resize(k);
  std::vector<Vector> Ghat(k);
  for (int j = 0; j < k; ++j) {
    M.theta[j] = m.h(j) * tr.v[j] - B.dxbar[j];
    Ghat[j] = detail::l_v_selection(P.l, m.t(j), tr.x[j], tr.v[j]) + M.theta[j] / m.h(j);
  }
  M.p[k] = -lambda * P.phi.gradient(tr.x.back()) - endpoint_normal;
  for (int j = k - 1; j >= 0; --j) {
    const double h = m.h(j), t = m.t(j);
    M.eta[j] = M.p[j + 1] - lambda * Ghat[j];
    Vector sel = tr.v[j] - tr.w[j];
    Vector fx = P.F.f(t, tr.x[j]);
    sel = fx + P.F.project_offset(sel - fx);
    PolyhedralSet G = graph_normal_cone(P.F, t, tr.x[j], sel);
    Vector eta_star = project(detail::second_half(G, n), M.eta[j]).point;
    Matrix J = P.F.jacobian(t, tr.x[j]);
    // (p_{j+1} - p_j)/h + memory - lambda l_x = -J^T eta*
    Vector mem = detail::memory_terms(B, q, M.p, M.eta, lambda, Ghat, j, form);
    Vector lx = detail::l_x_selection(P.l, t, tr.x[j], tr.v[j]);
    M.p[j] = M.p[j + 1] + h * (mem - lambda * lx + J.transpose() * eta_star);
  }
  bool allzero = lambda == 0.0;
  for (const auto& pj : M.p) allzero = allzero && pj.norm() == 0.0;
  bool pzero = true;
  for (const auto& pj : M.p) pzero = pzero && pj.norm() == 0.0;
  M.degenerate = pzero;
  M.abnormal = lambda == 0.0;
  M.scale = lambda + M.p[k].norm();
  if (normalize) {
    if (allzero || M.scale == 0.0) throw DegenerateMultiplierError("adjoint_solve_smooth: all multipliers vanish");
    const double s = M.scale;
    M.lambda /= s;
    for (auto& pj : M.p) pj /= s;
    for (auto& e : M.eta) e /= s;
    M.endpoint_normal /= s;
    // Exact normalization in floating point: nudge lambda (or scale p_k) until the sum is 1.
    double pk = M.p[k].norm();
    if (M.lambda > 0.0) {
      M.lambda = 1.0 - pk;
      for (int it = 0; it < 8 && M.lambda + pk != 1.0; ++it)
        M.lambda = std::nextafter(M.lambda, M.lambda + pk < 1.0 ? 2.0 : -1.0);
      M.lambda = std::max(0.0, M.lambda);
    }
    M.normalized = true;
  }
  return M;
}

// lambda + |p_k|; zero raw multipliers are the excluded case.
inline double nontriviality_value(const MultiplierSet& M) {
  double v = M.lambda + M.p.back().norm();
  if (v == 0.0) throw DegenerateMultiplierError("nontriviality: all multipliers vanish");
  return v;
}

// Distance from the left-hand pair at node j to lambda dl + N_gph F_j at (x_j, v_j - w_j).
inline double euler_lagrange_residual(const DiscreteBolzaProblem& B, const DiscreteTrajectory& tr, const MultiplierSet& M,
                                      int j) {
  const TimeMesh& m = B.mesh;
  const int k = m.k();
  require(j >= 0 && j < k, "euler_lagrange_residual: node index out of range");
  const Problem& P = B.data;
  const double h = m.h(j), t = m.t(j);
  std::vector<Vector> Ghat(k);
  for (int i = 0; i < k; ++i)
    Ghat[i] = detail::l_v_selection(P.l, m.t(i), tr.x[i], tr.v[i]) + M.theta[i] / m.h(i);
  std::vector<Vector> eta(k);
  for (int i = 0; i < k; ++i) eta[i] = M.p[i + 1] - M.lambda * Ghat[i];
  Vector A = (M.p[j + 1] - M.p[j]) / h + detail::memory_terms(B, M.tensors, M.p, eta, M.lambda, Ghat, j, M.form);
  Vector Bv = M.p[j + 1] - M.lambda * M.theta[j] / h;

  Vector sel = tr.v[j] - tr.w[j];
  Vector fx = P.F.f(t, tr.x[j]);
  sel = fx + P.F.project_offset(sel - fx);
  PolyhedralSet S = graph_normal_cone(P.F, t, tr.x[j], sel);
  if (M.lambda > 0.0) {
    if (P.l.smooth()) {
      S.points.push_back(M.lambda * detail::stack(P.l.grad_x(t, tr.x[j], tr.v[j]), P.l.grad_v(t, tr.x[j], tr.v[j])));
    } else {
      for (const auto& g : P.l.active_gradients(t, tr.x[j], tr.v[j])) S.points.push_back(M.lambda * g);
    }
  }
  return distance(S, detail::stack(A, Bv));
}

// Distance from -p_T to lambda grad phi(x_T) + N_{Omega + zeta B}(x_T).
inline double transversality_residual(const Problem& P, const Vector& xT, const Vector& pT, double lambda, double zeta = 0.0,
                                      double tol = 1e-6) {
  if (!P.omega.contains(xT, zeta, tol)) throw InfeasiblePointError("transversality: endpoint outside the endpoint set");
  PolyhedralSet K = P.omega.normal_cone(xT, zeta, tol);
  return distance(K, Vector(-pT - lambda * P.phi.gradient(xT)));
}

// Distance of (p'(tau) + int_tau^T grad g(t,tau,xbar(tau))^T p(t) dt, p(tau)) to lambda dl + N_gph F(tau,.)
// at (xbar(tau), xbar'(tau) - ybar(tau)). The joint distance is used because the second slot
// pins the graph normal; the pure first-slot set is empty off the graph.
inline double volterra_residual(const Problem& P, const Arc& xbar, const PiecewiseLinearArc& p, double lambda, double tau,
                                const TimeMesh& panels) {
  require(tau > 0.0 && tau < P.T, "volterra_residual: tau must lie in (0,T)");
  bool pzero = true;
  for (const auto& pj : p.nodes()) pzero = pzero && pj.norm() == 0.0;
  if (lambda == 0.0 && pzero) throw DegenerateMultiplierError("volterra_residual: trivial multipliers rejected");
  const Eigen::Index n = P.dim;
  Vector pt = p.value(tau);
  Vector lhs = p.derivative(tau) +
               volterra_adjoint_integral(P.kernel, xbar.value, [&p](double t) { return p.value(t); }, tau, panels);
  Vector xt = xbar.value(tau), xd = xbar.derivative(tau);
  Vector y = xd - continuous_accumulator(P.kernel, xbar.value, tau, panels);
  Vector fx = P.F.f(tau, xt);
  Vector sel = fx + P.F.project_offset(y - fx);
  PolyhedralSet S = graph_normal_cone(P.F, tau, xt, sel);
  if (lambda > 0.0) {
    if (P.l.smooth()) {
      S.points.push_back(lambda * detail::stack(P.l.grad_x(tau, xt, xd), P.l.grad_v(tau, xt, xd)));
    } else {
      for (const auto& g : P.l.active_gradients(tau, xt, xd)) S.points.push_back(lambda * g);
    }
  }
  (void)n;
  return distance(S, detail::stack(lhs, pt));
}

// C = (1 + T M_l (1 + l_F + alpha h) + (alpha h + l_F) nu_k) exp(T (3 alpha T + l_F)).
inline double adjoint_norm_bound(double T, double M_l, double l_F, double alpha, double h, double nu_k) {
  return (1.0 + T * M_l * (1.0 + l_F + alpha * h) + (alpha * h + l_F) * nu_k) * std::exp(T * (3.0 * alpha * T + l_F));
}

// Largest cost-gradient component along a trajectory.
inline double running_cost_gradient_bound(const DiscreteBolzaProblem& B, const DiscreteTrajectory& tr) {
  double M = 0.0;
  for (int j = 0; j < B.mesh.k(); ++j) {
    for (const auto& g : B.data.l.active_gradients(B.mesh.t(j), tr.x[j], tr.v[j])) {
      M = std::max(M, g.head(B.data.dim).norm());
      M = std::max(M, g.tail(B.data.dim).norm());
    }
  }
  return M;
}

struct ConditionReport {
  std::string problem;
  int k = 0;
  double h = 0.0;
  std::vector<double> el_residuals;
  double el_residual_max = 0.0;
  double transversality = 0.0;
  double nontriviality = 0.0;
  std::vector<double> volterra_taus;
  std::vector<double> volterra_residuals;
  double volterra_median = 0.0;
  double adjoint_norm_max = 0.0;
  double adjoint_bound = 0.0;
  bool abnormal = false;
  bool degenerate = false;
  bool p0_flagged = false;  // node 0 behaves unlike the interior nodes
};

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct ConditionOptions {
  double el_tol = 1e-5;
  ConditionForm form = ConditionForm::exact;
};

// Multipliers, then every residual. Normal case first; lambda = 0 only when the normal residual fails.
inline std::pair<MultiplierSet, ConditionReport> check_conditions(const DiscreteBolzaProblem& B, const SolveResult& S,
                                                                 double nu_k, const ConditionOptions& opt = {}) {
  const TimeMesh& m = B.mesh;
  const int k = m.k();
  const Problem& P = B.data;
  const DiscreteTrajectory& tr = S.trajectory;
  auto residuals = [&](const MultiplierSet& M) {
    std::vector<double> r(k);
    for (int j = 0; j < k; ++j) r[j] = euler_lagrange_residual(B, tr, M, j);
    return r;
  };
  MultiplierSet M;
  std::vector<double> r;
  try {
    M = adjoint_solve_smooth(B, tr, 1.0, S.endpoint_normal, opt.form);
    r = residuals(M);
  } catch (const DegenerateMultiplierError&) {
    r.assign(k, std::numeric_limits<double>::infinity());
  }
  double rmax = r.empty() ? 0.0 : *std::max_element(r.begin(), r.end());
  if (!(rmax <= opt.el_tol)) {
    PolyhedralSet K = P.omega.normal_cone(tr.x.back(), B.zeta_k);
    std::vector<Vector> dirs = K.rays;
    for (const auto& l : K.lines) {
      dirs.push_back(l);
      dirs.push_back(-l);
    }
    for (const auto& d : dirs) {
      MultiplierSet A = adjoint_solve_smooth(B, tr, 0.0, d.normalized(), opt.form);
      auto ra = residuals(A);
      double am = *std::max_element(ra.begin(), ra.end());
      if (am < rmax) {
        M = A;
        r = ra;
        rmax = am;
      }
    }
  }
  ConditionReport rep;
  rep.problem = P.name;
  rep.k = k;
  rep.h = m.h_max();
  rep.el_residuals = r;
  rep.el_residual_max = rmax;
  rep.abnormal = M.abnormal;
  rep.degenerate = M.degenerate;
  rep.nontriviality = M.p.empty() ? 0.0 : M.lambda + M.p.back().norm();
  // The discrete endpoint multiplier lives in N_{Omega_k}; residual is against that cone.
  rep.transversality = M.p.empty() ? std::numeric_limits<double>::infinity()
                                   : transversality_residual(P, tr.x.back(), M.p.back(), M.lambda, B.zeta_k);
  for (const auto& pj : M.p) rep.adjoint_norm_max = std::max(rep.adjoint_norm_max, pj.norm());
  rep.adjoint_bound = adjoint_norm_bound(P.T, running_cost_gradient_bound(B, tr), P.constants.l_F, P.kernel.alpha(),
                                         m.h_max(), nu_k);
  if (k >= 3) {
    std::vector<double> interior(r.begin() + 1, r.end());
    double mi = median(interior);
    rep.p0_flagged = r[0] > 10.0 * std::max(mi, opt.el_tol);
  }
  if (!M.p.empty() && !(M.lambda == 0.0 && M.degenerate)) {
    // The continuous condition is tested along the extension of the discrete optimum, the arc
    // whose limit it describes; on a singleton map this is the interpolated reference.
    PiecewiseLinearArc parc(m, M.p);
    Arc xk = tr.extension().as_arc();
    for (int j = 0; j < k; ++j) {
      double tau = m.t(j) + 0.5 * m.h(j);
      rep.volterra_taus.push_back(tau);
      rep.volterra_residuals.push_back(volterra_residual(P, xk, parc, M.lambda, tau, m));
    }
    rep.volterra_median = median(rep.volterra_residuals);
  }
  return {M, rep};
}

// Perturbation limit check: graph-normal generators and cost gradients at base points moved by
// delta converge to the nominal ones. Returns the worst generator gap plus gradient gap.
inline double robustness_residual(const VelocityMap& F, const RunningCost& l, double t, const Vector& x, const Vector& v,
                                  double delta, int samples, unsigned seed) {
  const Eigen::Index n = x.size();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  PolyhedralSet G0 = graph_normal_cone(F, t, x, v);
  auto gens = [](const PolyhedralSet& G) {
    std::vector<Vector> out;
    for (const auto& r : G.rays) out.push_back(r.normalized());
    for (const auto& r : G.lines) {
      out.push_back(r.normalized());
      out.push_back(-r.normalized());
    }
    return out;
  };
  auto unit_gap = [&](const std::vector<Vector>& from, const PolyhedralSet& to) {
    double m = 0.0;
    for (const auto& g : from) m = std::max(m, distance(to, g));
    return m;
  };
  const Vector off0 = v - F.f(t, x);
  const bool on_sphere = F.kind() == VelocityMap::Kind::Ball && off0.norm() >= F.radius() - kTolFeas && F.radius() > 0.0;
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    Vector dx(n), dv(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      dx(i) = unif(rng);
      dv(i) = unif(rng);
    }
    dx *= delta / std::max(1e-300, dx.norm());
    dv *= delta / std::max(1e-300, dv.norm());
    Vector x1 = x + dx;
    Vector f1 = F.f(t, x1);
    Vector off = off0 + dv;
    Vector v1 = on_sphere ? Vector(f1 + off.normalized() * F.radius()) : Vector(f1 + F.project_offset(off));
    PolyhedralSet G1 = graph_normal_cone(F, t, x1, v1);
    double gap = std::max(unit_gap(gens(G0), G1), unit_gap(gens(G1), G0));
    if (l.smooth()) {
      gap += (l.grad_x(t, x1, v1) - l.grad_x(t, x, v)).norm() + (l.grad_v(t, x1, v1) - l.grad_v(t, x, v)).norm();
    }
    worst = std::max(worst, gap);
  }
  return worst;
}

}  // namespace idikit

#endif
