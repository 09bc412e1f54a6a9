#ifndef IDIKIT_DYNAMICS_HPP
#define IDIKIT_DYNAMICS_HPP

#include "idikit/gronwall.hpp"
#include "idikit/problem.hpp"

#include <random>

namespace idikit {

// Nodes x_0..x_k, velocities v_j (slope on cell j) and memory averages w_j.
struct DiscreteTrajectory {
  TimeMesh mesh;
  std::vector<Vector> x;
  std::vector<Vector> v;
  std::vector<Vector> w;

  PiecewiseLinearArc extension() const { return PiecewiseLinearArc(mesh, x); }

  // Selection part v_j - w_j, which must lie in F(t_j, x_j).
  Vector selection(int j) const { return v[j] - w[j]; }
};

// Max over cells of dist(v_j - w_j; F(t_j,x_j)) and of the slope mismatch.
inline double discrete_infeasibility(const Problem& P, const DiscreteTrajectory& tr) {
  double m = 0.0;
  for (int j = 0; j < tr.mesh.k(); ++j) {
    m = std::max(m, distance_and_projection(P.F, tr.mesh.t(j), tr.x[j], tr.selection(j)).distance);
    m = std::max(m, (tr.x[j + 1] - tr.x[j] - tr.mesh.h(j) * tr.v[j]).norm());
  }
  return m;
}

struct SelectionPolicy {
  enum class Kind { MinNorm, ExtremePoint, ConstantControl };
  Kind kind = Kind::MinNorm;
  unsigned long long seed = 0;
  Vector control;  // used by ConstantControl, projected onto U

  static SelectionPolicy min_norm() { return {}; }
  static SelectionPolicy extreme_point(unsigned long long seed) { return {Kind::ExtremePoint, seed, {}}; }
  static SelectionPolicy constant_control(Vector u) { return {Kind::ConstantControl, 0, std::move(u)}; }
};

inline const char* policy_name(SelectionPolicy::Kind k) {
  switch (k) {
    case SelectionPolicy::Kind::MinNorm:
      return "min_norm";
    case SelectionPolicy::Kind::ExtremePoint:
      return "extreme_point";
    case SelectionPolicy::Kind::ConstantControl:
      return "constant_control";
  }
  return "?";
}

// Explicit Euler with frozen-state memory averages.
inline DiscreteTrajectory simulate(const Problem& P, const TimeMesh& mesh, const SelectionPolicy& policy) {
  const int k = mesh.k();
  DiscreteTrajectory tr{mesh, {}, {}, {}};
  tr.x.reserve(k + 1);
  tr.x.push_back(P.x0);
  std::mt19937_64 rng(policy.seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int j = 0; j < k; ++j) {
    const double t = mesh.t(j);
    const Vector& xj = tr.x[j];
    Vector w = kernel_average_w(P.kernel, mesh, tr.x, j);
    Vector f = P.F.f(t, xj);
    Vector u;
    switch (policy.kind) {
      case SelectionPolicy::Kind::MinNorm:
        u = P.F.project_offset(-w - f);
        break;
      case SelectionPolicy::Kind::ExtremePoint: {
        Vector d(P.dim);
        do {
          for (int i = 0; i < P.dim; ++i) d(i) = unif(rng);
        } while (d.norm() == 0.0);
        u = P.F.support_offset(d);
        break;
      }
      case SelectionPolicy::Kind::ConstantControl:
        u = P.F.project_offset(policy.control);
        break;
    }
    Vector v = f + u + w;
    tr.x.push_back(xj + mesh.h(j) * v);
    tr.v.push_back(std::move(v));
    tr.w.push_back(std::move(w));
  }
  return tr;
}

// L2 norm over [0,T] of dist(x'(t) - ybar(t); F(t,x(t))), Gauss points per cell of the mesh.
// The flag selects co F, which equals F for every supported family.
inline double feasibility_residual(const Problem& P, const Arc& arc, const TimeMesh& mesh, bool relaxed = false) {
  const VelocityMap& F = relaxed ? convex_hull(P.F) : P.F;
  auto dist2 = [&](double t) {
    Vector y = continuous_accumulator(P.kernel, arc.value, t, mesh);
    Vector z = arc.derivative(t) - y;
    double d = distance_and_projection(F, t, arc.value(t), z).distance;
    return d * d;
  };
  double acc = 0.0;
  for (int j = 0; j < mesh.k(); ++j) acc += integrate_scalar(dist2, mesh.t(j), mesh.t(j + 1));
  return std::sqrt(acc);
}

// Discrete counterpart: sqrt(sum_j h_j dist(v_j - w_j; F(t_j,x_j))^2).
inline double feasibility_residual(const Problem& P, const DiscreteTrajectory& tr, bool relaxed = false) {
  const VelocityMap& F = relaxed ? convex_hull(P.F) : P.F;
  double acc = 0.0;
  for (int j = 0; j < tr.mesh.k(); ++j) {
    double d = distance_and_projection(F, tr.mesh.t(j), tr.x[j], tr.selection(j)).distance;
    acc += tr.mesh.h(j) * d * d;
  }
  return std::sqrt(acc);
}

// Strict sup gap < eps and squared derivative L2 gap < eps, sampled on the mesh.
inline bool localization_check(const Arc& candidate, const Arc& reference, double eps, const TimeMesh& mesh,
                               int samples_per_cell = kSupSamplesPerCell) {
  require(eps > 0.0, "localization_check: eps must be positive");
  double sup = 0.0, d2 = 0.0;
  for (int j = 0; j < mesh.k(); ++j) {
    for (int s = 0; s <= samples_per_cell; ++s) {
      double t = s == samples_per_cell ? mesh.t(j + 1) : mesh.t(j) + mesh.h(j) * s / samples_per_cell;
      sup = std::max(sup, (candidate.value(t) - reference.value(t)).norm());
    }
    d2 += integrate_scalar([&](double t) { return (candidate.derivative(t) - reference.derivative(t)).squaredNorm(); },
                           mesh.t(j), mesh.t(j + 1));
  }
  return sup < eps && d2 < eps;
}

struct ApproximationErrorReport {
  double xi_k = 0.0;     // sqrt(T int |a - xbar'|^2)
  double zeta_k = 0.0;   // nodal sup bound
  double beta_k = 0.0;   // derivative L2^2 bound
  double nu_k = 0.0;     // int |x^k' - xbar'|
  double tau = 0.0;      // averaged modulus tau(F, h_k)
  double int_c = 0.0;    // int c_k
  double int_c2 = 0.0;   // int c_k^2
  double reference_residual = 0.0;
  double nodal_sup_error = 0.0;
  double sup_error = 0.0;       // sampled between nodes too
  double deriv_l2_error = 0.0;  // L2 norm of the derivative gap
  double w12_error() const { return sup_error + deriv_l2_error; }
};

struct ApproximationOptions {
  // The reference is usually known only up to quadrature or a finer simulation.
  double reference_tol = 1e-2;
  int modulus_states = 64;
  int modulus_times = 64;
};

struct ApproximationResult {
  DiscreteTrajectory trajectory;
  ApproximationErrorReport report;
};

// Projection algorithm: cell averages a of xbar', b along the integrated averages u,
// then v_j - w_j = proj_{F(t_j,x_j)}(a_j - b_j).
inline ApproximationResult approximate_arc(const Problem& P, const Arc& xbar, const TimeMesh& mesh,
                                           const ApproximationOptions& opt = {}) {
  require(static_cast<bool>(xbar.value) && static_cast<bool>(xbar.derivative), "approximate_arc: reference needs a derivative");
  const int k = mesh.k();
  const double T = mesh.T();
  ApproximationResult res{DiscreteTrajectory{mesh, {}, {}, {}}, {}};
  ApproximationErrorReport& rep = res.report;

  rep.reference_residual = feasibility_residual(P, xbar, mesh);
  if (!(rep.reference_residual <= opt.reference_tol))
    throw InfeasiblePointError("approximate_arc: reference arc infeasible, residual " + std::to_string(rep.reference_residual));

  PiecewiseConstantArc a = average_operator(mesh, xbar.derivative);
  std::vector<Vector> u;
  u.reserve(k + 1);
  u.push_back(P.x0);
  for (int j = 0; j < k; ++j) u.push_back(u[j] + mesh.h(j) * a.cell_value(j));
  std::vector<Vector> b;
  b.reserve(k);
  for (int j = 0; j < k; ++j) b.push_back(kernel_average_w(P.kernel, mesh, u, j));

  DiscreteTrajectory& tr = res.trajectory;
  tr.x.push_back(P.x0);
  for (int j = 0; j < k; ++j) {
    Vector w = kernel_average_w(P.kernel, mesh, tr.x, j);
    Vector sel = distance_and_projection(P.F, mesh.t(j), tr.x[j], a.cell_value(j) - b[j]).projection;
    Vector v = sel + w;
    tr.x.push_back(tr.x[j] + mesh.h(j) * v);
    tr.v.push_back(std::move(v));
    tr.w.push_back(std::move(w));
  }

  // Error quantities.
  const double alpha = P.kernel.alpha(), lF = P.constants.l_F, hk = mesh.h_max();
  double xi2 = 0.0;
  for (int j = 0; j < k; ++j)
    xi2 += integrate_scalar([&](double t) { return (a.cell_value(j) - xbar.derivative(t)).squaredNorm(); }, mesh.t(j),
                            mesh.t(j + 1));
  rep.xi_k = std::sqrt(T * xi2);
  rep.tau = averaged_modulus(P.F, hk, T, make_sample_grid(P.box, opt.modulus_states, opt.modulus_times));

  double d2 = 0.0, d1 = 0.0;
  for (int j = 0; j < k; ++j) {
    const double tj = mesh.t(j), hj = mesh.h(j);
    const Vector& aj = a.cell_value(j);
    const double coef = (2.0 * lF + alpha * T + alpha * hj / 2.0) * rep.xi_k + rep.tau;
    auto ck = [&](double s) {
      Vector yb = continuous_accumulator(P.kernel, xbar.value, s, mesh);
      Vector xd = xbar.derivative(s);
      double infeas = distance_and_projection(P.F, s, xbar.value(s), xd - yb).distance;
      return 2.0 * (aj - xd).norm() + (b[j] - yb).norm() + lF * (s - tj) * aj.norm() + coef + infeas;
    };
    const GaussRule& g = gauss_legendre(kCellOrder);
    for (std::size_t q = 0; q < g.x.size(); ++q) {
      double c = ck(tj + 0.5 * hj * (1.0 + g.x[q]));
      rep.int_c += 0.5 * hj * g.w[q] * c;
      rep.int_c2 += 0.5 * hj * g.w[q] * c * c;
    }
    const Vector& vj = tr.v[j];
    d2 += integrate_scalar([&](double s) { return (vj - xbar.derivative(s)).squaredNorm(); }, tj, tj + hj);
    d1 += integrate_scalar([&](double s) { return (vj - xbar.derivative(s)).norm(); }, tj, tj + hj);
  }
  rep.zeta_k = rep.int_c * std::exp(alpha * T * T / 2.0 + T * (lF + 1.5 * alpha * hk));
  const double L = lF + 2.0 * alpha * T + alpha * hk / 2.0;
  rep.beta_k = rep.int_c2 + T * L * L * rep.zeta_k * rep.zeta_k;
  rep.nu_k = d1;
  rep.deriv_l2_error = std::sqrt(d2);
  for (int j = 0; j <= k; ++j) rep.nodal_sup_error = std::max(rep.nodal_sup_error, (tr.x[j] - xbar.value(mesh.t(j))).norm());
  rep.sup_error = w12_distance(tr.extension(), xbar).sup;
  return res;
}

}  // namespace idikit

#endif
