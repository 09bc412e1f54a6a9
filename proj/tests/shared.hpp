// Oracles that are phrased in terms of library types (problems, meshes, controls). Each one is an
// independent implementation, shared by the unit tests and the acceptance binary.
#ifndef IDIKIT_TEST_SHARED_HPP
#define IDIKIT_TEST_SHARED_HPP

#include "idikit/bolza.hpp"
#include "idikit/catalog.hpp"

#include <random>

namespace shared {

using namespace idikit;

inline ControlParameterization random_controls(int k, int n, double scale, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  ControlParameterization c;
  for (int j = 0; j < k; ++j) c.u.push_back(Vector::NullaryExpr(n, [&]() { return u(rng); }));
  return c;
}

inline double max_rel_fd_error(const DiscreteBolzaProblem& B, const ControlParameterization& c) {
  auto g = cost_gradient(B, c);
  double worst = 0.0, gmax = 0.0;
  for (const auto& gj : g) gmax = std::max(gmax, gj.cwiseAbs().maxCoeff());
  const double step = 1e-6;
  for (std::size_t j = 0; j < c.u.size(); ++j)
    for (Eigen::Index i = 0; i < c.u[j].size(); ++i) {
      ControlParameterization p = c, m = c;
      p.u[j](i) += step;
      m.u[j](i) -= step;
      double fd = (cost_Jk(B, forward(B, p)) - cost_Jk(B, forward(B, m))) / (2 * step);
      worst = std::max(worst, std::abs(fd - g[j](i)) / std::max(std::abs(g[j](i)), 1e-3 * gmax));
    }
  return worst;
}

// Classical discrete adjoint for x_{j+1} = x_j + h (f + u_j) with no memory, written from scratch.
inline std::vector<Vector> gfree_gradient(const Problem& P, const TimeMesh& m, const Arc& xbar, const ControlParameterization& c) {
  const int k = m.k();
  std::vector<Vector> x{P.x0}, v;
  for (int j = 0; j < k; ++j) {
    v.push_back(P.F.f(m.t(j), x[j]) + c.u[j]);
    x.push_back(x[j] + m.h(j) * v[j]);
  }
  std::vector<Vector> g(k);
  Vector a = P.phi.gradient(x[k]);  // dJ/dx_{j+1}
  for (int j = k - 1; j >= 0; --j) {
    const double h = m.h(j), t = m.t(j);
    const Vector d = xbar.value(m.t(j + 1)) - xbar.value(t);
    Vector dv = h * P.l.grad_v(t, x[j], v[j]) + (h * v[j] - d) + h * a;
    g[j] = dv;
    a = a + h * P.l.grad_x(t, x[j], v[j]) + P.F.jacobian(t, x[j]).transpose() * dv;
  }
  return g;
}

struct LqSolution {
  Vector z;                // stacked controls u_0..u_{k-1}
  std::vector<Vector> x;   // states x_0..x_k
};

// ball_control_lq with interior controls: every cost term is a weighted square of an affine map of
// the stacked controls, so the minimizer solves one symmetric linear system.
inline LqSolution lq_normal_equations(const Problem& P, const TimeMesh& m) {
  const int k = m.k();
  const double h = m.h(0);
  Matrix A(2, 2);
  A << 0.0, 1.0, -1.0, 0.0;
  const double qv = 0.1;
  Vector c(2);
  c << 1.0, -0.5;
  const Arc& xb = *P.reference;
  // x_j = S_j x0 + sum_i G_ji u_i; all cost terms are weighted squares of affine maps of z = (u_0..u_{k-1}).
  const int nz = 2 * k;
  std::vector<Matrix> Gx(k + 1, Matrix::Zero(2, nz));
  std::vector<Vector> bx(k + 1);
  bx[0] = P.x0;
  const Matrix Phi = Matrix::Identity(2, 2) + h * A;
  for (int j = 0; j < k; ++j) {
    Gx[j + 1] = Phi * Gx[j];
    Gx[j + 1].block(0, 2 * j, 2, 2) += h * Matrix::Identity(2, 2);
    bx[j + 1] = Phi * bx[j];
  }
  std::vector<Matrix> rows;
  std::vector<Vector> rhs;
  std::vector<double> wts;
  auto add = [&](const Matrix& G, const Vector& b, double w) {
    rows.push_back(G);
    rhs.push_back(b);
    wts.push_back(w);
  };
  for (int j = 0; j < k; ++j) {
    const double t = m.t(j);
    Matrix Gv = A * Gx[j];
    Gv.block(0, 2 * j, 2, 2) += Matrix::Identity(2, 2);
    Vector bv = A * bx[j];
    add(Gx[j], Vector(xb.value(t) - bx[j]), h);                                   // running x tracking
    add(Gv, Vector(xb.derivative(t) - c - bv), h * qv);                          // running v tracking
    add(Gv, Vector((xb.value(m.t(j + 1)) - xb.value(t)) / h - bv), h);          // discrete penalty
  }
  add(Gx[k], Vector(xb.value(1.0) + qv * c - bx[k]), 1.0);  // terminal
  Matrix N = Matrix::Zero(nz, nz);
  Vector r = Vector::Zero(nz);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    N += wts[i] * rows[i].transpose() * rows[i];
    r += wts[i] * rows[i].transpose() * rhs[i];
  }
  LqSolution out;
  out.z = N.ldlt().solve(r);
  for (int j = 0; j <= k; ++j) out.x.push_back(Gx[j] * out.z + bx[j]);
  return out;
}

}  // namespace shared

#endif
