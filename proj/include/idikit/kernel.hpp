#ifndef IDIKIT_KERNEL_HPP
#define IDIKIT_KERNEL_HPP

#include "idikit/core.hpp"
#include "idikit/mesh.hpp"

#include <array>
#include <random>
#include <type_traits>

namespace idikit {

using KernelFn = std::function<Vector(double, double, const Vector&)>;
using KernelJacobian = std::function<Matrix(double, double, const Vector&)>;

// g(t,s,x) with |g| <= beta(1+|x|) and |grad_x g| <= alpha on the working tube.
class VolterraKernel {
 public:
  VolterraKernel(int dim, KernelFn g, KernelJacobian jac, double beta, double alpha)
      : dim_(dim), g_(std::move(g)), jac_(std::move(jac)), beta_(beta), alpha_(alpha) {
    require(static_cast<bool>(g_), "kernel: missing oracle");
    require(beta_ >= 0.0 && alpha_ >= 0.0, "kernel: constants must be nonnegative");
  }

  static VolterraKernel zero(int dim) {
    VolterraKernel k(
        dim, [dim](double, double, const Vector&) { return Vector(Vector::Zero(dim)); },
        [dim](double, double, const Vector&) { return Matrix(Matrix::Zero(dim, dim)); }, 0.0, 0.0);
    k.zero_ = true;
    return k;
  }

  int dim() const { return dim_; }
  double beta() const { return beta_; }
  double alpha() const { return alpha_; }
  bool is_zero() const { return zero_; }
  bool has_analytic_jacobian() const { return static_cast<bool>(jac_); }

  Vector g(double t, double s, const Vector& x) const { return g_(t, s, x); }

  Matrix jacobian(double t, double s, const Vector& x) const {
    if (jac_) return jac_(t, s, x);
    return fd_jacobian(t, s, x);
  }

  // Central differences with step 1e-6 (1 + |x|).
  Matrix fd_jacobian(double t, double s, const Vector& x) const {
    const double step = 1e-6 * (1.0 + x.norm());
    Matrix J(dim_, x.size());
    Vector xp = x, xm = x;
    for (Eigen::Index c = 0; c < x.size(); ++c) {
      xp(c) = x(c) + step;
      xm(c) = x(c) - step;
      J.col(c) = (g_(t, s, xp) - g_(t, s, xm)) / (2.0 * step);
      xp(c) = x(c);
      xm(c) = x(c);
    }
    return J;
  }

 private:
  int dim_;
  KernelFn g_;
  KernelJacobian jac_;
  double beta_;
  double alpha_;
  bool zero_ = false;
};

// Degree-6 symmetric rule (12 points) on a triangle; barycentric coordinates, weights sum to 1.
struct TriangleRule {
  std::array<std::array<double, 3>, 12> bary;
  std::array<double, 12> w;
};

inline const TriangleRule& triangle_rule() {
  static const TriangleRule r = [] {
    TriangleRule t{};
    const double a1 = 0.501426509658179, b1 = 0.249286745170910, w1 = 0.116786275726379;
    const double a2 = 0.873821971016996, b2 = 0.063089014491502, w2 = 0.050844906370207;
    const double c1 = 0.053145049844817, c2 = 0.310352451033784, c3 = 0.636502499121399, w3 = 0.082851075618374;
    int i = 0;
    auto add = [&](double x, double y, double z, double w) {
      t.bary[i] = {x, y, z};
      t.w[i] = w;
      ++i;
    };
    add(a1, b1, b1, w1);
    add(b1, a1, b1, w1);
    add(b1, b1, a1, w1);
    add(a2, b2, b2, w2);
    add(b2, a2, b2, w2);
    add(b2, b2, a2, w2);
    add(c1, c2, c3, w3);
    add(c1, c3, c2, w3);
    add(c2, c1, c3, w3);
    add(c2, c3, c1, w3);
    add(c3, c1, c2, w3);
    add(c3, c2, c1, w3);
    return t;
  }();
  return r;
}

// Integral over {(t,s): a <= s <= t <= b}.
template <class F>
auto integrate_lower_triangle(F&& f, double a, double b) {
  const TriangleRule& r = triangle_rule();
  const double area = 0.5 * (b - a) * (b - a);
  // vertices (t,s): (a,a), (b,a), (b,b)
  auto point = [&](int i, double& t, double& s) {
    const auto& l = r.bary[i];
    t = l[0] * a + l[1] * b + l[2] * b;
    s = l[0] * a + l[1] * a + l[2] * b;
  };
  double t, s;
  point(0, t, s);
  using R = std::decay_t<decltype(f(a, a))>;
  R acc = f(t, s) * (area * r.w[0]);
  for (int i = 1; i < 12; ++i) {
    point(i, t, s);
    acc += f(t, s) * (area * r.w[i]);
  }
  return acc;
}

// Tensor Gauss-Legendre over [ta,tb] x [sa,sb].
template <class F>
auto integrate_rectangle(F&& f, double ta, double tb, double sa, double sb, int order = kCellOrder) {
  const GaussRule& g = gauss_legendre(order);
  const double ct = 0.5 * (ta + tb), rt = 0.5 * (tb - ta);
  const double cs = 0.5 * (sa + sb), rs = 0.5 * (sb - sa);
  using R = std::decay_t<decltype(f(ta, sa))>;
  R acc = f(ct + rt * g.x[0], cs + rs * g.x[0]) * (rt * rs * g.w[0] * g.w[0]);
  for (std::size_t a = 0; a < g.x.size(); ++a)
    for (std::size_t b = 0; b < g.x.size(); ++b) {
      if (a == 0 && b == 0) continue;
      acc += f(ct + rt * g.x[a], cs + rs * g.x[b]) * (rt * rs * g.w[a] * g.w[b]);
    }
  return acc;
}

// h_j w_j: memory integral over cell j with states frozen per cell.
inline Vector cell_memory_integral(const VolterraKernel& K, const TimeMesh& mesh, const std::vector<Vector>& x, int j) {
  require(j >= 0 && j < mesh.k(), "kernel_average_w: cell index out of range");
  require(static_cast<int>(x.size()) > j, "kernel_average_w: not enough states");
  if (K.is_zero()) return Vector::Zero(K.dim());
  const double a = mesh.t(j), b = mesh.t(j + 1);
  Vector acc = Vector::Zero(K.dim());
  for (int i = 0; i < j; ++i) {
    const Vector& xi = x[i];
    acc += integrate_rectangle([&](double t, double s) { return K.g(t, s, xi); }, a, b, mesh.t(i), mesh.t(i + 1));
  }
  const Vector& xj = x[j];
  acc += integrate_lower_triangle([&](double t, double s) { return K.g(t, s, xj); }, a, b);
  return acc;
}

inline Vector kernel_average_w(const VolterraKernel& K, const TimeMesh& mesh, const std::vector<Vector>& x, int j) {
  return cell_memory_integral(K, mesh, x, j) / mesh.h(j);
}

// xi_i^j = int_{cell i} int_{cell j} grad g(t,s,x_j)^T ds dt for 0 <= j < i <= k-1; zero for i = k.
inline Matrix kernel_xi(const VolterraKernel& K, const TimeMesh& mesh, const std::vector<Vector>& x, int i, int j) {
  const int k = mesh.k();
  if (i == k && j >= 0 && j < k) return Matrix::Zero(K.dim(), K.dim());
  if (!(i >= 1 && i <= k - 1 && j >= 0 && j <= i - 1)) throw DomainError("kernel_xi: index outside 0 <= j < i <= k-1");
  if (K.is_zero()) return Matrix::Zero(K.dim(), K.dim());
  const Vector& xj = x.at(static_cast<std::size_t>(j));
  Matrix m = integrate_rectangle([&](double t, double s) { return Matrix(K.jacobian(t, s, xj)); }, mesh.t(i),
                                 mesh.t(i + 1), mesh.t(j), mesh.t(j + 1));
  return m.transpose();
}

// mu_j = int_{t_j}^{t_{j+1}} int_{t_j}^{t} grad g(t,s,x_j)^T ds dt.
inline Matrix kernel_mu(const VolterraKernel& K, const TimeMesh& mesh, const std::vector<Vector>& x, int j) {
  require(j >= 0 && j < mesh.k(), "kernel_mu: cell index out of range");
  if (K.is_zero()) return Matrix::Zero(K.dim(), K.dim());
  const Vector& xj = x.at(static_cast<std::size_t>(j));
  Matrix m = integrate_lower_triangle([&](double t, double s) { return Matrix(K.jacobian(t, s, xj)); }, mesh.t(j),
                                      mesh.t(j + 1));
  return m.transpose();
}

// theta_j = h_j v_j - (xbar(t_{j+1}) - xbar(t_j)).
inline Vector kernel_theta(const TimeMesh& mesh, const Vector& v_j, const VectorFn& xbar, int j) {
  require(j >= 0 && j < mesh.k(), "kernel_theta: cell index out of range");
  return mesh.h(j) * v_j - (xbar(mesh.t(j + 1)) - xbar(mesh.t(j)));
}

// All memory tensors along a nodal state sequence.
struct QuadratureTensors {
  std::vector<Vector> w;                // w_0..w_{k-1}
  std::vector<std::vector<Matrix>> xi;  // xi[i][j], j < i, i = 1..k-1 (xi[0] empty)
  std::vector<Matrix> mu;               // mu_0..mu_{k-1}
};

inline QuadratureTensors compute_tensors(const VolterraKernel& K, const TimeMesh& mesh, const std::vector<Vector>& x,
                                         bool with_derivatives = true) {
  const int k = mesh.k();
  QuadratureTensors q;
  q.w.reserve(k);
  for (int j = 0; j < k; ++j) q.w.push_back(kernel_average_w(K, mesh, x, j));
  if (!with_derivatives) return q;
  q.xi.resize(k);
  q.mu.reserve(k);
  for (int i = 1; i < k; ++i) {
    q.xi[i].reserve(i);
    for (int j = 0; j < i; ++j) q.xi[i].push_back(kernel_xi(K, mesh, x, i, j));
  }
  for (int j = 0; j < k; ++j) q.mu.push_back(kernel_mu(K, mesh, x, j));
  return q;
}

// ybar(t) = int_0^t g(t,s,x(s)) ds, composite Gauss-Legendre over the panel mesh.
inline Vector continuous_accumulator(const VolterraKernel& K, const VectorFn& x, double t, const TimeMesh& panels,
                                     int order = kCellOrder) {
  require(t >= 0.0 && t <= panels.T() + 1e-14, "continuous_accumulator: time outside [0,T]");
  Vector acc = Vector::Zero(K.dim());
  if (K.is_zero()) return acc;
  for (int j = 0; j < panels.k(); ++j) {
    double lo = panels.t(j), hi = std::min(t, panels.t(j + 1));
    if (hi <= lo) break;
    acc += integrate_panel([&](double s) { return K.g(t, s, x(s)); }, lo, hi, order);
  }
  return acc;
}

// int_tau^T grad g(t,tau,xbar(tau))^T p(t) dt.
inline Vector volterra_adjoint_integral(const VolterraKernel& K, const VectorFn& xbar, const VectorFn& p, double tau,
                                        const TimeMesh& panels, int order = kCellOrder) {
  require(tau >= 0.0 && tau <= panels.T(), "volterra_adjoint_integral: time outside [0,T]");
  Vector acc = Vector::Zero(K.dim());
  if (K.is_zero()) return acc;
  const Vector xt = xbar(tau);
  for (int j = 0; j < panels.k(); ++j) {
    double lo = std::max(tau, panels.t(j)), hi = panels.t(j + 1);
    if (hi <= lo) continue;
    acc += integrate_panel([&](double t) { return Vector(K.jacobian(t, tau, xt).transpose() * p(t)); }, lo, hi, order);
  }
  return acc;
}

struct JacobianCheck {
  double max_relative_error = 0.0;
  int samples = 0;
};

// Analytic Jacobian against central differences at random points of a box.
inline JacobianCheck jacobian_fd_check(const VolterraKernel& K, double T, double radius, int samples, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ut(0.0, T), ux(-radius, radius);
  JacobianCheck c;
  for (int n = 0; n < samples; ++n) {
    double t = ut(rng), s = ut(rng);
    if (s > t) std::swap(s, t);
    Vector x(K.dim());
    for (int d = 0; d < K.dim(); ++d) x(d) = ux(rng);
    Matrix a = K.jacobian(t, s, x), f = K.fd_jacobian(t, s, x);
    double rel = (a - f).norm() / std::max(1.0, a.norm());
    c.max_relative_error = std::max(c.max_relative_error, rel);
    ++c.samples;
  }
  return c;
}

struct GrowthViolation {
  double t;
  double s;
  Vector x;
  double value;
  double bound;
  bool jacobian;  // false: growth bound beta, true: Jacobian bound alpha
};

// Samples the growth bound on [0,T]^2 x box and the Jacobian bound on the tube of the given radius.
inline std::vector<GrowthViolation> growth_audit(const VolterraKernel& K, double T, double tube_radius, int samples,
                                                 unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ut(0.0, T), ux(-1.0, 1.0);
  std::vector<GrowthViolation> out;
  for (int n = 0; n < samples; ++n) {
    double t = ut(rng), s = ut(rng);
    if (s > t) std::swap(s, t);
    Vector x(K.dim());
    for (int d = 0; d < K.dim(); ++d) x(d) = ux(rng);
    if (x.norm() > 0.0) x *= tube_radius * std::abs(ux(rng)) / x.norm();
    double gv = K.g(t, s, x).norm(), gb = K.beta() * (1.0 + x.norm());
    if (gv > gb * (1.0 + 1e-12) + 1e-14) out.push_back({t, s, x, gv, gb, false});
    Eigen::JacobiSVD<Matrix> svd(K.jacobian(t, s, x));
    double jv = svd.singularValues()(0);
    if (jv > K.alpha() * (1.0 + 1e-9) + 1e-12) out.push_back({t, s, x, jv, K.alpha(), true});
  }
  return out;
}

}  // namespace idikit

#endif
