#ifndef IDIKIT_CATALOG_HPP
#define IDIKIT_CATALOG_HPP

#include "idikit/problem.hpp"

#include <cmath>

namespace idikit {

inline const std::vector<std::string>& catalog_names() {
  static const std::vector<std::string> names = {"cos_t", "damped_volterra", "ball_control_lq", "polytope_endpoint"};
  return names;
}

namespace detail {

inline Vector vec1(double a) { return Vector::Constant(1, a); }

inline Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

inline StateBox cube(int n, double r) { return {Vector::Constant(n, -r), Vector::Constant(n, r)}; }

inline VelocityMap zero_drift_singleton(int n) {
  return VelocityMap::singleton(
      n, [n](double, const Vector&) { return Vector(Vector::Zero(n)); },
      [n](double, const Vector&) { return Matrix(Matrix::Zero(n, n)); });
}

}  // namespace detail

// x' = -int_0^t x ds, x(0) = 1: x = cos t.
inline Problem catalog_cos_t() {
  VolterraKernel K(
      1, [](double, double, const Vector& x) { return Vector(-x); },
      [](double, double, const Vector&) { return Matrix(-Matrix::Identity(1, 1)); }, 1.0, 1.0);
  Arc ref{[](double t) { return detail::vec1(std::cos(t)); }, [](double t) { return detail::vec1(-std::sin(t)); }};
  return Problem{"cos_t",
                 1,
                 1.0,
                 detail::vec1(1.0),
                 detail::zero_drift_singleton(1),
                 K,
                 TerminalCost::quadratic(1.0, Vector::Zero(1)),
                 RunningCost::quadratic(1.0, 0.0),
                 EndpointSet::whole(1),
                 1.0,
                 detail::cube(1, 2.0),
                 {0.0, 0.0},
                 ref};
}

// x' = -int_0^t e^{-(t-s)} x ds, x(0) = 1, equivalently x'' + x' + x = 0.
inline Problem catalog_damped_volterra() {
  VolterraKernel K(
      1, [](double t, double s, const Vector& x) { return Vector(-std::exp(-(t - s)) * x); },
      [](double t, double s, const Vector&) { return Matrix(-std::exp(-(t - s)) * Matrix::Identity(1, 1)); }, 1.0, 1.0);
  const double w = std::sqrt(3.0) / 2.0;
  Arc ref{[w](double t) { return detail::vec1(std::exp(-t / 2) * (std::cos(w * t) + std::sin(w * t) / (2.0 * w))); },
          [w](double t) { return detail::vec1(-std::exp(-t / 2) * std::sin(w * t) / w); }};
  return Problem{"damped_volterra",
                 1,
                 2.0,
                 detail::vec1(1.0),
                 detail::zero_drift_singleton(1),
                 K,
                 TerminalCost::quadratic(1.0, Vector::Zero(1)),
                 RunningCost::quadratic(1.0, 0.0),
                 EndpointSet::whole(1),
                 1.0,
                 detail::cube(1, 2.0),
                 {0.0, 0.0},
                 ref};
}

// F(x) = Ax + 5B with a rotation generator, no memory. The tracking costs are tuned so that the
// reference is the optimum with constant adjoint p = qv c (interior controls, p = l_v, p' = l_x = 0).
inline Problem catalog_ball_control_lq() {
  Matrix A(2, 2);
  A << 0.0, 1.0, -1.0, 0.0;
  VelocityMap F = VelocityMap::ball(
      2, [A](double, const Vector& x) { return Vector(A * x); }, [A](double, const Vector&) { return A; }, 5.0);
  Arc ref{[](double t) { return detail::vec2(std::cos(t), -std::sin(t)); },
          [](double t) { return detail::vec2(-std::sin(t), -std::cos(t)); }};
  const double qv = 0.1;
  const Vector c = detail::vec2(1.0, -0.5);
  // Simulated arcs with |x'| <= |x| + 5 stay inside [-12,12]^2 up to T = 1.
  const double box = 12.0;
  return Problem{"ball_control_lq",
                 2,
                 1.0,
                 detail::vec2(1.0, 0.0),
                 F,
                 VolterraKernel::zero(2),
                 TerminalCost::quadratic(1.0, Vector(ref.value(1.0) + qv * c)),
                 RunningCost::tracking(1.0, qv, ref, c),
                 EndpointSet::whole(2),
                 10.0,
                 detail::cube(2, box),
                 {box * std::sqrt(2.0) + 5.0, 1.0},
                 ref};
}

// F(t,x) = Ax + d(t) + [-1/2,1/2]^2 with exponential memory; d makes the reference feasible with zero
// control. The terminal cost pulls outward along n through x(T), where the endpoint ball is tangent,
// so the reference is optimal with p = 0 and an active endpoint multiplier.
inline Problem catalog_polytope_endpoint() {
  const double kappa = 0.5;
  Matrix A(2, 2);
  A << 0.0, -1.0, 1.0, 0.0;
  auto d = [kappa](double t) {
    const double c = std::cos(t), s = std::sin(t), e = std::exp(-t);
    return detail::vec2(kappa * (c + s - e) / 2.0, kappa * (s - c + e) / 2.0);
  };
  std::vector<Vector> V = {detail::vec2(0.5, 0.5), detail::vec2(-0.5, 0.5), detail::vec2(-0.5, -0.5),
                           detail::vec2(0.5, -0.5)};
  VelocityMap F = VelocityMap::polytope(
      2, [A, d](double t, const Vector& x) { return Vector(A * x + d(t)); }, [A](double, const Vector&) { return A; }, V);
  VolterraKernel K(
      2, [kappa](double t, double s, const Vector& x) { return Vector(-kappa * std::exp(-(t - s)) * x); },
      [kappa](double t, double s, const Vector&) { return Matrix(-kappa * std::exp(-(t - s)) * Matrix::Identity(2, 2)); },
      kappa, kappa);
  Arc ref{[](double t) { return detail::vec2(std::cos(t), std::sin(t)); },
          [](double t) { return detail::vec2(-std::sin(t), std::cos(t)); }};
  const Vector xT = ref.value(1.0);
  const Vector n = detail::vec2(1.0, 1.0).normalized();
  const double r = 0.05;
  const double box = 6.0;
  // sup |Ax| + sup |d| + max |v_i| over the box
  const double mF = box * std::sqrt(2.0) + 1.0 + 0.5 * std::sqrt(2.0);
  return Problem{"polytope_endpoint",
                 2,
                 1.0,
                 detail::vec2(1.0, 0.0),
                 F,
                 K,
                 TerminalCost::quadratic(1.0, Vector(xT + 0.6 * n)),
                 RunningCost::tracking(0.1, 0.0, ref, Vector::Zero(2)),
                 EndpointSet::ball(Vector(xT - r * n), r),
                 2.0,
                 detail::cube(2, box),
                 {mF, 1.0},
                 ref};
}

inline Problem catalog_problem(const std::string& name) {
  if (name == "cos_t") return catalog_cos_t();
  if (name == "damped_volterra") return catalog_damped_volterra();
  if (name == "ball_control_lq") return catalog_ball_control_lq();
  if (name == "polytope_endpoint") return catalog_polytope_endpoint();
  throw DomainError("catalog: unknown problem '" + name + "'");
}

}  // namespace idikit

#endif
