#ifndef IDIKIT_PROBLEM_HPP
#define IDIKIT_PROBLEM_HPP

#include "idikit/core.hpp"
#include "idikit/kernel.hpp"
#include "idikit/mesh.hpp"
#include "idikit/polyhedral.hpp"
#include "idikit/setvalued.hpp"

#include <optional>

namespace idikit {

struct TerminalCost {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;

  static TerminalCost zero(int n) {
    return {[](const Vector&) { return 0.0; }, [n](const Vector&) { return Vector(Vector::Zero(n)); }};
  }
  static TerminalCost linear(Vector c) {
    return {[c](const Vector& x) { return c.dot(x); }, [c](const Vector&) { return c; }};
  }
  // w/2 |x - z|^2
  static TerminalCost quadratic(double w, Vector z) {
    return {[w, z](const Vector& x) { return 0.5 * w * (x - z).squaredNorm(); },
            [w, z](const Vector& x) { return Vector(w * (x - z)); }};
  }
};

// One smooth piece l(t,x,v) with its partial gradients.
struct SmoothRunningPiece {
  std::function<double(double, const Vector&, const Vector&)> value;
  std::function<Vector(double, const Vector&, const Vector&)> grad_x;
  std::function<Vector(double, const Vector&, const Vector&)> grad_v;
};

// Smooth running cost, or the pointwise max of smooth pieces (convex case).
struct RunningCost {
  std::vector<SmoothRunningPiece> pieces;

  bool smooth() const { return pieces.size() == 1; }

  double value(double t, const Vector& x, const Vector& v) const {
    double m = pieces.at(0).value(t, x, v);
    for (std::size_t i = 1; i < pieces.size(); ++i) m = std::max(m, pieces[i].value(t, x, v));
    return m;
  }
  Vector grad_x(double t, const Vector& x, const Vector& v) const {
    if (!smooth()) throw UnsupportedError("running cost: nonsmooth cost has no gradient");
    return pieces[0].grad_x(t, x, v);
  }
  Vector grad_v(double t, const Vector& x, const Vector& v) const {
    if (!smooth()) throw UnsupportedError("running cost: nonsmooth cost has no gradient");
    return pieces[0].grad_v(t, x, v);
  }

  // Gradients (x-part stacked over v-part) of the pieces active within tol; their hull is the subdifferential.
  std::vector<Vector> active_gradients(double t, const Vector& x, const Vector& v, double tol = 1e-8) const {
    double m = value(t, x, v);
    std::vector<Vector> out;
    for (const auto& p : pieces) {
      if (p.value(t, x, v) < m - tol) continue;
      Vector g(x.size() + v.size());
      g << p.grad_x(t, x, v), p.grad_v(t, x, v);
      out.push_back(std::move(g));
    }
    return out;
  }

  static RunningCost zero(int n) {
    return {{SmoothRunningPiece{[](double, const Vector&, const Vector&) { return 0.0; },
                                [n](double, const Vector&, const Vector&) { return Vector(Vector::Zero(n)); },
                                [n](double, const Vector&, const Vector&) { return Vector(Vector::Zero(n)); }}}};
  }
  // qx/2 |x|^2 + qv/2 |v|^2
  static RunningCost quadratic(double qx, double qv) {
    return {{SmoothRunningPiece{
        [qx, qv](double, const Vector& x, const Vector& v) { return 0.5 * qx * x.squaredNorm() + 0.5 * qv * v.squaredNorm(); },
        [qx](double, const Vector& x, const Vector&) { return Vector(qx * x); },
        [qv](double, const Vector&, const Vector& v) { return Vector(qv * v); }}}};
  }
  // qx/2 |x - a(t)|^2 + qv/2 |v - a'(t) + c|^2 around a target arc a.
  static RunningCost tracking(double qx, double qv, const Arc& a, const Vector& c) {
    return {{SmoothRunningPiece{
        [=](double t, const Vector& x, const Vector& v) {
          return 0.5 * qx * (x - a.value(t)).squaredNorm() + 0.5 * qv * (v - a.derivative(t) + c).squaredNorm();
        },
        [=](double t, const Vector& x, const Vector&) { return Vector(qx * (x - a.value(t))); },
        [=](double t, const Vector&, const Vector& v) { return Vector(qv * (v - a.derivative(t) + c)); }}}};
  }
};

// Endpoint set Omega; all distances and cones below refer to the inflated set Omega + zeta*B.
class EndpointSet {
 public:
  enum class Kind { Whole, Box, Ball, Singleton };

  static EndpointSet whole(int n) { return EndpointSet(Kind::Whole, Vector::Zero(n), Vector::Zero(n), 0.0); }
  static EndpointSet box(Vector lo, Vector hi) {
    require((hi - lo).minCoeff() >= 0.0, "endpoint box: lo must not exceed hi");
    return EndpointSet(Kind::Box, std::move(lo), std::move(hi), 0.0);
  }
  static EndpointSet ball(Vector c, double r) {
    require(r >= 0.0, "endpoint ball: radius must be nonnegative");
    Vector z = c;
    return EndpointSet(Kind::Ball, std::move(c), std::move(z), r);
  }
  static EndpointSet singleton(Vector c) {
    Vector z = c;
    return EndpointSet(Kind::Singleton, std::move(c), std::move(z), 0.0);
  }

  Kind kind() const { return kind_; }
  const Vector& center() const { return a_; }
  const Vector& lo() const { return a_; }
  const Vector& hi() const { return b_; }
  double radius() const { return r_; }

  // Projection onto Omega itself.
  Vector project_base(const Vector& x) const {
    switch (kind_) {
      case Kind::Whole:
        return x;
      case Kind::Box:
        return x.cwiseMax(a_).cwiseMin(b_);
      case Kind::Ball: {
        Vector d = x - a_;
        double nd = d.norm();
        return nd <= r_ ? x : Vector(a_ + d * (r_ / nd));
      }
      case Kind::Singleton:
        return a_;
    }
    return x;
  }

  double distance(const Vector& x, double zeta = 0.0) const {
    return std::max(0.0, (x - project_base(x)).norm() - zeta);
  }

  Vector project(const Vector& x, double zeta = 0.0) const {
    Vector p = project_base(x);
    double d = (x - p).norm();
    if (d <= zeta) return x;
    return p + (x - p) * (zeta / d);
  }

  bool contains(const Vector& x, double zeta = 0.0, double tol = 1e-8) const { return distance(x, zeta) <= tol; }

  // N_{Omega + zeta B}(x) for x in the set.
  PolyhedralSet normal_cone(const Vector& x, double zeta = 0.0, double tol = 1e-8) const {
    const Eigen::Index n = x.size();
    PolyhedralSet K;
    if (kind_ == Kind::Whole) return K;
    if (zeta > 0.0 || kind_ == Kind::Ball) {
      Vector p = project_base(x);
      Vector d = x - p;
      double reach = zeta + (kind_ == Kind::Ball ? r_ : 0.0);
      if (kind_ == Kind::Ball) {
        d = x - a_;
        if (reach == 0.0) {
          for (Eigen::Index i = 0; i < n; ++i) K.lines.push_back(Vector::Unit(n, i));
          return K;
        }
        if (d.norm() >= reach - tol) K.rays.push_back(d.normalized());
        return K;
      }
      if (d.norm() >= zeta - tol && d.norm() > 0.0) K.rays.push_back(d.normalized());
      return K;
    }
    if (kind_ == Kind::Singleton) {
      for (Eigen::Index i = 0; i < n; ++i) K.lines.push_back(Vector::Unit(n, i));
      return K;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (x(i) >= b_(i) - tol) K.rays.push_back(Vector::Unit(n, i));
      if (x(i) <= a_(i) + tol) K.rays.push_back(-Vector::Unit(n, i));
    }
    return K;
  }

  // Smooth constraint description of Omega + zeta B used by the solver.
  struct Constraint {
    double value;
    Vector gradient;
    bool equality;
  };

  std::vector<Constraint> constraints(const Vector& x, double zeta = 0.0) const {
    const Eigen::Index n = x.size();
    std::vector<Constraint> out;
    switch (kind_) {
      case Kind::Whole:
        return out;
      case Kind::Singleton:
      case Kind::Ball: {
        double reach = r_ + zeta;
        if (reach == 0.0) {
          for (Eigen::Index i = 0; i < n; ++i) out.push_back({x(i) - a_(i), Vector::Unit(n, i), true});
          return out;
        }
        Vector d = x - a_;
        double nd = d.norm();
        out.push_back({nd - reach, nd > 0.0 ? Vector(d / nd) : Vector(Vector::Zero(n)), false});
        return out;
      }
      case Kind::Box: {
        if (zeta == 0.0) {
          for (Eigen::Index i = 0; i < n; ++i) {
            out.push_back({x(i) - b_(i), Vector::Unit(n, i), false});
            out.push_back({a_(i) - x(i), -Vector::Unit(n, i), false});
          }
          return out;
        }
        Vector p = project_base(x);
        Vector d = x - p;
        double nd = d.norm();
        out.push_back({nd - zeta, nd > 0.0 ? Vector(d / nd) : Vector(Vector::Zero(n)), false});
        return out;
      }
    }
    return out;
  }

 private:
  EndpointSet(Kind k, Vector a, Vector b, double r) : kind_(k), a_(std::move(a)), b_(std::move(b)), r_(r) {}
  Kind kind_;
  Vector a_;
  Vector b_;
  double r_;
};

// Declared constants of the data; the growth audits compare them with samples.
struct ProblemConstants {
  double m_F = 0.0;
  double l_F = 0.0;
};

// Everything that defines one optimal control problem for the integro-differential inclusion.
struct Problem {
  std::string name;
  int dim = 1;
  double T = 1.0;
  Vector x0;
  VelocityMap F;
  VolterraKernel kernel;
  TerminalCost phi;
  RunningCost l;
  EndpointSet omega;
  double epsilon = 1.0;
  StateBox box;
  ProblemConstants constants;
  std::optional<Arc> reference;  // closed-form feasible arc, when one is known
};

}  // namespace idikit

#endif
