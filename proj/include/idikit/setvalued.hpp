#ifndef IDIKIT_SETVALUED_HPP
#define IDIKIT_SETVALUED_HPP

#include "idikit/core.hpp"
#include "idikit/polyhedral.hpp"

#include <memory>
#include <utility>

namespace idikit {

using DriftFn = std::function<Vector(double, const Vector&)>;
using DriftJacobian = std::function<Matrix(double, const Vector&)>;

// Axis-aligned box on which growth constants are sampled.
struct StateBox {
  Vector lo;
  Vector hi;
};

// F(t,x) = f(t,x) + U with U = {0}, a closed ball r*B, or conv(V).
class VelocityMap {
 public:
  enum class Kind { Singleton, Ball, Polytope };

  static VelocityMap singleton(int dim, DriftFn f, DriftJacobian J) {
    return VelocityMap(Kind::Singleton, dim, std::move(f), std::move(J), 0.0, {});
  }
  static VelocityMap ball(int dim, DriftFn f, DriftJacobian J, double r) {
    if (!(r >= 0.0)) throw InvalidMapError("ball offset: radius must be nonnegative");
    return VelocityMap(Kind::Ball, dim, std::move(f), std::move(J), r, {});
  }
  static VelocityMap polytope(int dim, DriftFn f, DriftJacobian J, std::vector<Vector> V) {
    if (V.empty()) throw InvalidMapError("polytope offset: empty vertex list");
    for (const auto& v : V)
      if (v.size() != dim) throw InvalidMapError("polytope offset: vertex dimension mismatch");
    return VelocityMap(Kind::Polytope, dim, std::move(f), std::move(J), 0.0, std::move(V));
  }

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  double radius() const { return r_; }
  const std::vector<Vector>& vertices() const { return V_; }

  Vector f(double t, const Vector& x) const { return f_(t, x); }
  Matrix jacobian(double t, const Vector& x) const { return J_(t, x); }

  // The offset set has no interior direction to move in.
  bool offset_is_point() const { return kind_ == Kind::Singleton || (kind_ == Kind::Ball && r_ == 0.0); }

  Vector project_offset(const Vector& z) const {
    switch (kind_) {
      case Kind::Singleton:
        return Vector::Zero(dim_);
      case Kind::Ball: {
        double nz = z.norm();
        return nz <= r_ ? z : Vector(z * (r_ / nz));
      }
      case Kind::Polytope:
        return idikit::project(PolyhedralSet{V_, {}, {}}, z).point;
    }
    return z;
  }

  double offset_distance(const Vector& z) const { return (z - project_offset(z)).norm(); }

  // Maximizer of <d, u> over U; ties go to the lowest vertex index.
  Vector support_offset(const Vector& d) const {
    switch (kind_) {
      case Kind::Singleton:
        return Vector::Zero(dim_);
      case Kind::Ball: {
        double nd = d.norm();
        return nd == 0.0 ? Vector(Vector::Zero(dim_)) : Vector(d * (r_ / nd));
      }
      case Kind::Polytope: {
        std::size_t best = 0;
        for (std::size_t i = 1; i < V_.size(); ++i)
          if (d.dot(V_[i]) > d.dot(V_[best])) best = i;
        return V_[best];
      }
    }
    return Vector::Zero(dim_);
  }

  double offset_norm_bound() const {
    double m = r_;
    for (const auto& v : V_) m = std::max(m, v.norm());
    return m;
  }

  // Normal cone N_U(u) for u in U.
  PolyhedralSet offset_normal_cone(const Vector& u, double tol = kTolFeas) const {
    PolyhedralSet K;
    if (offset_is_point()) {
      for (int i = 0; i < dim_; ++i) K.lines.push_back(Vector::Unit(dim_, i));
      return K;
    }
    if (kind_ == Kind::Ball) {
      if (u.norm() >= r_ - tol) K.rays.push_back(u.normalized());
      return K;
    }
    return polytope_normal_cone(V_, u, tol);
  }

  bool offset_normal_contains(const Vector& u, const Vector& eta, double tol = kTolFeas) const {
    if (offset_is_point()) return true;
    if (kind_ == Kind::Ball) {
      if (u.norm() < r_ - tol) return eta.norm() <= tol;
      Vector n = u.normalized();
      double a = std::max(0.0, eta.dot(n));
      return (eta - a * n).norm() <= tol * std::max(1.0, eta.norm());
    }
    return in_polytope_normal_cone(V_, u, eta, tol);
  }

 private:
  VelocityMap(Kind k, int dim, DriftFn f, DriftJacobian J, double r, std::vector<Vector> V)
      : kind_(k), dim_(dim), f_(std::move(f)), J_(std::move(J)), r_(r), V_(std::move(V)) {
    if (!f_) throw InvalidMapError("velocity map: missing drift oracle");
    if (!J_) throw InvalidMapError("velocity map: missing Jacobian oracle");
  }

  Kind kind_;
  int dim_;
  DriftFn f_;
  DriftJacobian J_;
  double r_;
  std::vector<Vector> V_;
};

// Every supported variant is convex-valued, so the relaxed map is the map itself.
inline const VelocityMap& convex_hull(const VelocityMap& F) { return F; }

struct DistanceProjection {
  double distance = 0.0;
  Vector projection;
};

inline DistanceProjection distance_and_projection(const VelocityMap& F, double t, const Vector& x, const Vector& z) {
  Vector fx = F.f(t, x);
  Vector p = fx + F.project_offset(z - fx);
  return {(z - p).norm(), p};
}

inline bool contains(const VelocityMap& F, double t, const Vector& x, const Vector& v, double tol = kTolFeas) {
  return distance_and_projection(F, t, x, v).distance <= tol * std::max(1.0, v.norm());
}

// Values are translates of one set, so the Hausdorff distance is the drift gap.
inline double hausdorff_distance(const VelocityMap& F, double t1, const Vector& x1, double t2, const Vector& x2) {
  return (F.f(t1, x1) - F.f(t2, x2)).norm();
}

inline double hausdorff_distance(const VelocityMap& F, double t, const Vector& x1, const Vector& x2) {
  return hausdorff_distance(F, t, x1, t, x2);
}

// Deterministic state samples filling a box (lattice for n <= 2, Halton beyond).
inline std::vector<Vector> box_samples(const StateBox& box, int count) {
  const Eigen::Index n = box.lo.size();
  std::vector<Vector> out;
  if (count <= 0) return out;
  if (n == 1) {
    for (int i = 0; i < count; ++i) {
      double s = count == 1 ? 0.5 : static_cast<double>(i) / (count - 1);
      out.push_back(box.lo + s * (box.hi - box.lo));
    }
    return out;
  }
  if (n == 2) {
    int side = std::max(1, static_cast<int>(std::lround(std::sqrt(static_cast<double>(count)))));
    for (int i = 0; i < side; ++i)
      for (int j = 0; j < side; ++j) {
        double a = side == 1 ? 0.5 : static_cast<double>(i) / (side - 1);
        double b = side == 1 ? 0.5 : static_cast<double>(j) / (side - 1);
        Vector x(2);
        x << box.lo(0) + a * (box.hi(0) - box.lo(0)), box.lo(1) + b * (box.hi(1) - box.lo(1));
        out.push_back(x);
      }
    return out;
  }
  static const int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
  for (int i = 1; i <= count; ++i) {
    Vector x(n);
    for (Eigen::Index d = 0; d < n; ++d) {
      int base = primes[d % 12];
      double f = 1.0, r = 0.0;
      for (int m = i; m > 0; m /= base) {
        f /= base;
        r += f * (m % base);
      }
      x(d) = box.lo(d) + r * (box.hi(d) - box.lo(d));
    }
    out.push_back(x);
  }
  return out;
}

struct SampleGrid {
  std::vector<Vector> states;
  int time_samples = 64;
};

inline SampleGrid make_sample_grid(const StateBox& box, int states = 64, int times = 64) {
  return SampleGrid{box_samples(box, states), times};
}

// tau(F,h) = int_0^T sup_x sup_{t1,t2 in [t-h/2,t+h/2] cap [0,T]} haus(F(t1,x),F(t2,x)) dt, sampled.
inline double averaged_modulus(const VelocityMap& F, double h, double T, const SampleGrid& grid, int window_samples = 9) {
  if (grid.states.empty() || grid.time_samples < 2) throw DomainError("averaged_modulus: empty sample grid");
  require(h >= 0.0 && T > 0.0, "averaged_modulus: need h >= 0 and T > 0");
  if (h == 0.0) return 0.0;
  const int nt = grid.time_samples;
  std::vector<double> sigma(nt, 0.0);
  std::vector<Vector> fw(window_samples);
  for (int i = 0; i < nt; ++i) {
    double t = T * static_cast<double>(i) / (nt - 1);
    double a = std::max(0.0, t - 0.5 * h), b = std::min(T, t + 0.5 * h);
    for (const auto& x : grid.states) {
      for (int s = 0; s < window_samples; ++s) fw[s] = F.f(a + (b - a) * static_cast<double>(s) / (window_samples - 1), x);
      for (int p = 0; p < window_samples; ++p)
        for (int q = p + 1; q < window_samples; ++q) sigma[i] = std::max(sigma[i], (fw[p] - fw[q]).norm());
    }
  }
  double acc = 0.0;
  for (int i = 0; i + 1 < nt; ++i) acc += 0.5 * (sigma[i] + sigma[i + 1]) * T / (nt - 1);
  return acc;
}

// Pairs (a,b) in R^{2n} normal to gph F(t,.) at (x,v).
inline PolyhedralSet graph_normal_cone(const VelocityMap& F, double t, const Vector& x, const Vector& v, double tol = kTolFeas) {
  Vector fx = F.f(t, x);
  Vector u = v - fx;
  if (F.offset_distance(u) > tol * std::max(1.0, v.norm()))
    throw InfeasiblePointError("graph_normal_cone: velocity outside F(t,x)");
  Matrix J = F.jacobian(t, x);
  const int n = F.dim();
  PolyhedralSet K = F.offset_normal_cone(F.project_offset(u), tol);
  auto lift = [&](const Vector& eta) {
    Vector pair(2 * n);
    pair << -J.transpose() * eta, eta;
    return pair;
  };
  PolyhedralSet G;
  for (const auto& r : K.rays) G.rays.push_back(lift(r));
  for (const auto& l : K.lines) G.lines.push_back(lift(l));
  return G;
}

// D*F(x,v)(u) = {w : (w,-u) in N_gph}; empty or a single point for these families.
inline std::vector<Vector> coderivative(const VelocityMap& F, double t, const Vector& x, const Vector& v, const Vector& u,
                                        double tol = kTolFeas) {
  Vector fx = F.f(t, x);
  Vector off = v - fx;
  if (F.offset_distance(off) > tol * std::max(1.0, v.norm()))
    throw InfeasiblePointError("coderivative: velocity outside F(t,x)");
  if (!F.offset_normal_contains(F.project_offset(off), -u, tol)) return {};
  return {F.jacobian(t, x).transpose() * u};
}

struct GrowthConstants {
  double m_F = 0.0;  // sup |F(t,x)| over the box
  double l_F = 0.0;  // sup |grad_x f| over the box
};

// Sampled estimates over a declared state box and a uniform time grid.
inline GrowthConstants sample_growth_constants(const VelocityMap& F, const StateBox& box, double T, int states = 64,
                                               int times = 16) {
  GrowthConstants g;
  auto xs = box_samples(box, states);
  for (int i = 0; i < times; ++i) {
    double t = times == 1 ? 0.0 : T * static_cast<double>(i) / (times - 1);
    for (const auto& x : xs) {
      g.m_F = std::max(g.m_F, F.f(t, x).norm() + F.offset_norm_bound());
      Eigen::JacobiSVD<Matrix> svd(F.jacobian(t, x));
      g.l_F = std::max(g.l_F, svd.singularValues()(0));
    }
  }
  return g;
}

}  // namespace idikit

#endif
