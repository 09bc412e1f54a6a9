#ifndef IDIKIT_MESH_HPP
#define IDIKIT_MESH_HPP

#include "idikit/core.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <type_traits>
#include <utility>

namespace idikit {

// Partition 0 = t_0 < t_1 < ... < t_k = T.
class TimeMesh {
 public:
  TimeMesh() = default;

  static TimeMesh uniform(double T, int k) {
    require(T > 0.0, "mesh: T must be positive");
    require(k >= 1, "mesh: k must be at least 1");
    std::vector<double> t(static_cast<std::size_t>(k) + 1);
    for (int j = 0; j <= k; ++j) t[j] = T * static_cast<double>(j) / k;
    t[k] = T;
    return TimeMesh(std::move(t), true);
  }

  // Nonuniform meshes are allowed; the step cap h_k is then the largest step.
  static TimeMesh from_nodes(std::vector<double> nodes) {
    require(nodes.size() >= 2, "mesh: need at least two nodes");
    require(nodes.front() == 0.0, "mesh: first node must be 0");
    for (std::size_t j = 1; j < nodes.size(); ++j)
      require(nodes[j] > nodes[j - 1], "mesh: nodes must be strictly increasing");
    return TimeMesh(std::move(nodes), false);
  }

  int k() const { return static_cast<int>(t_.size()) - 1; }
  double T() const { return t_.back(); }
  double t(int j) const { return t_.at(static_cast<std::size_t>(j)); }
  double h(int j) const { return t(j + 1) - t(j); }
  const std::vector<double>& nodes() const { return t_; }
  bool is_uniform() const { return uniform_; }

  double h_max() const {
    double m = 0.0;
    for (int j = 0; j < k(); ++j) m = std::max(m, h(j));
    return m;
  }

  // Cell index j with t in [t_j, t_{j+1}); t = T maps to the last cell.
  int cell_of(double s) const {
    if (s < 0.0 || s > T()) throw DomainError("mesh: time outside [0,T]");
    if (s >= T()) return k() - 1;
    auto it = std::upper_bound(t_.begin(), t_.end(), s);
    return static_cast<int>(it - t_.begin()) - 1;
  }

  // Largest node not exceeding s.
  double round_down(double s) const {
    if (s < 0.0 || s > T()) throw DomainError("round_down: time outside [0,T]");
    auto it = std::upper_bound(t_.begin(), t_.end(), s);
    return *(it - 1);
  }

  TimeMesh refine() const {
    std::vector<double> r;
    r.reserve(2 * t_.size() - 1);
    for (int j = 0; j < k(); ++j) {
      r.push_back(t(j));
      r.push_back(0.5 * (t(j) + t(j + 1)));
    }
    r.push_back(T());
    return TimeMesh(std::move(r), uniform_);
  }

 private:
  TimeMesh(std::vector<double> t, bool uniform) : t_(std::move(t)), uniform_(uniform) {}
  std::vector<double> t_{0.0, 1.0};
  bool uniform_ = true;
};

inline double round_down_map(const TimeMesh& mesh, double t) { return mesh.round_down(t); }

// Gauss-Legendre rule on [-1,1] (Newton iteration on P_n).
struct GaussRule {
  std::vector<double> x;
  std::vector<double> w;
};

inline const GaussRule& gauss_legendre(int n) {
  static std::mutex mu;
  static std::map<int, GaussRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  require(n >= 1 && n <= 64, "gauss_legendre: order out of range");
  GaussRule r;
  r.x.resize(n);
  r.w.resize(n);
  const double pi = std::acos(-1.0);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(pi * (i + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int it2 = 0; it2 < 100; ++it2) {
      double p0 = 1.0, p1 = z;
      for (int m = 2; m <= n; ++m) {
        double p2 = ((2.0 * m - 1.0) * z * p1 - (m - 1.0) * p0) / m;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    // recompute derivative at the converged root
    double p0 = 1.0, p1 = z;
    for (int m = 2; m <= n; ++m) {
      double p2 = ((2.0 * m - 1.0) * z * p1 - (m - 1.0) * p0) / m;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (z * p1 - p0) / (z * z - 1.0);
    r.x[i] = -z;
    r.w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  return cache.emplace(n, std::move(r)).first->second;
}

inline constexpr int kCellOrder = 4;

// Integral of a vector function over [a,b] by one Gauss-Legendre panel.
template <class F>
auto integrate_panel(F&& f, double a, double b, int order = kCellOrder) {
  const GaussRule& g = gauss_legendre(order);
  const double c = 0.5 * (a + b), r = 0.5 * (b - a);
  using R = std::decay_t<decltype(f(a))>;
  R acc = f(c + r * g.x[0]) * (r * g.w[0]);
  for (std::size_t i = 1; i < g.x.size(); ++i) acc += f(c + r * g.x[i]) * (r * g.w[i]);
  return acc;
}

template <class F>
double integrate_scalar(F&& f, double a, double b, int order = kCellOrder) {
  const GaussRule& g = gauss_legendre(order);
  const double c = 0.5 * (a + b), r = 0.5 * (b - a);
  double acc = 0.0;
  for (std::size_t i = 0; i < g.x.size(); ++i) acc += r * g.w[i] * f(c + r * g.x[i]);
  return acc;
}

// Composite rule over the cells of a mesh restricted to [a,b].
template <class F>
double integrate_scalar_on(const TimeMesh& mesh, F&& f, double a, double b, int order = kCellOrder) {
  double acc = 0.0;
  for (int j = 0; j < mesh.k(); ++j) {
    double lo = std::max(a, mesh.t(j)), hi = std::min(b, mesh.t(j + 1));
    if (hi > lo) acc += integrate_scalar(f, lo, hi, order);
  }
  return acc;
}

using VectorFn = std::function<Vector(double)>;

// An arc with an optional derivative oracle.
struct Arc {
  VectorFn value;
  VectorFn derivative;
  Vector operator()(double t) const { return value(t); }
};

class PiecewiseLinearArc {
 public:
  PiecewiseLinearArc(TimeMesh mesh, std::vector<Vector> nodes) : mesh_(std::move(mesh)), x_(std::move(nodes)) {
    require(static_cast<int>(x_.size()) == mesh_.k() + 1, "piecewise linear arc: node count mismatch");
  }

  const TimeMesh& mesh() const { return mesh_; }
  const std::vector<Vector>& nodes() const { return x_; }
  const Vector& node(int j) const { return x_.at(static_cast<std::size_t>(j)); }

  Vector slope(int j) const { return (x_[j + 1] - x_[j]) / mesh_.h(j); }

  Vector value(double t) const {
    int j = mesh_.cell_of(t);
    double s = (t - mesh_.t(j)) / mesh_.h(j);
    return (1.0 - s) * x_[j] + s * x_[j + 1];
  }

  Vector derivative(double t) const { return slope(mesh_.cell_of(t)); }

  Arc as_arc() const {
    auto self = std::make_shared<PiecewiseLinearArc>(*this);
    return Arc{[self](double t) { return self->value(t); }, [self](double t) { return self->derivative(t); }};
  }

 private:
  TimeMesh mesh_;
  std::vector<Vector> x_;
};

// Constant y_j on (t_j, t_{j+1}], separate value at t = 0.
class PiecewiseConstantArc {
 public:
  PiecewiseConstantArc(TimeMesh mesh, std::vector<Vector> values, Vector at_zero)
      : mesh_(std::move(mesh)), y_(std::move(values)), y0_(std::move(at_zero)) {
    require(static_cast<int>(y_.size()) == mesh_.k(), "piecewise constant arc: value count mismatch");
  }

  const TimeMesh& mesh() const { return mesh_; }
  const std::vector<Vector>& values() const { return y_; }
  const Vector& cell_value(int j) const { return y_.at(static_cast<std::size_t>(j)); }

  Vector value(double t) const {
    if (t < 0.0 || t > mesh_.T()) throw DomainError("piecewise constant arc: time outside [0,T]");
    if (t == 0.0) return y0_;
    auto it = std::lower_bound(mesh_.nodes().begin(), mesh_.nodes().end(), t);
    int j = static_cast<int>(it - mesh_.nodes().begin()) - 1;
    return y_[static_cast<std::size_t>(j)];
  }

 private:
  TimeMesh mesh_;
  std::vector<Vector> y_;
  Vector y0_;
};

// Cell averages: the L2-best step approximation on the mesh.
inline PiecewiseConstantArc average_operator(const TimeMesh& mesh, const VectorFn& y, int order = kCellOrder) {
  std::vector<Vector> avg;
  avg.reserve(mesh.k());
  for (int j = 0; j < mesh.k(); ++j) avg.push_back(integrate_panel(y, mesh.t(j), mesh.t(j + 1), order) / mesh.h(j));
  Vector first = avg.front();
  return PiecewiseConstantArc(mesh, std::move(avg), std::move(first));
}

inline double l2_distance(const VectorFn& a, const VectorFn& b, const TimeMesh& grid, int order = kCellOrder) {
  auto sq = [&](double t) { return (a(t) - b(t)).squaredNorm(); };
  return std::sqrt(integrate_scalar_on(grid, sq, 0.0, grid.T(), order));
}

struct W12Distance {
  double sup = 0.0;      // sampled sup-norm gap
  double deriv_l2 = 0.0;  // L2 norm of the derivative gap
  double w12() const { return sup + deriv_l2; }
};

inline constexpr int kSupSamplesPerCell = 16;

inline W12Distance w12_distance(const PiecewiseLinearArc& a, const Arc& ref, int samples_per_cell = kSupSamplesPerCell) {
  const TimeMesh& m = a.mesh();
  W12Distance d;
  for (int j = 0; j < m.k(); ++j) {
    for (int s = 0; s <= samples_per_cell; ++s) {
      double t = m.t(j) + m.h(j) * static_cast<double>(s) / samples_per_cell;
      if (s == samples_per_cell) t = m.t(j + 1);
      Vector aj = (1.0 - static_cast<double>(s) / samples_per_cell) * a.node(j) +
                  (static_cast<double>(s) / samples_per_cell) * a.node(j + 1);
      d.sup = std::max(d.sup, (aj - ref.value(t)).norm());
    }
    Vector sl = a.slope(j);
    d.deriv_l2 += integrate_scalar([&](double t) { return (sl - ref.derivative(t)).squaredNorm(); }, m.t(j), m.t(j + 1));
  }
  d.deriv_l2 = std::sqrt(d.deriv_l2);
  return d;
}

// Nodal interpolant of an arc on a mesh.
inline PiecewiseLinearArc interpolate(const TimeMesh& mesh, const VectorFn& x) {
  std::vector<Vector> n;
  n.reserve(mesh.k() + 1);
  for (int j = 0; j <= mesh.k(); ++j) n.push_back(x(mesh.t(j)));
  return PiecewiseLinearArc(mesh, std::move(n));
}

}  // namespace idikit

#endif
