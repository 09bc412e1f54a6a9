#ifndef IDIKIT_POLYHEDRAL_HPP
#define IDIKIT_POLYHEDRAL_HPP

#include "idikit/core.hpp"

#include <algorithm>

namespace idikit {

// conv(points) + cone(rays) + span(lines). No points means the base point is the origin.
struct PolyhedralSet {
  std::vector<Vector> points;
  std::vector<Vector> rays;
  std::vector<Vector> lines;

  bool is_cone() const { return points.empty(); }
};

struct PolyhedralProjection {
  Vector point;
  double distance = 0.0;
  Vector point_weights;
  Vector ray_weights;
  Vector line_weights;
  bool converged = true;
};

namespace detail {

// Min-norm least squares on the passive columns, points summing to one.
inline Vector passive_solve(const Matrix& M, const Vector& y, const std::vector<int>& passive, int np) {
  const Eigen::Index n = M.cols();
  Vector z = Vector::Zero(n);
  int s0 = -1;
  for (int i : passive)
    if (i < np) {
      s0 = i;
      break;
    }
  std::vector<int> others;
  for (int i : passive)
    if (i != s0) others.push_back(i);
  Vector rhs = y;
  if (s0 >= 0) rhs -= M.col(s0);
  if (!others.empty()) {
    Matrix A(M.rows(), static_cast<Eigen::Index>(others.size()));
    for (std::size_t c = 0; c < others.size(); ++c) {
      int i = others[c];
      A.col(static_cast<Eigen::Index>(c)) = (i < np && s0 >= 0) ? Vector(M.col(i) - M.col(s0)) : Vector(M.col(i));
    }
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(A);
    cod.setThreshold(1e-13);
    Vector sol = cod.solve(rhs);
    for (std::size_t c = 0; c < others.size(); ++c) z(others[c]) = sol(static_cast<Eigen::Index>(c));
  }
  if (s0 >= 0) {
    double sum = 0.0;
    for (int i : others)
      if (i < np) sum += z(i);
    z(s0) = 1.0 - sum;
  }
  return z;
}

}  // namespace detail

// Euclidean projection onto a polyhedral set by a Lawson-Hanson style active-set loop
// extended with a simplex constraint on the point weights.
inline PolyhedralProjection project(const PolyhedralSet& S, const Vector& y) {
  const int np = static_cast<int>(S.points.size());
  const int nr = static_cast<int>(S.rays.size());
  const int nl = static_cast<int>(S.lines.size());
  const int nv = np + nr + nl;
  const Eigen::Index dim = y.size();
  PolyhedralProjection out;
  if (nv == 0) {
    out.point = Vector::Zero(dim);
    out.distance = y.norm();
    return out;
  }
  Matrix M(dim, nv);
  int c = 0;
  for (const auto& v : S.points) M.col(c++) = v;
  for (const auto& v : S.rays) M.col(c++) = v;
  for (const auto& v : S.lines) M.col(c++) = v;

  double scale = 1.0 + y.norm();
  for (int i = 0; i < nv; ++i) scale = std::max(scale, M.col(i).norm());
  const double tol = 1e-12 * scale * scale;

  std::vector<char> passive(nv, 0);
  Vector z = Vector::Zero(nv);
  for (int i = np + nr; i < nv; ++i) passive[i] = 1;
  if (np > 0) {
    int best = 0;
    for (int i = 1; i < np; ++i)
      if ((M.col(i) - y).squaredNorm() < (M.col(best) - y).squaredNorm()) best = i;
    passive[best] = 1;
    z(best) = 1.0;
  }
  auto passive_list = [&] {
    std::vector<int> p;
    for (int i = 0; i < nv; ++i)
      if (passive[i]) p.push_back(i);
    return p;
  };
  // Lines and the seed point only: solve once so the loop starts from a stationary point.
  z = detail::passive_solve(M, y, passive_list(), np);

  const int cap = 10 * nv + 50;
  int iter = 0;
  bool converged = false;
  int last_added = -1;
  while (iter++ < cap) {
    Vector w = M.transpose() * (y - M * z);
    double gamma = 0.0;
    int cnt = 0;
    for (int i = 0; i < np; ++i)
      if (passive[i]) {
        gamma += w(i);
        ++cnt;
      }
    if (cnt > 0) gamma /= cnt;
    int enter = -1;
    double best = tol;
    for (int i = 0; i < np + nr; ++i) {
      if (passive[i]) continue;
      double score = (i < np) ? w(i) - gamma : w(i);
      if (score > best) {
        best = score;
        enter = i;
      }
    }
    if (enter < 0 || enter == last_added) {
      converged = true;
      break;
    }
    passive[enter] = 1;
    last_added = enter;
    for (int inner = 0; inner < cap; ++inner) {
      Vector zp = detail::passive_solve(M, y, passive_list(), np);
      bool ok = true;
      for (int i = 0; i < np + nr; ++i)
        if (passive[i] && zp(i) <= 0.0) ok = false;
      if (ok) {
        z = zp;
        break;
      }
      double alpha = 1.0;
      for (int i = 0; i < np + nr; ++i)
        if (passive[i] && zp(i) <= 0.0) {
          double d = z(i) - zp(i);
          if (d > 0.0) alpha = std::min(alpha, z(i) / d);
        }
      z = z + alpha * (zp - z);
      bool dropped = false;
      for (int i = 0; i < np + nr; ++i)
        if (passive[i] && z(i) <= 1e-15) {
          passive[i] = 0;
          z(i) = 0.0;
          dropped = true;
        }
      if (!dropped) break;
    }
  }
  out.converged = converged;
  out.point = M * z;
  out.distance = (y - out.point).norm();
  out.point_weights = z.head(np);
  out.ray_weights = z.segment(np, nr);
  out.line_weights = z.tail(nl);
  return out;
}

inline double distance(const PolyhedralSet& S, const Vector& y) { return project(S, y).distance; }

// Shift a set by a vector (adds it to every point, or makes it the base point of a cone).
inline PolyhedralSet translate(PolyhedralSet S, const Vector& shift) {
  if (S.points.empty()) {
    S.points.push_back(shift);
  } else {
    for (auto& p : S.points) p += shift;
  }
  return S;
}

namespace detail {

inline Matrix null_basis(const Matrix& A, double rel_tol, Eigen::Index cols) {
  if (A.rows() == 0) return Matrix::Identity(cols, cols);
  Eigen::JacobiSVD<Matrix> svd(A, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  double smax = s.size() > 0 ? s(0) : 0.0;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > rel_tol * std::max(1.0, smax)) ++rank;
  return svd.matrixV().rightCols(cols - rank);
}

inline void push_unique(std::vector<Vector>& rays, const Vector& r) {
  Vector u = r.normalized();
  for (const auto& q : rays)
    if ((q - u).norm() < 1e-9) return;
  rays.push_back(u);
}

}  // namespace detail

// Normal cone to conv(V) at a point q of it, as rays plus a lineality basis.
// Built from the polar of the tangent cone cone{v_i - q} by enumerating extreme rays.
inline PolyhedralSet polytope_normal_cone(const std::vector<Vector>& V, const Vector& q, double tol = 1e-8) {
  const Eigen::Index n = q.size();
  std::vector<Vector> d;
  for (const auto& v : V)
    if ((v - q).norm() > tol) d.push_back(v - q);
  PolyhedralSet K;
  Matrix Dt(static_cast<Eigen::Index>(d.size()), n);
  for (std::size_t i = 0; i < d.size(); ++i) Dt.row(static_cast<Eigen::Index>(i)) = d[i].transpose();
  Matrix L = detail::null_basis(Dt, 1e-10, n);
  for (Eigen::Index i = 0; i < L.cols(); ++i) K.lines.push_back(L.col(i));
  const Eigen::Index r = n - L.cols();
  if (r == 0) return K;

  // Orthonormal basis of the complement of the lineality space.
  Matrix B;
  if (L.cols() == 0) {
    B = Matrix::Identity(n, n);
  } else {
    B = detail::null_basis(L.transpose(), 1e-10, n);
  }
  std::vector<Vector> e;
  for (const auto& di : d) e.push_back(B.transpose() * di);

  auto feasible = [&](const Vector& cvec) {
    for (const auto& ei : e)
      if (ei.dot(cvec) > tol * std::max(1.0, ei.norm())) return false;
    return true;
  };
  auto consider = [&](const Vector& cvec) {
    for (double sgn : {1.0, -1.0}) {
      Vector cc = sgn * cvec.normalized();
      if (feasible(cc)) detail::push_unique(K.rays, B * cc);
    }
  };

  if (r == 1) {
    consider(Vector::Ones(1));
    return K;
  }
  const int m = static_cast<int>(e.size());
  const int pick = static_cast<int>(r) - 1;
  std::vector<int> idx(pick);
  for (int i = 0; i < pick; ++i) idx[i] = i;
  while (pick <= m) {
    Matrix E(pick, r);
    for (int i = 0; i < pick; ++i) E.row(i) = e[idx[i]].transpose();
    Matrix N = detail::null_basis(E, 1e-10, r);
    if (N.cols() == 1) consider(N.col(0));
    int pos = pick - 1;
    while (pos >= 0 && idx[pos] == m - pick + pos) --pos;
    if (pos < 0) break;
    ++idx[pos];
    for (int i = pos + 1; i < pick; ++i) idx[i] = idx[i - 1] + 1;
  }
  return K;
}

// Membership test for the same cone written in inequality form.
inline bool in_polytope_normal_cone(const std::vector<Vector>& V, const Vector& q, const Vector& u, double tol = 1e-8) {
  for (const auto& v : V)
    if ((v - q).dot(u) > tol * std::max(1.0, u.norm()) * std::max(1.0, (v - q).norm())) return false;
  return true;
}

}  // namespace idikit

#endif
