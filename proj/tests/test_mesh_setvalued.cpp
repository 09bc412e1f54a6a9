#include "idikit/setvalued.hpp"
#include "idikit/mesh.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace idikit;

namespace {

Vector v1(double a) { return Vector::Constant(1, a); }
Vector v2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

DriftFn zero_f(int n) {
  return [n](double, const Vector&) { return Vector(Vector::Zero(n)); };
}
DriftJacobian zero_J(int n) {
  return [n](double, const Vector&) { return Matrix(Matrix::Zero(n, n)); };
}

}  // namespace

// ---- mesh ----

TEST(Mesh, RoundDownExamples) {
  TimeMesh m = TimeMesh::uniform(1.0, 4);
  EXPECT_DOUBLE_EQ(m.round_down(0.3), 0.25);
  EXPECT_DOUBLE_EQ(round_down_map(m, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(m.round_down(1.0), 1.0);
  EXPECT_THROW(m.round_down(-0.1), DomainError);
  EXPECT_THROW(m.round_down(1.1), DomainError);
}

TEST(Mesh, RoundDownIdempotentAndMonotone) {
  TimeMesh m = TimeMesh::from_nodes({0.0, 0.1, 0.35, 0.4, 0.9, 1.3});
  double prev = -1.0;
  for (int i = 0; i <= 1300; ++i) {
    double t = 1.3 * i / 1300.0;
    double r = m.round_down(t);
    EXPECT_LE(r, t);
    EXPECT_EQ(m.round_down(r), r);
    EXPECT_GE(r, prev);
    prev = r;
  }
}

TEST(Mesh, InvariantsAndRefine) {
  TimeMesh m = TimeMesh::uniform(2.0, 7);
  EXPECT_EQ(m.t(0), 0.0);
  EXPECT_EQ(m.T(), 2.0);
  EXPECT_LE(m.h_max(), 2.0 / 7 + 1e-15);
  TimeMesh n = TimeMesh::from_nodes({0.0, 0.2, 0.5, 1.0});
  EXPECT_FALSE(n.is_uniform());
  EXPECT_DOUBLE_EQ(n.refine().h_max(), n.h_max() / 2);
  EXPECT_EQ(n.refine().k(), 6);
  EXPECT_DOUBLE_EQ(m.refine().h_max(), m.h_max() / 2);
  EXPECT_THROW(TimeMesh::from_nodes({0.0, 0.5, 0.5}), DomainError);
  EXPECT_THROW(TimeMesh::from_nodes({0.1, 0.5}), DomainError);
  EXPECT_THROW(TimeMesh::uniform(0.0, 3), DomainError);
}

TEST(Mesh, PiecewiseArcs) {
  TimeMesh m = TimeMesh::uniform(1.0, 2);
  PiecewiseLinearArc a(m, {v1(0.0), v1(1.0), v1(0.0)});
  EXPECT_EQ(a.value(0.5)(0), 1.0);
  EXPECT_DOUBLE_EQ(a.value(0.25)(0), 0.5);
  EXPECT_DOUBLE_EQ(a.derivative(0.75)(0), -2.0);
  PiecewiseConstantArc c(m, {v1(3.0), v1(4.0)}, v1(7.0));
  EXPECT_EQ(c.value(0.0)(0), 7.0);
  EXPECT_EQ(c.value(0.5)(0), 3.0);  // right-closed cells
  EXPECT_EQ(c.value(0.51)(0), 4.0);
}

TEST(Mesh, AverageOperatorExamples) {
  TimeMesh m = TimeMesh::uniform(1.0, 2);
  auto c = average_operator(m, [](double) { return v2(2.0, -1.0); });
  for (const auto& y : c.values()) EXPECT_NEAR((y - v2(2.0, -1.0)).norm(), 0.0, 1e-15);
  auto lin = average_operator(m, [](double t) { return v1(t); });
  EXPECT_NEAR(lin.cell_value(0)(0), 0.25, 1e-15);
  EXPECT_NEAR(lin.cell_value(1)(0), 0.75, 1e-15);
  auto sq = average_operator(TimeMesh::uniform(1.0, 1), [](double t) { return v1(t * t); });
  EXPECT_NEAR(sq.cell_value(0)(0), oracle::simpson([](double t) { return t * t; }, 0.0, 1.0), 1e-12);
}

TEST(Mesh, AverageOperatorLinear) {
  TimeMesh m = TimeMesh::from_nodes({0.0, 0.3, 0.31, 0.8, 1.0});
  auto y = [](double t) { return v2(std::sin(3 * t), std::exp(t)); };
  auto z = [](double t) { return v2(t * t * t, std::cos(t)); };
  const double al = -2.5;
  auto lhs = average_operator(m, [&](double t) { return Vector(al * y(t) + z(t)); });
  auto ay = average_operator(m, y), az = average_operator(m, z);
  for (int j = 0; j < m.k(); ++j)
    EXPECT_NEAR((lhs.cell_value(j) - (al * ay.cell_value(j) + az.cell_value(j))).norm(), 0.0, 1e-13);
}

TEST(Mesh, AverageOperatorConvergesOnSine) {
  double prev = 1e9;
  for (int k : {4, 8, 16, 32, 64}) {
    TimeMesh m = TimeMesh::uniform(3.0, k);
    auto avg = average_operator(m, [](double t) { return v1(std::sin(t)); });
    // oracle: fine Simpson of the squared gap, cell by cell
    double acc = 0.0;
    for (int j = 0; j < k; ++j) {
      double c = avg.cell_value(j)(0);
      acc += oracle::simpson([c](double t) { return (std::sin(t) - c) * (std::sin(t) - c); }, m.t(j), m.t(j + 1), 200);
    }
    double d = std::sqrt(acc);
    EXPECT_LT(d, prev);
    prev = d;
  }
  EXPECT_LT(prev, 0.03);
}

TEST(Mesh, L2DistanceExamples) {
  TimeMesh g = TimeMesh::uniform(1.0, 8);
  auto s = [](double t) { return v1(std::sin(t)); };
  EXPECT_EQ(l2_distance(s, s, g), 0.0);
  EXPECT_NEAR(l2_distance([](double) { return v1(0.0); }, [](double) { return v1(1.0); }, g), 1.0, 1e-14);
  EXPECT_NEAR(l2_distance([](double t) { return v1(t); }, [](double) { return v1(0.0); }, g),
              std::sqrt(oracle::simpson([](double t) { return t * t; }, 0.0, 1.0)), 1e-12);
  auto a = [](double t) { return v2(t, 1.0); };
  auto b = [](double t) { return v2(std::cos(t), t * t); };
  EXPECT_DOUBLE_EQ(l2_distance(a, b, g), l2_distance(b, a, g));
}

TEST(Mesh, W12DistanceExamples) {
  TimeMesh m = TimeMesh::uniform(1.0, 5);
  Arc lin{[](double t) { return v2(2 * t, 1 - t); }, [](double) { return v2(2.0, -1.0); }};
  auto a = interpolate(m, lin.value);
  auto d = w12_distance(a, lin);
  EXPECT_NEAR(d.sup, 0.0, 1e-15);
  EXPECT_NEAR(d.deriv_l2, 0.0, 1e-14);

  std::vector<Vector> shifted;
  for (const auto& x : a.nodes()) shifted.push_back(x + v2(0.3, 0.4));
  auto ds = w12_distance(PiecewiseLinearArc(m, shifted), lin);
  EXPECT_NEAR(ds.sup, 0.5, 1e-14);
  EXPECT_NEAR(ds.deriv_l2, 0.0, 1e-14);
}

TEST(Mesh, W12CosInterpolantWithinInterpolationBound) {
  TimeMesh m = TimeMesh::uniform(1.0, 10);
  Arc c{[](double t) { return v1(oracle::cos_ode(t)); }, [](double t) { return v1(-std::sin(t)); }};
  auto a = interpolate(m, c.value);
  auto d = w12_distance(a, c);
  EXPECT_LE(d.sup, 0.00125);
  // independent dense sampling of the same gap
  double dense = 0.0;
  for (int i = 0; i <= 2000; ++i) {
    double t = i / 2000.0;
    dense = std::max(dense, std::abs(a.value(t)(0) - std::cos(t)));
  }
  EXPECT_LE(dense, 0.00125);
  EXPECT_NEAR(d.sup, dense, 2e-5);
}

// ---- set-valued ----

TEST(SetValued, ProjectionExamples) {
  VelocityMap S = VelocityMap::singleton(
      2, [](double t, const Vector& x) { return Vector(x + v2(t, 1.0)); }, [](double, const Vector&) { return Matrix(Matrix::Identity(2, 2)); });
  auto r = distance_and_projection(S, 0.5, v2(1.0, 0.0), v2(0.0, 0.0));
  EXPECT_NEAR(r.distance, (v2(1.5, 1.0)).norm(), 1e-15);
  EXPECT_NEAR((r.projection - v2(1.5, 1.0)).norm(), 0.0, 1e-15);

  VelocityMap B = VelocityMap::ball(2, zero_f(2), zero_J(2), 1.0);
  auto rb = distance_and_projection(B, 0.0, v2(0, 0), v2(2.0, 0.0));
  EXPECT_NEAR(rb.distance, 1.0, 1e-15);
  EXPECT_NEAR((rb.projection - v2(1.0, 0.0)).norm(), 0.0, 1e-15);
  auto rin = distance_and_projection(B, 0.0, v2(0, 0), v2(0.3, 0.1));
  EXPECT_EQ(rin.distance, 0.0);

  std::vector<Vector> V = {v2(0, 0), v2(1, 0), v2(0, 1)};
  VelocityMap P = VelocityMap::polytope(2, zero_f(2), zero_J(2), V);
  auto rp = distance_and_projection(P, 0.0, v2(0, 0), v2(1.0, 1.0));
  auto [bd, barg] = oracle::polytope_grid_projection(V, v2(1.0, 1.0));
  EXPECT_NEAR(rp.distance, std::sqrt(2.0) / 2, 1e-12);
  EXPECT_NEAR(rp.distance, bd, 1e-9);
  EXPECT_NEAR((rp.projection - barg).norm(), 0.0, 1e-9);
  EXPECT_NEAR((rp.projection - v2(0.5, 0.5)).norm(), 0.0, 1e-12);
}

TEST(SetValued, EmptyPolytopeRejected) {
  EXPECT_THROW(VelocityMap::polytope(2, zero_f(2), zero_J(2), {}), InvalidMapError);
  EXPECT_THROW(VelocityMap::ball(2, zero_f(2), zero_J(2), -1.0), InvalidMapError);
}

TEST(SetValued, PolytopeProjectionMatchesBruteForce) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<Vector> V = {v2(-0.5, -0.2), v2(0.8, -0.4), v2(0.1, 0.9)};
  VelocityMap P = VelocityMap::polytope(2, zero_f(2), zero_J(2), V);
  for (int n = 0; n < 40; ++n) {
    Vector z = v2(u(rng), u(rng));
    auto r = distance_and_projection(P, 0.0, v2(0, 0), z);
    auto [bd, barg] = oracle::polytope_grid_projection(V, z, 300);
    EXPECT_LE(r.distance, bd + 1e-12);
    EXPECT_NEAR(r.distance, bd, 5e-3);
    // variational inequality: <z - p, v - p> <= 0 for every vertex
    for (const auto& v : V) EXPECT_LE((z - r.projection).dot(v - r.projection), 1e-9);
  }
}

TEST(SetValued, ProjectionProperties) {
  VelocityMap B = VelocityMap::ball(
      2, [](double t, const Vector& x) { return Vector(v2(std::sin(x(0)), t)); },
      [](double, const Vector& x) { Matrix J = Matrix::Zero(2, 2); J(0, 0) = std::cos(x(0)); return J; }, 0.7);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  Vector x = v2(0.4, -1.0);
  for (int n = 0; n < 200; ++n) {
    Vector z1 = v2(u(rng), u(rng)), z2 = v2(u(rng), u(rng));
    auto p1 = distance_and_projection(B, 0.3, x, z1), p2 = distance_and_projection(B, 0.3, x, z2);
    EXPECT_LE((p1.projection - p2.projection).norm(), (z1 - z2).norm() + 1e-12);
    EXPECT_EQ(p1.distance == 0.0, contains(B, 0.3, x, z1, 0.0));
    EXPECT_NEAR(distance_and_projection(B, 0.3, x, p1.projection).distance, 0.0, 1e-12);
  }
}

TEST(SetValued, HausdorffExamples) {
  VelocityMap B = VelocityMap::ball(
      1, [](double, const Vector& x) { return x; }, [](double, const Vector&) { return Matrix(Matrix::Identity(1, 1)); }, 1.0);
  EXPECT_EQ(hausdorff_distance(B, 0.0, v1(2.0), v1(2.0)), 0.0);
  EXPECT_DOUBLE_EQ(hausdorff_distance(B, 0.0, v1(0.0), v1(3.0)), 3.0);

  // brute-force Hausdorff between two sampled intervals [a-1,a+1] and [b-1,b+1]
  auto brute = [](double a, double b) {
    double h = 0.0;
    for (int i = 0; i <= 200; ++i) {
      double p = a - 1 + 2.0 * i / 200;
      h = std::max(h, std::max(0.0, std::abs(p - b) - 1.0));
      double q = b - 1 + 2.0 * i / 200;
      h = std::max(h, std::max(0.0, std::abs(q - a) - 1.0));
    }
    return h;
  };
  EXPECT_NEAR(hausdorff_distance(B, 0.0, v1(0.0), v1(3.0)), brute(0.0, 3.0), 1e-12);
}

TEST(SetValued, HausdorffLipschitzAuditOnSine) {
  VelocityMap S = VelocityMap::ball(
      1, [](double, const Vector& x) { return Vector(x.array().sin()); },
      [](double, const Vector& x) { return Matrix(Matrix::Constant(1, 1, std::cos(x(0)))); }, 0.5);
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  const double lF = 1.0;
  int pass = 0;
  for (int n = 0; n < 100; ++n) {
    Vector a = v1(u(rng)), b = v1(u(rng));
    if (hausdorff_distance(S, 0.0, a, b) <= lF * (a - b).norm() + 1e-15) ++pass;
  }
  EXPECT_EQ(pass, 100);
}

TEST(SetValued, AveragedModulusExamples) {
  StateBox box{v1(-1.0), v1(1.0)};
  SampleGrid grid = make_sample_grid(box, 8, 257);
  VelocityMap aut = VelocityMap::singleton(
      1, [](double, const Vector& x) { return Vector(2.0 * x); }, [](double, const Vector&) { return Matrix(Matrix::Constant(1, 1, 2.0)); });
  EXPECT_EQ(averaged_modulus(aut, 0.1, 1.0, grid), 0.0);

  VelocityMap lin = VelocityMap::singleton(
      1, [](double t, const Vector&) { return v1(t); }, zero_J(1));
  for (double h : {0.2, 0.1, 0.05}) {
    // oracle: the window [t-h/2,t+h/2] clipped to [0,1] has width h except within h/2 of the ends,
    // so tau = h - h^2/4 exactly; brute-force integrate the clipped width on a dense grid.
    double acc = 0.0;
    const int N = 20000;
    for (int i = 0; i < N; ++i) {
      double t = (i + 0.5) / N;
      acc += (std::min(1.0, t + h / 2) - std::max(0.0, t - h / 2)) / N;
    }
    double est = averaged_modulus(lin, h, 1.0, grid);
    EXPECT_NEAR(est, acc, 2e-4);
    EXPECT_NEAR(est, h, h * h / 4 + 2e-4);
  }

  VelocityMap s = VelocityMap::singleton(
      1, [](double t, const Vector&) { return v1(std::sin(t)); }, zero_J(1));
  double prev = 1e9;
  for (double h : {0.4, 0.2, 0.1, 0.05, 0.025, 0.0125}) {
    double est = averaged_modulus(s, h, 3.0, grid);
    EXPECT_LT(est, prev);
    prev = est;
  }
  EXPECT_LT(prev, 0.03);
  EXPECT_THROW(averaged_modulus(s, 0.1, 1.0, SampleGrid{{}, 64}), DomainError);
}

TEST(SetValued, GraphNormalConeExamples) {
  Matrix A(2, 2);
  A << 1.0, 2.0, -3.0, 0.5;
  VelocityMap S = VelocityMap::singleton(
      2, [A](double, const Vector& x) { return Vector(A * x); }, [A](double, const Vector&) { return A; });
  Vector x = v2(0.2, -0.1);
  auto G = graph_normal_cone(S, 0.0, x, A * x);
  ASSERT_EQ(G.lines.size(), 2u);
  for (const auto& l : G.lines) {
    Vector u = l.tail(2);
    EXPECT_NEAR((l.head(2) + A.transpose() * u).norm(), 0.0, 1e-14);
  }
  EXPECT_THROW(graph_normal_cone(S, 0.0, x, Vector(A * x + v2(1e-3, 0))), InfeasiblePointError);

  VelocityMap B = VelocityMap::ball(2, zero_f(2), zero_J(2), 1.0);
  auto Gb = graph_normal_cone(B, 0.0, v2(0, 0), v2(1.0, 0.0));
  ASSERT_EQ(Gb.rays.size(), 1u);
  EXPECT_NEAR((Gb.rays[0] - (Vector(4) << 0, 0, 1, 0).finished()).norm(), 0.0, 1e-14);
  auto Gi = graph_normal_cone(B, 0.0, v2(0, 0), v2(0.2, 0.1));
  EXPECT_TRUE(Gi.rays.empty() && Gi.lines.empty());
}

TEST(SetValued, BallGraphNormalPassesProximalCheck) {
  // gph of x -> [x-1, x+1]; at (x, x+1) the generator is (-1, 1) up to scale.
  VelocityMap B = VelocityMap::ball(
      1, [](double, const Vector& x) { return x; }, [](double, const Vector&) { return Matrix(Matrix::Identity(1, 1)); }, 1.0);
  const double xb = 0.4, vb = 1.4;
  auto G = graph_normal_cone(B, 0.0, v1(xb), v1(vb));
  ASSERT_EQ(G.rays.size(), 1u);
  Vector n = G.rays[0].normalized();
  EXPECT_NEAR(n(0), -1.0 / std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(n(1), 1.0 / std::sqrt(2.0), 1e-14);
  // proximal normal: (xb,vb) stays the closest sampled graph point to (xb,vb) + alpha n
  const double alpha = 0.05;
  const double qx = xb + alpha * n(0), qv = vb + alpha * n(1);
  double best = std::hypot(qx - xb, qv - vb);
  for (int i = 0; i <= 400; ++i)
    for (int j = 0; j <= 400; ++j) {
      double x = xb - 0.2 + 0.4 * i / 400, v = x - 1 + 2.0 * j / 400;
      EXPECT_GE(std::hypot(qx - x, qv - v), best - 1e-12);
    }
}

TEST(SetValued, PolytopeGraphNormalAtVertex) {
  std::vector<Vector> V = {v2(0, 0), v2(1, 0), v2(0, 1)};
  VelocityMap P = VelocityMap::polytope(2, zero_f(2), zero_J(2), V);
  auto G = graph_normal_cone(P, 0.0, v2(0, 0), v2(1.0, 0.0));
  ASSERT_FALSE(G.rays.empty());
  // every generator satisfies the normal-cone inequality at vertex (1,0)
  for (const auto& r : G.rays)
    for (const auto& v : V) EXPECT_LE(r.tail(2).dot(v - v2(1, 0)), 1e-12);
  // and (1,0), (1,1) directions are in the cone, (-1,0) is not
  EXPECT_TRUE(P.offset_normal_contains(v2(1, 0), v2(1, 0)));
  EXPECT_TRUE(P.offset_normal_contains(v2(1, 0), v2(1, 1)));
  EXPECT_FALSE(P.offset_normal_contains(v2(1, 0), v2(-1, 0)));
}

TEST(SetValued, CoderivativeExamples) {
  Matrix A(2, 2);
  A << 0.0, 1.0, -2.0, 3.0;
  VelocityMap S = VelocityMap::singleton(
      2, [A](double, const Vector& x) { return Vector(A * x); }, [A](double, const Vector&) { return A; });
  Vector x = v2(1.0, 2.0), u = v2(-0.5, 0.25);
  auto w = coderivative(S, 0.0, x, A * x, u);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_NEAR((w[0] - A.transpose() * u).norm(), 0.0, 1e-15);

  VelocityMap B = VelocityMap::ball(2, zero_f(2), zero_J(2), 1.0);
  auto w0 = coderivative(B, 0.0, v2(0, 0), v2(0.1, 0.1), v2(0, 0));
  ASSERT_EQ(w0.size(), 1u);
  EXPECT_EQ(w0[0].norm(), 0.0);
  EXPECT_TRUE(coderivative(B, 0.0, v2(0, 0), v2(0.1, 0.1), v2(1, 0)).empty());
}

TEST(SetValued, CoderivativeNormBound) {
  // f(x) = (sin x1 + 0.5 x2, cos x2 / 2): |grad f| <= l_F with l_F from a dense SVD sweep.
  auto f = [](double, const Vector& x) { return v2(std::sin(x(0)) + 0.5 * x(1), 0.5 * std::cos(x(1))); };
  auto J = [](double, const Vector& x) {
    Matrix m(2, 2);
    m << std::cos(x(0)), 0.5, 0.0, -0.5 * std::sin(x(1));
    return m;
  };
  VelocityMap B = VelocityMap::ball(2, f, J, 0.8);
  double lF = 0.0;
  for (int i = 0; i <= 100; ++i)
    for (int j = 0; j <= 100; ++j) {
      Eigen::JacobiSVD<Matrix> svd(J(0.0, v2(M_PI * i / 100, M_PI * j / 50)));
      lF = std::max(lF, svd.singularValues()(0));
    }
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-3.0, 3.0), ang(0.0, 2 * M_PI);
  int checked = 0;
  for (int n = 0; n < 500; ++n) {
    Vector x = v2(u(rng), u(rng));
    double a = ang(rng);
    Vector off = 0.8 * v2(std::cos(a), std::sin(a));  // boundary point so the cone is a ray
    Vector uu = (n % 2 ? -1.0 : 1.0) * std::abs(u(rng)) * off.normalized();
    for (const auto& w : coderivative(B, 0.0, x, Vector(f(0.0, x) + off), -uu)) {
      EXPECT_LE(w.norm(), lF * uu.norm() * (1 + 1e-12) + 1e-14);
      ++checked;
    }
  }
  EXPECT_GT(checked, 200);
}

TEST(SetValued, GrowthConstantsAndSamples) {
  VelocityMap B = VelocityMap::ball(
      1, [](double, const Vector& x) { return x; }, [](double, const Vector&) { return Matrix(Matrix::Identity(1, 1)); }, 1.0);
  auto g = sample_growth_constants(B, StateBox{v1(-2.0), v1(3.0)}, 1.0);
  EXPECT_DOUBLE_EQ(g.m_F, 4.0);
  EXPECT_DOUBLE_EQ(g.l_F, 1.0);
  EXPECT_EQ(box_samples(StateBox{v2(0, 0), v2(1, 1)}, 16).size(), 16u);
  EXPECT_EQ(&convex_hull(B), &B);
}
