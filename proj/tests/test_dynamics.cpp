#include "idikit/catalog.hpp"
#include "idikit/dynamics.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace idikit;

namespace {

Vector v1(double a) { return Vector::Constant(1, a); }

Problem bare_problem(int n, VelocityMap F, VolterraKernel K, Vector x0, double T = 1.0) {
  return Problem{"bare",
                 n,
                 T,
                 std::move(x0),
                 std::move(F),
                 std::move(K),
                 TerminalCost::zero(n),
                 RunningCost::zero(n),
                 EndpointSet::whole(n),
                 1.0,
                 StateBox{Vector::Constant(n, -2.0), Vector::Constant(n, 2.0)},
                 {1.0, 1.0},
                 std::nullopt};
}

VelocityMap zero_singleton(int n) {
  return VelocityMap::singleton(
      n, [n](double, const Vector&) { return Vector(Vector::Zero(n)); },
      [n](double, const Vector&) { return Matrix(Matrix::Zero(n, n)); });
}

VolterraKernel neg_identity() {
  return VolterraKernel(
      1, [](double, double, const Vector& x) { return Vector(-x); },
      [](double, double, const Vector&) { return Matrix(-Matrix::Identity(1, 1)); }, 1.0, 1.0);
}

double nodal_cos_error(const DiscreteTrajectory& tr) {
  double e = 0.0;
  for (int j = 0; j <= tr.mesh.k(); ++j) e = std::max(e, std::abs(tr.x[j](0) - oracle::cos_ode(tr.mesh.t(j))));
  return e;
}

}  // namespace

TEST(Simulate, StationaryWithoutDynamics) {
  Vector x0(2);
  x0 << 0.3, -1.2;
  Problem P = bare_problem(2, zero_singleton(2), VolterraKernel::zero(2), x0);
  auto tr = simulate(P, TimeMesh::uniform(1.0, 17), SelectionPolicy::min_norm());
  for (const auto& x : tr.x) EXPECT_EQ((x - x0).norm(), 0.0);

  Problem Q = bare_problem(
      2, VelocityMap::ball(2, [](double, const Vector&) { return Vector(Vector::Zero(2)); },
                           [](double, const Vector&) { return Matrix(Matrix::Zero(2, 2)); }, 1.0),
      VolterraKernel::zero(2), x0);
  auto tq = simulate(Q, TimeMesh::uniform(1.0, 9), SelectionPolicy::min_norm());
  for (const auto& x : tq.x) EXPECT_EQ((x - x0).norm(), 0.0);
}

TEST(Simulate, CosBenchmarkConvergesAtFirstOrder) {
  Problem P = bare_problem(1, zero_singleton(1), neg_identity(), v1(1.0));
  std::vector<double> err;
  for (int k : {20, 40, 80, 160, 320}) err.push_back(nodal_cos_error(simulate(P, TimeMesh::uniform(1.0, k), SelectionPolicy::min_norm())));
  for (std::size_t i = 1; i < err.size(); ++i) {
    EXPECT_LT(err[i], err[i - 1]);
    EXPECT_GE(std::log2(err[i - 1] / err[i]), 0.9);
  }
}

TEST(Simulate, TrajectoryInvariantsHoldForEveryPolicy) {
  for (const auto& name : catalog_names()) {
    Problem P = catalog_problem(name);
    TimeMesh m = TimeMesh::uniform(P.T, 24);
    Vector c = Vector::Ones(P.dim) * 3.0;
    for (const auto& pol : {SelectionPolicy::min_norm(), SelectionPolicy::extreme_point(42), SelectionPolicy::constant_control(c)}) {
      auto tr = simulate(P, m, pol);
      EXPECT_EQ((tr.x[0] - P.x0).norm(), 0.0);
      EXPECT_LE(discrete_infeasibility(P, tr), 1e-12) << name;
      EXPECT_LE(feasibility_residual(P, tr), 1e-12) << name;
      for (int j = 0; j < m.k(); ++j) EXPECT_NEAR((tr.w[j] - kernel_average_w(P.kernel, m, tr.x, j)).norm(), 0.0, 1e-15);
    }
  }
}

TEST(Simulate, ExtremePointPolicyIsSeeded) {
  Problem P = catalog_polytope_endpoint();
  TimeMesh m = TimeMesh::uniform(P.T, 30);
  auto a = simulate(P, m, SelectionPolicy::extreme_point(5));
  auto b = simulate(P, m, SelectionPolicy::extreme_point(5));
  auto c = simulate(P, m, SelectionPolicy::extreme_point(6));
  double dab = 0.0, dac = 0.0;
  for (int j = 0; j <= m.k(); ++j) dab += (a.x[j] - b.x[j]).norm(), dac += (a.x[j] - c.x[j]).norm();
  EXPECT_EQ(dab, 0.0);
  EXPECT_GT(dac, 0.0);
}

TEST(Approximate, FixedPointOfTheConstruction) {
  // reference = extension of a trajectory on the same mesh, F = {slope of the current cell}, g = 0
  TimeMesh m = TimeMesh::uniform(1.0, 8);
  std::vector<Vector> nodes;
  for (int j = 0; j <= 8; ++j) nodes.push_back(v1(std::sin(3.0 * m.t(j)) + 0.2 * j));
  PiecewiseLinearArc ext(m, nodes);
  auto slope_at = [ext](double t) { return ext.derivative(t); };
  VelocityMap F = VelocityMap::singleton(
      1, [slope_at](double t, const Vector&) { return slope_at(t); },
      [](double, const Vector&) { return Matrix(Matrix::Zero(1, 1)); });
  Problem P = bare_problem(1, F, VolterraKernel::zero(1), nodes[0]);
  auto res = approximate_arc(P, ext.as_arc(), m);
  for (int j = 0; j <= 8; ++j) EXPECT_NEAR((res.trajectory.x[j] - nodes[j]).norm(), 0.0, 1e-14);
  EXPECT_NEAR(res.report.sup_error, 0.0, 1e-14);
  EXPECT_NEAR(res.report.deriv_l2_error, 0.0, 1e-13);
  EXPECT_NEAR(res.report.xi_k, 0.0, 1e-13);
}

TEST(Approximate, CosBenchmarkW12Decreases) {
  Problem P = catalog_cos_t();
  Arc ref{[](double t) { return v1(oracle::cos_ode(t)); }, [](double t) { return v1(-std::sin(t)); }};
  double prev = 1e9;
  for (int k : {20, 40, 80, 160}) {
    auto r = approximate_arc(P, ref, TimeMesh::uniform(P.T, k));
    EXPECT_LT(r.report.w12_error(), prev) << k;
    prev = r.report.w12_error();
  }
}

TEST(Approximate, DampedVolterraW12NonincreasingUnderDoubling) {
  Problem P = catalog_damped_volterra();
  Arc ref{[](double t) { return v1(oracle::damped_ode(t)(0)); }, [](double t) { return v1(oracle::damped_ode(t)(1)); }};
  double prev = 1e9;
  for (int k : {10, 20, 40, 80}) {
    auto r = approximate_arc(P, ref, TimeMesh::uniform(P.T, k));
    EXPECT_LE(r.report.w12_error(), 1.05 * prev) << k;
    prev = r.report.w12_error();
  }
}

TEST(Approximate, SimulatedBallReferenceIsReproducedFeasibly) {
  Problem P = catalog_ball_control_lq();
  auto fine = simulate(P, TimeMesh::uniform(P.T, 640), SelectionPolicy::extreme_point(9));
  auto res = approximate_arc(P, fine.extension().as_arc(), TimeMesh::uniform(P.T, 40));
  EXPECT_LE(feasibility_residual(P, res.trajectory), 1e-8);
  EXPECT_LE(discrete_infeasibility(P, res.trajectory), 1e-8);
}

TEST(Approximate, ErrorsDominatedByBoundsOnCatalog) {
  for (const auto& name : catalog_names()) {
    Problem P = catalog_problem(name);
    for (int k : {10, 40}) {
      auto r = approximate_arc(P, *P.reference, TimeMesh::uniform(P.T, k));
      const auto& e = r.report;
      EXPECT_LE(e.nodal_sup_error, e.zeta_k * (1 + 1e-9)) << name << " k=" << k;
      EXPECT_LE(e.deriv_l2_error * e.deriv_l2_error, e.beta_k * (1 + 1e-9)) << name << " k=" << k;
      EXPECT_GE(e.zeta_k, 0.0);
      EXPECT_LE(feasibility_residual(P, r.trajectory), 1e-8) << name;
    }
  }
}

TEST(Approximate, InfeasibleReferenceRejected) {
  Problem P = catalog_cos_t();
  Arc bad{[](double t) { return v1(1.0 + t); }, [](double) { return v1(1.0); }};
  EXPECT_THROW(approximate_arc(P, bad, TimeMesh::uniform(1.0, 10)), InfeasiblePointError);
}

TEST(Feasibility, ResidualExamples) {
  VelocityMap one = VelocityMap::singleton(
      1, [](double, const Vector&) { return v1(1.0); }, [](double, const Vector&) { return Matrix(Matrix::Zero(1, 1)); });
  Problem P = bare_problem(1, one, VolterraKernel::zero(1), v1(0.5), 2.5);
  Arc still{[](double) { return v1(0.5); }, [](double) { return v1(0.0); }};
  TimeMesh m = TimeMesh::uniform(2.5, 10);
  EXPECT_NEAR(feasibility_residual(P, still, m), std::sqrt(2.5), 1e-14);
  EXPECT_EQ(feasibility_residual(P, still, m, true), feasibility_residual(P, still, m, false));

  Problem C = catalog_cos_t();
  EXPECT_LE(feasibility_residual(C, *C.reference, TimeMesh::uniform(1.0, 40)), 1e-6);
  auto tr = simulate(C, TimeMesh::uniform(1.0, 40), SelectionPolicy::min_norm());
  EXPECT_LE(feasibility_residual(C, tr), 1e-12);
}

TEST(Localization, Examples) {
  Arc c{[](double t) { return v1(std::cos(t)); }, [](double t) { return v1(-std::sin(t)); }};
  TimeMesh m = TimeMesh::uniform(1.0, 80);
  EXPECT_TRUE(localization_check(c, c, 0.1, m));
  Arc shifted{[](double t) { return v1(std::cos(t) + 0.1); }, [](double t) { return v1(-std::sin(t)); }};
  EXPECT_FALSE(localization_check(shifted, c, 0.1, m));
  EXPECT_TRUE(localization_check(interpolate(m, c.value).as_arc(), c, 0.1, m));
  EXPECT_THROW(localization_check(c, c, 0.0, m), DomainError);
}
