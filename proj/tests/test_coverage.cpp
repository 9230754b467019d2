#include "ergodic/coverage.hpp"
#include "ergodic/errors.hpp"
#include "ergodic/fixtures.hpp"
#include "ergodic/laplacian.hpp"
#include "ergodic/spectral.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

namespace ergodic {
namespace {

struct Surface {
  PointCloud cloud;
  KdTree index;
  explicit Surface(PointCloud c) : cloud(std::move(c)), index(cloud) {}
};

AgentState agent_at(const Vec3& x, double radius) {
  AgentState a;
  a.position = x;
  a.radius = radius;
  return a;
}

Neighborhood single_point(std::size_t i) {
  Neighborhood n;
  n.indices = {i};
  n.footprint = {0};
  n.residuals = {0.0};
  n.normalized = {0.0};
  return n;
}

TEST(Projection, FlatGridFixedPointAndDrop) {
  const Surface s(fixtures::grid(20, 20, 1.0));
  const Neighborhood on = project_agent(s.cloud, s.index, agent_at(Vec3(10, 10, 0), 2.5), 1.0);
  EXPECT_LE((on.projected - Vec3(10, 10, 0)).norm(), 1e-8);
  EXPECT_NEAR(std::abs(on.normal.z()), 1.0, 1e-12);
  const Neighborhood above = project_agent(s.cloud, s.index, agent_at(Vec3(7.3, 8.6, 1.0), 2.5), 1.0);
  EXPECT_LE((above.projected - Vec3(7.3, 8.6, 0)).norm(), 1e-8);
  for (double r : above.normalized) EXPECT_EQ(r, 0.0);
  for (double w : footprint_weights(above, 2.0)) EXPECT_EQ(w, 1.0);
}

TEST(Projection, SphereRadialProjection) {
  const Surface s(fixtures::fibonacci_sphere(2000, 1.0));
  const double h = mean_spacing(s.cloud);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int t = 0; t < 30; ++t) {
    const Vec3 dir = Vec3(g(rng), g(rng), g(rng)).normalized();
    const Neighborhood n = project_agent(s.cloud, s.index, agent_at(1.03 * dir, 4.0 * h), h);
    EXPECT_NEAR(n.projected.norm(), 1.0, 0.02);
    EXPECT_GT(n.projected.normalized().dot(dir), 0.999);
    EXPECT_GT(std::abs(n.normal.dot(dir)), 0.99);
    const double emax = *std::max_element(n.residuals.begin(), n.residuals.end());
    const bool flat = std::all_of(n.normalized.begin(), n.normalized.end(), [](double r) { return r == 0.0; });
    for (std::size_t k = 0; k < n.normalized.size(); ++k) {
      EXPECT_GE(n.normalized[k], 0.0);
      EXPECT_LE(n.normalized[k], 1.0);
      if (!flat) {
        EXPECT_NEAR(n.normalized[k], n.residuals[k] / emax, 1e-15);
      }
    }
  }
}

TEST(Projection, SparseBallExpandsAndFarAgentIsLost) {
  const Surface s(fixtures::grid(20, 20, 1.0));
  const Neighborhood n = project_agent(s.cloud, s.index, agent_at(Vec3(5.5, 5.5, 0), 0.3), 1.0);
  EXPECT_GE(n.indices.size(), 4u);
  EXPECT_TRUE(n.footprint.empty());
  EXPECT_THROW((void)project_agent(s.cloud, s.index, agent_at(Vec3(50, 50, 0), 2.0), 1.0), LostAgentError);
  EXPECT_THROW((void)project_agent(s.cloud, s.index, agent_at(Vec3(5, 5, 0), 0.0), 1.0), DomainError);
}

TEST(Footprint, WeightExamples) {
  Neighborhood n;
  n.normalized = {0.0, 1.0, 0.5};
  const auto w = footprint_weights(n, 1.0);
  EXPECT_EQ(w[0], 1.0);
  EXPECT_NEAR(w[1], 0.36788, 1e-5);
  EXPECT_NEAR(w[2], std::exp(-0.25), 1e-15);
  EXPECT_THROW((void)footprint_weights(n, 0.0), DomainError);
}

TEST(Coverage, AccumulateExamples) {
  const Eigen::VectorXd mass = (Eigen::VectorXd(4) << 0.5, 1.0, 2.0, 0.25).finished();
  CoverageState st = make_coverage_state(Field::Ones(4), mass, 0.1);
  EXPECT_NEAR(st.target.dot(mass), 1.0, 1e-15);

  accumulate_coverage(st, single_point(2), {1.0}, mass);
  EXPECT_EQ(st.step, 1);
  EXPECT_NEAR(st.coverage.dot(mass), 1.0, 1e-12);
  EXPECT_NEAR(st.coverage[2], 0.5, 1e-15);
  EXPECT_EQ(st.coverage[0] + st.coverage[1] + st.coverage[3], 0.0);
  const Field before = st.coverage;
  accumulate_coverage(st, single_point(2), {1.0}, mass);
  EXPECT_LE((st.coverage - before).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Coverage, UniformSweepGivesConstantField) {
  const int n = 10;
  Eigen::VectorXd mass(n);
  for (int i = 0; i < n; ++i) mass[i] = 0.1 + 0.05 * i;
  CoverageState st = make_coverage_state(Field::Ones(n), mass, 0.1);
  for (int round = 0; round < 3; ++round) {
    for (int i = 0; i < n; ++i) accumulate_coverage(st, single_point(static_cast<std::size_t>(i)), {0.7}, mass);
  }
  const double oracle = 1.0 / mass.sum();
  for (int i = 0; i < n; ++i) EXPECT_NEAR(st.coverage[i], oracle, 1e-14);
  EXPECT_NEAR(ergodicity(st), 0.0, 1e-14);
}

TEST(Coverage, SourceExamples) {
  const Eigen::VectorXd mass = Eigen::VectorXd::Ones(3);
  CoverageState st = make_coverage_state((Field(3) << 0.6, 0.3, 0.1).finished(), mass, 0.1);
  st.coverage = st.target;
  EXPECT_EQ(source_term(st).cwiseAbs().maxCoeff(), 0.0);
  st.coverage.setZero();
  EXPECT_LE((source_term(st) - st.target.cwiseAbs2()).cwiseAbs().maxCoeff(), 1e-16);
  st.coverage << 0.1, 0.5, 0.0;
  const Field s = source_term(st);
  EXPECT_NEAR(s[0], 0.25, 1e-15);
  EXPECT_EQ(s[1], 0.0);
  EXPECT_NEAR(s[2], 0.01, 1e-16);
  EXPECT_EQ(st.source, s);
}

TEST(Coverage, ErgodicityExamples) {
  const Eigen::VectorXd mass = Eigen::VectorXd::Ones(4);
  CoverageState st = make_coverage_state(Field::Constant(4, 0.25), mass, 0.1);
  st.coverage << 0.5, 0.5, 0.0, 0.0;
  EXPECT_NEAR(ergodicity(st), 0.35355, 1e-5);
  st.coverage = st.target;
  EXPECT_EQ(ergodicity(st), 0.0);
  st.coverage.setZero();
  EXPECT_NEAR(ergodicity(st), st.target.norm() / st.target.sum(), 1e-15);
  EXPECT_THROW((void)make_coverage_state(Field::Zero(4), mass, 0.1), DomainError);
  EXPECT_THROW((void)make_coverage_state((Field(4) << 1, -1, 0, 0).finished(), mass, 0.1), DomainError);
}

TEST(Coverage, FootprintLocalityAndNormalization) {
  const Surface s(fixtures::grid(30, 30, 1.0));
  const LaplacianOperator op = build_laplacian(s.cloud);
  const auto target = fixtures::painted_disks(s.cloud, {{Vec3(15, 15, 0), 4.0, 1.0}});
  CoverageState st = make_coverage_state(Eigen::Map<const Field>(target.data(), 900), op.mass, 0.1);
  for (int k = 0; k < 8; ++k) {
    const AgentState a = agent_at(Vec3(14 + 0.25 * k, 15, 0), 2.0);
    const Neighborhood n = project_agent(s.cloud, s.index, a, 1.0);
    const Field raw = st.raw_coverage;
    accumulate_coverage(st, n, footprint_weights(n, 2.0), op.mass);
    for (Eigen::Index i = 0; i < 900; ++i) {
      if (st.raw_coverage[i] != raw[i]) {
        EXPECT_LE((s.cloud.position(static_cast<std::size_t>(i)) - n.projected).norm(), 2.0);
      }
    }
    EXPECT_GE(st.coverage.minCoeff(), 0.0);
    EXPECT_NEAR(st.coverage.dot(op.mass), 1.0, 1e-9);
    EXPECT_GE(ergodicity(st), 0.0);
  }
}

TEST(Coverage, EpsilonNonIncreasingWhenFootprintCoversTheDeficit) {
  const Surface s(fixtures::grid(30, 30, 1.0));
  const LaplacianOperator op = build_laplacian(s.cloud);
  const auto target = fixtures::painted_disks(s.cloud, {{Vec3(15, 15, 0), 1.5, 1.0}});
  CoverageState st = make_coverage_state(Eigen::Map<const Field>(target.data(), 900), op.mass, 0.1);
  double prev = ergodicity(st);
  for (int k = 0; k < 20; ++k) {
    const Neighborhood n = project_agent(s.cloud, s.index, agent_at(Vec3(15, 15, 0), 2.5), 1.0);
    const Field raw = st.raw_coverage;
    const Field deficit = st.target - st.coverage;
    accumulate_coverage(st, n, footprint_weights(n, 2.0), op.mass);
    for (Eigen::Index i = 0; i < 900; ++i) {
      if (deficit[i] > 0.0) {
        ASSERT_GT(st.raw_coverage[i], raw[i]);
      }
    }
    const double e = ergodicity(st);
    EXPECT_LE(e, prev + 1e-12);
    prev = e;
  }
  EXPECT_LT(prev, st.target.norm() / st.target.sum());
}

double cubic(const Vec3& x) {
  return 0.3 * x.x() * x.x() * x.x() - 0.2 * x.x() * x.y() * x.y() + 0.1 * x.y() * x.y() * x.y() +
         0.5 * x.x() * x.y() - 0.4 * x.y() * x.y() + 2.0 * x.x() - 1.0;
}
Vec3 cubic_gradient(const Vec3& x) {
  return Vec3(0.9 * x.x() * x.x() - 0.2 * x.y() * x.y() + 0.5 * x.y() + 2.0,
              -0.4 * x.x() * x.y() + 0.3 * x.y() * x.y() + 0.5 * x.x() - 0.8 * x.y(), 0.0);
}

TEST(Gradient, PolynomialOracles) {
  const Surface s(fixtures::grid(20, 20, 1.0));
  const Vec3 c(9.0, 10.0, 0.0);
  const Neighborhood n = project_agent(s.cloud, s.index, agent_at(c, 2.5), 1.0);
  ASSERT_GE(n.indices.size(), 10u);
  std::vector<double> w(n.indices.size());
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.2, 1.0);
  for (double& x : w) x = u(rng);

  Field constant = Field::Constant(400, 3.7), linear(400), cub(400);
  for (std::size_t i = 0; i < 400; ++i) {
    const Vec3 d = s.cloud.position(i) - c;
    linear[static_cast<Eigen::Index>(i)] = 1.5 * d.x() - 0.75 * d.y() + 4.0;
    cub[static_cast<Eigen::Index>(i)] = cubic(d);
  }
  EXPECT_LE(estimate_gradient(constant, s.cloud, n, w).norm(), 1e-10);
  for (int degree : {1, 2, 3}) {
    EXPECT_LE((estimate_gradient(linear, s.cloud, n, w, degree) - Vec3(1.5, -0.75, 0)).norm(), 1e-8);
  }
  EXPECT_LE((estimate_gradient(cub, s.cloud, n, w) - cubic_gradient(Vec3::Zero())).norm(), 1e-6);
  EXPECT_THROW((void)estimate_gradient(cub, s.cloud, n, w, 4), DomainError);
}

TEST(Gradient, DegradesOnSmallNeighborhoods) {
  const Surface s(fixtures::grid(20, 20, 1.0));
  Neighborhood n = project_agent(s.cloud, s.index, agent_at(Vec3(5, 5, 0), 1.0), 1.0);
  ASSERT_LT(n.indices.size(), 10u);
  Field linear(400);
  for (std::size_t i = 0; i < 400; ++i) linear[static_cast<Eigen::Index>(i)] = 2.0 * s.cloud.position(i).y();
  const std::vector<double> w(n.indices.size(), 1.0);
  EXPECT_LE((estimate_gradient(linear, s.cloud, n, w) - Vec3(0, 2, 0)).norm(), 1e-8);
}

TEST(Gradient, ZeroSourceIsAFixedPoint) {
  const Surface s(fixtures::grid(15, 15, 1.0));
  const LaplacianOperator op = build_laplacian(s.cloud);
  const Field u = diffuse_implicit(op, Field::Zero(225), 10.0);
  const Neighborhood n = project_agent(s.cloud, s.index, agent_at(Vec3(7, 7, 0), 2.0), 1.0);
  EXPECT_EQ(estimate_gradient(u, s.cloud, n, footprint_weights(n, 2.0)).norm(), 0.0);
}

TEST(Gradient, PointsTowardPointSource) {
  const double h = 2.0;
  const Surface s(fixtures::grid(30, 30, h));
  const LaplacianOperator op = build_laplacian(s.cloud);
  const std::size_t src = s.index.nearest(Vec3(30, 28, 0));
  Field u0 = Field::Zero(900);
  u0[static_cast<Eigen::Index>(src)] = 1.0;
  const Field u = ImplicitDiffusion(op).diffuse(u0, 10.0 * h * h);
  int checked = 0;
  for (std::size_t i = 0; i < 900; i += 7) {
    const Vec3 x = s.cloud.position(i);
    const Vec3 to_src = s.cloud.position(src) - x;
    if (to_src.norm() < 2.0 * h) continue;
    const Neighborhood n = project_agent(s.cloud, s.index, agent_at(x, 7.5), h);
    const Vec3 g = estimate_gradient(u, s.cloud, n, footprint_weights(n, 2.0));
    EXPECT_GT(g.dot(to_src), 0.0) << x.transpose();
    ++checked;
  }
  EXPECT_GT(checked, 100);
}

TEST(Dynamics, StepAgentExamples) {
  const Surface s(fixtures::grid(40, 40, 1.0));
  AgentState a = agent_at(Vec3(20, 20, 0), 2.5);
  const AgentStep still = step_agent(a, Vec3::Zero(), 0.1, s.cloud, s.index, 1.0);
  EXPECT_LE((still.agent.position - a.position).norm(), 1e-12);
  EXPECT_EQ(still.agent.velocity.norm(), 0.0);
  EXPECT_FALSE(still.clamped);

  const AgentStep kick = step_agent(a, Vec3(100, 0, 0), 0.1, s.cloud, s.index, 1.0);
  EXPECT_NEAR(kick.agent.velocity.norm() / 0.1, 3.0, 1e-12);

  for (int k = 0; k < 30; ++k) {
    a = step_agent(a, Vec3(0.6, 0.8, 0.0) * 50.0, 0.1, s.cloud, s.index, 1.0).agent;
    EXPECT_LE(a.velocity.norm(), a.v_max + 1e-9);
    EXPECT_LE(std::abs(a.position.z()), 1e-9);
  }
  EXPECT_NEAR(a.velocity.norm(), 3.0, 1e-12);
  EXPECT_THROW((void)step_agent(a, Vec3::Zero(), 0.0, s.cloud, s.index, 1.0), DomainError);
}

TEST(Dynamics, LeavingTheSurfaceIsPulledBack) {
  const Surface s(fixtures::grid(10, 10, 1.0));
  AgentState a = agent_at(Vec3(9, 5, 0), 2.5);
  a.velocity = Vec3(3, 0, 0);
  bool clamped = false;
  for (int k = 0; k < 40; ++k) {
    const AgentStep st = step_agent(a, Vec3(3, 0, 0), 1.0, s.cloud, s.index, 1.0);
    clamped = clamped || st.clamped;
    a = st.agent;
    EXPECT_LE((a.position - s.cloud.position(s.index.nearest(a.position))).norm(), a.radius);
  }
  EXPECT_TRUE(clamped);
}

}  // namespace
}  // namespace ergodic
