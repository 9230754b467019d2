#pragma once

#include "ergodic/cga.hpp"
#include "ergodic/kdtree.hpp"
#include "ergodic/spectral.hpp"

#include <Eigen/Core>

#include <vector>

namespace ergodic {

struct AgentState {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  double radius = 7.5;
  double v_max = 3.0;
  double a_max = 3.0;
};

/// Local surface patch around the agent.
struct Neighborhood {
  /// Cloud indices used for the fit (within r_a, or 3h when r_a is too sparse).
  std::vector<std::size_t> indices;
  /// Positions into `indices` of the points within r_a of the projected agent.
  std::vector<std::size_t> footprint;
  cga::Primitive primitive;
  Vec3 projected = Vec3::Zero();
  /// Unit surface normal at `projected`.
  Vec3 normal = Vec3::UnitZ();
  std::vector<double> residuals;
  std::vector<double> normalized;
};

/// Fits a plane/sphere to the points near the agent and drops the agent onto it.
/// Throws LostAgentError when fewer than four points lie within max(r_a, 3h).
Neighborhood project_agent(const PointCloud& cloud, const KdTree& index, const AgentState& agent,
                           double spacing);

/// exp(-epsilon^2 r_i^2) for every fitted point.
std::vector<double> footprint_weights(const Neighborhood& nbh, double epsilon);

struct CoverageState {
  Field target;
  Field raw_coverage;
  Field coverage;
  Field source;
  long step = 0;
  double dt = 0.1;
};

/// Normalizes the target so that sum M_ii p_i = 1 and zeroes the coverage.
CoverageState make_coverage_state(const Field& target, const Eigen::VectorXd& mass, double dt);

/// c~_i += w_i dt over the footprint, then c = c~ / sum M_jj c~_j.
void accumulate_coverage(CoverageState& state, const Neighborhood& nbh, const std::vector<double>& weights,
                         const Eigen::VectorXd& mass);

/// s_i = max(p_i - c_i, 0)^2; also stored in state.source.
Field source_term(CoverageState& state);

/// ||max(p - c, 0)||_2 / sum p
double ergodicity(const CoverageState& state);

/// Weighted least-squares polynomial fit of u over the neighborhood in the
/// tangent plane at the projected agent; returns the tangent gradient.
/// The degree drops from `max_degree` (<= 3) when there are too few points or
/// the design is rank deficient; throws GeometryError if even degree 1 fails.
Vec3 estimate_gradient(const Field& u, const PointCloud& cloud, const Neighborhood& nbh,
                       const std::vector<double>& weights, int max_degree = 3);

struct AgentStep {
  AgentState agent;
  Neighborhood neighborhood;
  /// True when the step left the sampled surface and was pulled back.
  bool clamped = false;
};

/// Semi-implicit Euler step with acceleration and speed limits, followed by
/// re-projection onto the surface and tangent projection of the velocity.
/// Positions that leave the sampled region by more than h are pulled back to
/// the nearest point and the outward velocity component is removed.
AgentStep step_agent(const AgentState& agent, const Vec3& acceleration, double dt, const PointCloud& cloud,
                     const KdTree& index, double spacing);

}  // namespace ergodic
