#include "ergodic/coverage.hpp"

#include "ergodic/errors.hpp"

#include <Eigen/Geometry>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>

namespace ergodic {

namespace {

constexpr double kFlatResidual = 1e-9;

Vec3 surface_normal(const cga::Primitive& prim, const Vec3& x) {
  if (prim.kind == cga::PrimitiveKind::kPlane) return prim.normal();
  const Vec3 radial = x - prim.center();
  if (!(radial.norm() > 0.0)) throw GeometryError("surface normal undefined at the sphere center");
  return radial.normalized();
}

/// Orthonormal tangent pair for a unit normal, chosen deterministically.
std::pair<Vec3, Vec3> tangent_basis(const Vec3& n) {
  Eigen::Index axis = 0;
  n.cwiseAbs().minCoeff(&axis);
  const Vec3 e = Vec3::Unit(axis);
  const Vec3 t1 = (e - e.dot(n) * n).normalized();
  return {t1, n.cross(t1)};
}

int monomial_count(int degree) { return (degree + 1) * (degree + 2) / 2; }

}  // namespace

Neighborhood project_agent(const PointCloud& cloud, const KdTree& index, const AgentState& agent,
                           double spacing) {
  if (!(agent.radius > 0.0)) throw DomainError("agent radius must be positive");
  Neighborhood nbh;
  std::vector<Vec3> pts;
  const double widest = std::max(agent.radius, 3.0 * spacing);
  for (double r = agent.radius;; r = std::min(r + spacing, widest)) {
    nbh.indices = index.radius_neighbors(agent.position, r);
    pts.clear();
    for (std::size_t i : nbh.indices) pts.push_back(cloud.position(i));
    const bool last = r >= widest;
    if (pts.size() < 4) {
      if (last) throw LostAgentError("fewer than 4 surface points near the agent");
      continue;
    }
    try {
      nbh.primitive = cga::fit_primitive(pts);
      break;
    } catch (const GeometryError&) {
    }
    try {
      // Ambiguous fit (e.g. four cocircular points): plane.
      nbh.primitive = cga::fit_plane(pts);
      break;
    } catch (const GeometryError&) {
      if (last) throw;
    }
  }
  const cga::Multivector p = cga::embed_point(agent.position);
  const cga::Multivector pair = cga::project_to_primitive(p, nbh.primitive);
  nbh.projected = cga::extract_point(cga::split_pair(pair, p));
  nbh.normal = surface_normal(nbh.primitive, nbh.projected);

  for (std::size_t k = 0; k < pts.size(); ++k) {
    if ((pts[k] - nbh.projected).norm() <= agent.radius) nbh.footprint.push_back(k);
  }

  nbh.residuals = nbh.primitive.residuals;
  const double emax = *std::max_element(nbh.residuals.begin(), nbh.residuals.end());
  const double flat = kFlatResidual * agent.radius;
  nbh.normalized.assign(nbh.residuals.size(), 0.0);
  if (emax > flat * flat) {
    for (std::size_t k = 0; k < nbh.residuals.size(); ++k) nbh.normalized[k] = nbh.residuals[k] / emax;
  }
  return nbh;
}

std::vector<double> footprint_weights(const Neighborhood& nbh, double epsilon) {
  if (!(epsilon > 0.0)) throw DomainError("footprint epsilon must be positive");
  std::vector<double> w(nbh.normalized.size());
  for (std::size_t k = 0; k < w.size(); ++k) {
    const double r = nbh.normalized[k];
    w[k] = std::exp(-epsilon * epsilon * r * r);
  }
  return w;
}

CoverageState make_coverage_state(const Field& target, const Eigen::VectorXd& mass, double dt) {
  if (target.size() != mass.size()) throw DomainError("target and mass lengths differ");
  if (!(dt > 0.0)) throw DomainError("coverage dt must be positive");
  if (!target.allFinite() || (target.array() < 0.0).any()) {
    throw DomainError("target masses must be finite and nonnegative");
  }
  const double total = target.dot(mass);
  if (!(total > 0.0)) throw DomainError("target has no mass");
  CoverageState s;
  s.target = target / total;
  s.raw_coverage = Field::Zero(target.size());
  s.coverage = Field::Zero(target.size());
  s.source = Field::Zero(target.size());
  s.dt = dt;
  return s;
}

void accumulate_coverage(CoverageState& state, const Neighborhood& nbh, const std::vector<double>& weights,
                         const Eigen::VectorXd& mass) {
  if (weights.size() != nbh.indices.size()) throw DomainError("one weight per neighborhood point expected");
  for (std::size_t k : nbh.footprint) {
    state.raw_coverage[static_cast<Eigen::Index>(nbh.indices[k])] += weights[k] * state.dt;
  }
  const double total = state.raw_coverage.dot(mass);
  if (total > 0.0) state.coverage = state.raw_coverage / total;
  ++state.step;
}

Field source_term(CoverageState& state) {
  state.source = (state.target - state.coverage).cwiseMax(0.0).array().square().matrix();
  return state.source;
}

double ergodicity(const CoverageState& state) {
  const double total = state.target.sum();
  if (!(total > 0.0)) throw DomainError("ergodicity needs a target with positive mass");
  return (state.target - state.coverage).cwiseMax(0.0).norm() / total;
}

Vec3 estimate_gradient(const Field& u, const PointCloud& cloud, const Neighborhood& nbh,
                       const std::vector<double>& weights, int max_degree) {
  if (u.size() != static_cast<Eigen::Index>(cloud.size())) throw DomainError("field length differs from cloud");
  if (weights.size() != nbh.indices.size()) throw DomainError("one weight per neighborhood point expected");
  if (max_degree < 1 || max_degree > 3) throw DomainError("gradient degree must be 1, 2 or 3");

  const cga::Multivector p = cga::embed_point(nbh.projected);
  const cga::Multivector plane = cga::tangent_plane(cga::orthogonal_line(nbh.primitive, p), p);
  const Vec3 n = cga::plane_parameters(plane).first;
  const auto [t1, t2] = tangent_basis(n);

  const Eigen::Index m = static_cast<Eigen::Index>(nbh.indices.size());
  Eigen::MatrixX2d xy(m, 2);
  for (Eigen::Index k = 0; k < m; ++k) {
    const Vec3 d = cloud.position(nbh.indices[static_cast<std::size_t>(k)]) - nbh.projected;
    xy(k, 0) = d.dot(t1);
    xy(k, 1) = d.dot(t2);
  }
  const double scale = xy.rowwise().norm().maxCoeff();
  if (!(scale > 0.0)) throw GeometryError("gradient neighborhood collapses to a point");
  xy /= scale;

  for (int degree = max_degree; degree >= 1; --degree) {
    const int cols = monomial_count(degree);
    if (m < cols) continue;
    Eigen::MatrixXd a(m, cols);
    Eigen::VectorXd b(m);
    for (Eigen::Index k = 0; k < m; ++k) {
      const double sw = std::sqrt(weights[static_cast<std::size_t>(k)]);
      const double x = xy(k, 0);
      const double y = xy(k, 1);
      int c = 0;
      for (int total = 0; total <= degree; ++total) {
        for (int j = 0; j <= total; ++j) a(k, c++) = sw * std::pow(x, total - j) * std::pow(y, j);
      }
      b[k] = sw * u[static_cast<Eigen::Index>(nbh.indices[static_cast<std::size_t>(k)])];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    qr.setThreshold(1e-10);
    if (qr.rank() < cols) continue;
    const Eigen::VectorXd coef = qr.solve(b);
    return (coef[1] * t1 + coef[2] * t2) / scale;
  }
  throw GeometryError("gradient fit is rank deficient even at degree 1");
}

AgentStep step_agent(const AgentState& agent, const Vec3& acceleration, double dt, const PointCloud& cloud,
                     const KdTree& index, double spacing) {
  if (!(dt > 0.0)) throw DomainError("step dt must be positive");
  Vec3 a = acceleration;
  if (a.norm() > agent.a_max) a *= agent.a_max / a.norm();

  AgentStep out;
  out.agent = agent;
  Vec3 v = agent.velocity + a * dt;
  if (v.norm() > agent.v_max) v *= agent.v_max / v.norm();
  Vec3 x = agent.position + v * dt;

  const Vec3 nearest = cloud.position(index.nearest(x));
  const double gap = (x - nearest).norm();
  if (gap > spacing) {
    const Vec3 outward = (x - nearest) / gap;
    v -= std::max(v.dot(outward), 0.0) * outward;
    x = nearest;
    out.clamped = true;
  }
  out.agent.position = x;
  out.neighborhood = project_agent(cloud, index, out.agent, spacing);
  const Vec3& n = out.neighborhood.normal;
  out.agent.position = out.neighborhood.projected;
  out.agent.velocity = v - v.dot(n) * n;
  return out;
}

}  // namespace ergodic
