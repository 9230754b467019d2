#include "ergodic/kinematics.hpp"

#include "ergodic/errors.hpp"

#include <cmath>
#include <string>

namespace ergodic::cga {

void validate_chain(const KinematicChain& chain) {
  if (chain.screws.empty()) throw DomainError("kinematic chain has no joints");
  for (std::size_t i = 0; i < chain.screws.size(); ++i) {
    if (!chain.screws[i].is_grade(2, 1e-12)) {
      throw DomainError("screw " + std::to_string(i) + " is not a bivector");
    }
  }
}

namespace {

void check_q(const KinematicChain& chain, const Eigen::VectorXd& q) {
  if (q.size() != chain.joints()) {
    throw DomainError("joint vector has " + std::to_string(q.size()) + " entries, chain has " +
                      std::to_string(chain.joints()));
  }
}

}  // namespace

Multivector forward_kinematics(const KinematicChain& chain, const Eigen::VectorXd& q) {
  check_q(chain, q);
  Multivector m = Multivector::scalar(1.0);
  for (int i = 0; i < chain.joints(); ++i) m = m * motor_exp(q[i] * chain.screws[i]);
  return m * chain.base;
}

std::vector<Multivector> geometric_jacobian(const KinematicChain& chain, const Eigen::VectorXd& q) {
  check_q(chain, q);
  std::vector<Multivector> cols;
  cols.reserve(chain.screws.size());
  Multivector prefix = Multivector::scalar(1.0);
  for (int i = 0; i < chain.joints(); ++i) {
    cols.push_back(sandwich(prefix, chain.screws[i]).grade(2));
    prefix = prefix * motor_exp(q[i] * chain.screws[i]);
  }
  return cols;
}

std::vector<Multivector> ee_frame_jacobian(const KinematicChain& chain, const Eigen::VectorXd& q) {
  const Multivector m = forward_kinematics(chain, q);
  const Multivector mr = m.reverse();
  std::vector<Multivector> cols = geometric_jacobian(chain, q);
  for (Multivector& c : cols) c = sandwich(mr, c).grade(2);
  return cols;
}

namespace {

Eigen::Isometry3d dh_transform(const DhJoint& j, double theta) {
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.rotate(Eigen::AngleAxisd(j.alpha, Vec3::UnitX()));
  t.translate(Vec3(j.a, 0.0, 0.0));
  t.rotate(Eigen::AngleAxisd(theta + j.offset, Vec3::UnitZ()));
  t.translate(Vec3(0.0, 0.0, j.d));
  return t;
}

}  // namespace

Eigen::Isometry3d dh_forward(const std::vector<DhJoint>& joints, const Eigen::Isometry3d& flange,
                             const Eigen::VectorXd& q) {
  if (q.size() != static_cast<Eigen::Index>(joints.size())) {
    throw DomainError("joint vector length does not match DH table");
  }
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  for (std::size_t i = 0; i < joints.size(); ++i) t = t * dh_transform(joints[i], q[i]);
  return t * flange;
}

KinematicChain chain_from_dh(const std::vector<DhJoint>& joints, const Eigen::Isometry3d& flange) {
  KinematicChain chain;
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  for (const DhJoint& j : joints) {
    t = t * dh_transform(j, 0.0);
    // Joint i rotates about the z-axis of its own frame.
    chain.screws.push_back(revolute_screw(t.linear().col(2), t.translation()));
  }
  chain.base = motor_from_pose(t * flange);
  return chain;
}

std::vector<DhJoint> panda_dh() {
  const double h = M_PI / 2.0;
  return {
      {0.0, 333.0, 0.0, 0.0},  {0.0, 0.0, -h, 0.0},     {0.0, 316.0, h, 0.0},
      {82.5, 0.0, h, 0.0},     {-82.5, 384.0, -h, 0.0}, {0.0, 0.0, h, 0.0},
      {88.0, 0.0, h, 0.0},
  };
}

Eigen::Isometry3d panda_flange() {
  Eigen::Isometry3d f = Eigen::Isometry3d::Identity();
  f.translate(Vec3(0.0, 0.0, 107.0));
  return f;
}

KinematicChain panda_chain() { return chain_from_dh(panda_dh(), panda_flange()); }

}  // namespace ergodic::cga
