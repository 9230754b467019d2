#pragma once

#include "ergodic/motor.hpp"

#include <Eigen/Core>

#include <vector>

namespace ergodic::cga {

/// Serial chain as a product of exponentials: M(q) = exp(q1 B1) ... exp(qN BN) M_base,
/// where the B_i are unit screws in the base frame at q = 0 and M_base is the
/// end-effector motor at q = 0.
struct KinematicChain {
  std::vector<Multivector> screws;
  Multivector base = Multivector::scalar(1.0);

  int joints() const { return static_cast<int>(screws.size()); }
};

/// Validates N >= 1 and grade-2 screws; throws DomainError otherwise.
void validate_chain(const KinematicChain& chain);

Multivector forward_kinematics(const KinematicChain& chain, const Eigen::VectorXd& q);

/// B_i' = (M_1 ... M_{i-1}) B_i (M_1 ... M_{i-1})~, spatial (base) frame.
std::vector<Multivector> geometric_jacobian(const KinematicChain& chain, const Eigen::VectorXd& q);
/// M~(q) B_i' M(q): the same columns in the end-effector frame.
std::vector<Multivector> ee_frame_jacobian(const KinematicChain& chain, const Eigen::VectorXd& q);

/// Modified DH parameters, T_i = RotX(alpha) TransX(a) RotZ(theta + offset) TransZ(d).
struct DhJoint {
  double a = 0.0;
  double d = 0.0;
  double alpha = 0.0;
  double offset = 0.0;
};

/// Homogeneous-matrix forward kinematics for a modified-DH chain with a fixed
/// flange transform appended.
Eigen::Isometry3d dh_forward(const std::vector<DhJoint>& joints, const Eigen::Isometry3d& flange,
                             const Eigen::VectorXd& q);
/// Screw chain equivalent to the DH description.
KinematicChain chain_from_dh(const std::vector<DhJoint>& joints, const Eigen::Isometry3d& flange);

/// 7-joint arm (Franka-style modified DH, millimetres) used as test and demo fixture.
std::vector<DhJoint> panda_dh();
Eigen::Isometry3d panda_flange();
KinematicChain panda_chain();

}  // namespace ergodic::cga
