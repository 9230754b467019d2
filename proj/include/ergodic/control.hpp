#pragma once

#include "ergodic/kinematics.hpp"

#include <Eigen/Core>

#include <array>
#include <utility>
#include <vector>

namespace ergodic::control {

using cga::KinematicChain;
using cga::Multivector;
using Vector6 = Eigen::Matrix<double, 6, 1>;

/// Wrench span blades in listing order: e23, e13, e12, e01, e02, e03
/// (torque x, y, z then force x, y, z).
const std::array<unsigned, 6>& wrench_blades();

/// Coefficients of `w` on the wrench span, in listing order.
Vector6 wrench_coefficients(const Multivector& w);
Multivector wrench_from_coefficients(const Vector6& c);
/// Componentwise scaling of a wrench by a 6-diagonal gain.
Multivector scale_wrench(const Vector6& gain, const Multivector& w);

/// Algebraic twist -> wrench map: rotation blades e23, e13, e12 are kept and
/// each translation blade e_i^einf becomes e0^e_i with the same coefficient, so
/// that V . W = -p with p = |V|^2 / 4 >= 0.
Multivector twist_to_wrench(const Multivector& twist);

struct ControllerGains {
  Vector6 k_line = (Vector6() << 30, 30, 30, 750, 750, 300).finished();
  Vector6 d_twist = (Vector6() << 10, 10, 10, 150, 150, 50).finished();
  Vector6 k_p = Vector6::Constant(0.5);
  Vector6 k_i = Vector6::Constant(5.0);
  Vector6 k_d = Vector6::Constant(0.5);
  double integral_clamp = 10.0;
};

/// Throws DomainError on negative gains or a nonpositive clamp.
void validate_gains(const ControllerGains& gains);

struct WrenchPidState {
  Vector6 integral = Vector6::Zero();
  Vector6 previous_error = Vector6::Zero();
  double dt = 1e-3;
};

/// M(q) (e0 ^ e3 ^ einf) M~(q), normalized.
Multivector end_effector_line(const KinematicChain& chain, const Eigen::VectorXd& q);

/// twist_to_wrench(log(motor_between_lines(L_ee, L_target))).
Multivector line_tracking_wrench(const Multivector& l_ee, const Multivector& l_target);

/// PID on e = w_desired - w_measured; the integral is clamped componentwise.
std::pair<Multivector, WrenchPidState> wrench_pid(const WrenchPidState& state, const Multivector& w_desired,
                                                  const Multivector& w_measured, const ControllerGains& gains);

/// M~ w M, restricted to the wrench span.
Multivector transform_wrench(const Multivector& motor, const Multivector& w);

/// End-effector twist J_ee qdot mapped by twist_to_wrench.
Multivector damping_wrench(const std::vector<Multivector>& j_ee, const Eigen::VectorXd& qdot);

/// tau_i = -<B_i^ee W>_0
Eigen::VectorXd torques_from_wrench(const std::vector<Multivector>& j_ee, const Multivector& w);

struct ControlOutput {
  Eigen::VectorXd torques;
  WrenchPidState pid;
  /// K_line W_L - D W_V + W_C in the end-effector frame.
  Multivector total_wrench;
  Multivector line_wrench;
  Multivector wrench_error;
};

/// Full law tau = -J_ee^T . (K_line W_L - D W_V + W_C). Lines and the measured
/// wrench are given in the base frame; everything is evaluated in the
/// end-effector frame.
ControlOutput control_torques(const KinematicChain& chain, const Eigen::VectorXd& q, const Eigen::VectorXd& qdot,
                              const Multivector& l_target, const Multivector& w_desired,
                              const Multivector& w_measured, const ControllerGains& gains,
                              const WrenchPidState& pid);

struct DemoSample {
  double t = 0.0;
  Eigen::VectorXd q;
  Eigen::VectorXd torques;
  double line_error = 0.0;
  double wrench_error = 0.0;
};

struct DemoConfig {
  int steps = 2000;
  double dt = 0.01;
  /// Non-physical first-order plant: qdot = admittance * tau (rad/s per N mm).
  double admittance = 3e-8;
  double desired_force = 5.0;
  /// Time constant of the synthetic measured-force ramp towards the target.
  double contact_time_constant = 0.05;
};

/// Steps the first-order toy plant on the 7-joint fixture chain towards a line
/// offset from the start pose. For demonstrating the mapping chain only.
std::vector<DemoSample> run_control_demo(const DemoConfig& config, const ControllerGains& gains = {});

}  // namespace ergodic::control
