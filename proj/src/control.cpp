#include "ergodic/control.hpp"

#include "ergodic/cga.hpp"
#include "ergodic/errors.hpp"

#include <cmath>

namespace ergodic::control {

using namespace cga::blades;

const std::array<unsigned, 6>& wrench_blades() {
  static const std::array<unsigned, 6> kBlades = {kE2 | kE3, kE1 | kE3, kE1 | kE2,
                                                  kE0 | kE1, kE0 | kE2, kE0 | kE3};
  return kBlades;
}

Vector6 wrench_coefficients(const Multivector& w) {
  Vector6 c;
  for (int k = 0; k < 6; ++k) c[k] = w[wrench_blades()[static_cast<std::size_t>(k)]];
  return c;
}

Multivector wrench_from_coefficients(const Vector6& c) {
  Multivector w;
  for (int k = 0; k < 6; ++k) w.set(wrench_blades()[static_cast<std::size_t>(k)], c[k]);
  return w;
}

Multivector scale_wrench(const Vector6& gain, const Multivector& w) {
  return wrench_from_coefficients(gain.cwiseProduct(wrench_coefficients(w)));
}

Multivector twist_to_wrench(const Multivector& twist) {
  Vector6 c;
  c << twist[kE2 | kE3], twist[kE1 | kE3], twist[kE1 | kE2], twist[kE1 | kEinf], twist[kE2 | kEinf],
      twist[kE3 | kEinf];
  return wrench_from_coefficients(c);
}

void validate_gains(const ControllerGains& g) {
  const auto nonneg = [](const Vector6& v) { return (v.array() >= 0.0).all() && v.allFinite(); };
  if (!nonneg(g.k_line) || !nonneg(g.d_twist) || !nonneg(g.k_p) || !nonneg(g.k_i) || !nonneg(g.k_d)) {
    throw DomainError("controller gains must be finite and nonnegative");
  }
  if (!(g.integral_clamp > 0.0)) throw DomainError("integral clamp must be positive");
}

Multivector end_effector_line(const KinematicChain& chain, const Eigen::VectorXd& q) {
  const Multivector m = cga::forward_kinematics(chain, q);
  const Multivector z_axis = Multivector::blade(kE0 | kE3 | kEinf);
  return cga::normalize_line(cga::sandwich(m, z_axis));
}

Multivector line_tracking_wrench(const Multivector& l_ee, const Multivector& l_target) {
  const Multivector motor = cga::motor_between_lines(l_ee, l_target);
  return twist_to_wrench(cga::motor_log(motor));
}

std::pair<Multivector, WrenchPidState> wrench_pid(const WrenchPidState& state, const Multivector& w_desired,
                                                  const Multivector& w_measured, const ControllerGains& gains) {
  if (!(state.dt > 0.0)) throw DomainError("wrench_pid needs dt > 0");
  const Vector6 e = wrench_coefficients(w_desired) - wrench_coefficients(w_measured);
  WrenchPidState next = state;
  next.integral = (state.integral + e * state.dt)
                      .cwiseMax(-gains.integral_clamp)
                      .cwiseMin(gains.integral_clamp);
  const Vector6 derivative = (e - state.previous_error) / state.dt;
  next.previous_error = e;
  const Vector6 out =
      gains.k_p.cwiseProduct(e) + gains.k_i.cwiseProduct(next.integral) + gains.k_d.cwiseProduct(derivative);
  return {wrench_from_coefficients(out), next};
}

Multivector transform_wrench(const Multivector& motor, const Multivector& w) {
  const Multivector moved = motor.reverse() * w * motor;
  return wrench_from_coefficients(wrench_coefficients(moved));
}

Multivector damping_wrench(const std::vector<Multivector>& j_ee, const Eigen::VectorXd& qdot) {
  if (static_cast<Eigen::Index>(j_ee.size()) != qdot.size()) {
    throw DomainError("damping_wrench: Jacobian and qdot lengths differ");
  }
  Multivector twist;
  for (std::size_t i = 0; i < j_ee.size(); ++i) twist += j_ee[i] * qdot[static_cast<Eigen::Index>(i)];
  return twist_to_wrench(twist);
}

Eigen::VectorXd torques_from_wrench(const std::vector<Multivector>& j_ee, const Multivector& w) {
  Eigen::VectorXd tau(static_cast<Eigen::Index>(j_ee.size()));
  for (std::size_t i = 0; i < j_ee.size(); ++i) {
    tau[static_cast<Eigen::Index>(i)] = -cga::scalar_product(j_ee[i], w);
  }
  return tau;
}

ControlOutput control_torques(const KinematicChain& chain, const Eigen::VectorXd& q, const Eigen::VectorXd& qdot,
                              const Multivector& l_target, const Multivector& w_desired,
                              const Multivector& w_measured, const ControllerGains& gains,
                              const WrenchPidState& pid) {
  validate_gains(gains);
  if (q.size() != chain.joints() || qdot.size() != chain.joints()) {
    throw DomainError("control_torques: q and qdot must have one entry per joint");
  }
  const Multivector m = cga::forward_kinematics(chain, q);
  const std::vector<Multivector> j_ee = cga::ee_frame_jacobian(chain, q);

  const Multivector l_ee = cga::normalize_line(cga::sandwich(m, Multivector::blade(kE0 | kE3 | kEinf)));
  ControlOutput out;
  const Multivector twist = cga::motor_log(cga::motor_between_lines(l_ee, l_target));
  out.line_wrench = twist_to_wrench((m.reverse() * twist * m).grade(2));
  const Multivector w_damp = damping_wrench(j_ee, qdot);
  const Multivector w_meas_ee = transform_wrench(m, w_measured);
  auto [w_c, next] = wrench_pid(pid, w_desired, w_meas_ee, gains);
  out.wrench_error = w_desired - w_meas_ee;
  out.total_wrench = scale_wrench(gains.k_line, out.line_wrench) - scale_wrench(gains.d_twist, w_damp) + w_c;
  out.torques = torques_from_wrench(j_ee, out.total_wrench);
  out.pid = next;
  return out;
}

std::vector<DemoSample> run_control_demo(const DemoConfig& config, const ControllerGains& gains) {
  if (config.steps < 1 || !(config.dt > 0.0) || !(config.admittance > 0.0) ||
      !(config.contact_time_constant > 0.0)) {
    throw DomainError("control demo: steps, dt, admittance and time constant must be positive");
  }
  const KinematicChain chain = cga::panda_chain();
  Eigen::VectorXd q(7);
  q << 0.0, -0.4, 0.0, -2.2, 0.0, 1.9, 0.8;
  Eigen::VectorXd qdot = Eigen::VectorXd::Zero(7);

  // Target: the start line tilted by 0.15 rad about the base y-axis and shifted 20 mm along x.
  const Multivector start = end_effector_line(chain, q);
  const Multivector offset = cga::translator(cga::Vec3(20.0, 0.0, 0.0)) * cga::rotor(cga::Vec3::UnitY(), 0.15);
  const Multivector target = cga::normalize_line(cga::sandwich(offset, start));

  const Multivector w_desired = Multivector::blade(kE0 | kE3, config.desired_force);
  WrenchPidState pid;
  pid.dt = config.dt;
  std::vector<DemoSample> samples;
  samples.reserve(static_cast<std::size_t>(config.steps));
  for (int k = 0; k < config.steps; ++k) {
    const double t = k * config.dt;
    // Synthetic sensor: the measured force ramps towards the desired one.
    const Multivector m = cga::forward_kinematics(chain, q);
    const double ramp = 1.0 - std::exp(-t / config.contact_time_constant);
    const Multivector w_measured = transform_wrench(m.reverse(), w_desired * ramp);

    const ControlOutput out = control_torques(chain, q, qdot, target, w_desired, w_measured, gains, pid);
    DemoSample s;
    s.t = t;
    s.q = q;
    s.torques = out.torques;
    s.line_error = wrench_coefficients(out.line_wrench).norm();
    s.wrench_error = wrench_coefficients(out.wrench_error).norm();
    samples.push_back(std::move(s));

    pid = out.pid;
    qdot = config.admittance * out.torques;
    q += qdot * config.dt;
  }
  return samples;
}

}  // namespace ergodic::control
