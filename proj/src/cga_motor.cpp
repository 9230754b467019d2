#include "ergodic/motor.hpp"

#include "ergodic/cga.hpp"
#include "ergodic/errors.hpp"

#include <cmath>

namespace ergodic::cga {

using namespace blades;

Multivector twist_bivector(const Vec3& w, const Vec3& v) {
  Multivector b;
  b += Multivector::blade(kE2 | kE3, w.x());
  b += Multivector::blade(kE1 | kE3, -w.y());
  b += Multivector::blade(kE1 | kE2, w.z());
  b += Multivector::blade(kE1 | kEinf, v.x());
  b += Multivector::blade(kE2 | kEinf, v.y());
  b += Multivector::blade(kE3 | kEinf, v.z());
  return -0.5 * b;
}

Multivector twist_bivector(const Twist& t) { return twist_bivector(t.omega, t.v); }

Twist twist_components(const Multivector& b) {
  Twist t;
  t.omega = -2.0 * Vec3(b[kE2 | kE3], -b[kE1 | kE3], b[kE1 | kE2]);
  t.v = -2.0 * Vec3(b[kE1 | kEinf], b[kE2 | kEinf], b[kE3 | kEinf]);
  return t;
}

Multivector revolute_screw(const Vec3& axis, const Vec3& point) {
  const Vec3 w = axis.normalized();
  return twist_bivector(w, point.cross(w));
}

Multivector prismatic_screw(const Vec3& direction) {
  return twist_bivector(Vec3::Zero(), direction.normalized());
}

Multivector rotor(const Vec3& axis, double angle) {
  const double len = axis.norm();
  if (!(len > 0.0)) {
    if (angle == 0.0) return Multivector::scalar(1.0);
    throw GeometryError("rotor: zero axis");
  }
  const Vec3 n = axis / len;
  const double s = std::sin(0.5 * angle);
  Multivector r = Multivector::scalar(std::cos(0.5 * angle));
  r -= Multivector::blade(kE2 | kE3, s * n.x());
  r += Multivector::blade(kE1 | kE3, s * n.y());
  r -= Multivector::blade(kE1 | kE2, s * n.z());
  return r;
}

Multivector translator(const Vec3& t) {
  return Multivector::scalar(1.0) - 0.5 * (Multivector::vector(t) * Multivector::einf());
}

namespace {

void check_motion_bivector(const Multivector& b) {
  const double scale = std::max(1.0, b.max_abs());
  if (!b.is_grade(2, 1e-12 * scale)) throw GeometryError("motor_exp: argument is not a bivector");
  for (unsigned m : {kE0 | kE1, kE0 | kE2, kE0 | kE3, kE0 | kEinf}) {
    if (std::abs(b[m]) > 1e-12 * scale) {
      throw GeometryError("motor_exp: bivector does not generate a rigid motion");
    }
  }
}

}  // namespace

Multivector motor_exp(const Multivector& b) {
  check_motion_bivector(b);
  const Twist tw = twist_components(b);
  const Vec3& w = tw.omega;
  const double th = w.norm();
  double a;  // (1 - cos th) / th^2
  double c;  // (th - sin th) / th^3
  if (th < 1e-4) {
    const double t2 = th * th;
    a = 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
    c = 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0;
  } else {
    a = (1.0 - std::cos(th)) / (th * th);
    c = (th - std::sin(th)) / (th * th * th);
  }
  const Vec3 p = tw.v + a * w.cross(tw.v) + c * w.cross(w.cross(tw.v));
  const Multivector r = th > 0.0 ? rotor(w / th, th) : Multivector::scalar(1.0);
  return translator(p) * r;
}

Multivector motor_log(const Multivector& m_in) {
  Multivector m = m_in;
  if (m.scalar_part() < 0.0) m = -m;
  // Rotor part: the einf-free components.
  Multivector r = Multivector::scalar(m.scalar_part());
  for (unsigned mask : {kE1 | kE2, kE1 | kE3, kE2 | kE3}) r += Multivector::blade(mask, m[mask]);
  const Vec3 sn(-r[kE2 | kE3], r[kE1 | kE3], -r[kE1 | kE2]);  // sin(th/2) n
  const double s = sn.norm();
  const double c = r.scalar_part();
  const double th = 2.0 * std::atan2(s, c);
  if (th >= M_PI - 1e-9) throw GeometryError("motor_log: rotation angle pi has no unique logarithm");
  const Vec3 w = s > 0.0 ? Vec3(sn * (th / s)) : Vec3::Zero();
  const Multivector t = m * r.reverse();
  const Vec3 p = -2.0 * Vec3(t[kE1 | kEinf], t[kE2 | kEinf], t[kE3 | kEinf]);
  double k;  // (1 - (th/2) cot(th/2)) / th^2
  if (th < 1e-4) {
    k = 1.0 / 12.0 + th * th / 720.0;
  } else {
    k = (1.0 - 0.5 * th / std::tan(0.5 * th)) / (th * th);
  }
  const Vec3 v = p - 0.5 * w.cross(p) + k * w.cross(w.cross(p));
  return twist_bivector(w, v);
}

Multivector motor_from_pose(const Eigen::Isometry3d& pose) {
  const Eigen::Quaterniond q(pose.rotation());
  Multivector r = Multivector::scalar(q.w());
  r -= Multivector::blade(kE2 | kE3, q.x());
  r += Multivector::blade(kE1 | kE3, q.y());
  r -= Multivector::blade(kE1 | kE2, q.z());
  return translator(pose.translation()) * (r / q.norm());
}

Vec3 apply_motor(const Multivector& m, const Vec3& x) {
  return extract_point(sandwich(m, embed_point(x)));
}

Eigen::Isometry3d pose_from_motor(const Multivector& m) {
  Multivector r = Multivector::scalar(m.scalar_part());
  for (unsigned mask : {kE1 | kE2, kE1 | kE3, kE2 | kE3}) r += Multivector::blade(mask, m[mask]);
  const double rr = (r * r.reverse()).scalar_part();
  if (!(rr > 0.0)) throw GeometryError("pose_from_motor: not a motor");
  r = r / std::sqrt(rr);
  const Eigen::Quaterniond quat(r.scalar_part(), -r[kE2 | kE3], r[kE1 | kE3], -r[kE1 | kE2]);
  const Multivector t = m * r.reverse() / std::sqrt(rr);
  Eigen::Isometry3d pose = Eigen::Isometry3d::Identity();
  pose.linear() = quat.toRotationMatrix();
  pose.translation() = -2.0 * Vec3(t[kE1 | kEinf], t[kE2 | kEinf], t[kE3 | kEinf]);
  return pose;
}

Multivector normalize_motor(const Multivector& m) {
  const double s = (m * m.reverse()).scalar_part();
  if (!(s > 0.0)) throw GeometryError("normalize_motor: not a motor");
  return m / std::sqrt(s);
}

Multivector motor_between_lines(const Multivector& l1, const Multivector& l2) {
  const Multivector k = Multivector::scalar(1.0) + l2 * l1;
  const Multivector kk = k * k.reverse();
  const double alpha = kk.scalar_part();
  if (!(alpha > 1e-10)) throw GeometryError("motor_between_lines: anti-parallel lines");
  const Multivector q = kk.grade(4);
  // (alpha + Q)^(-1/2) with Q^2 = 0.
  const Multivector inv_sqrt = (Multivector::scalar(1.0) - q / (2.0 * alpha)) / std::sqrt(alpha);
  return k * inv_sqrt;
}

}  // namespace ergodic::cga
