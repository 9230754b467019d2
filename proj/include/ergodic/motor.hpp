#pragma once

#include "ergodic/multivector.hpp"

#include <Eigen/Geometry>

namespace ergodic::cga {

/// Screw coordinates: angular part omega and linear part v; a point x moves
/// with velocity omega × x + v.
struct Twist {
  Vec3 omega = Vec3::Zero();
  Vec3 v = Vec3::Zero();
};

/// B = -1/2 (wx e23 - wy e13 + wz e12 + vx e1i + vy e2i + vz e3i)
Multivector twist_bivector(const Twist& t);
Multivector twist_bivector(const Vec3& omega, const Vec3& v);
/// Inverse of twist_bivector; other bivector components are ignored.
Twist twist_components(const Multivector& b);

/// Unit revolute screw about `axis` through `point`.
Multivector revolute_screw(const Vec3& axis, const Vec3& point);
/// Unit prismatic screw along `direction`.
Multivector prismatic_screw(const Vec3& direction);

/// exp(B) for a motion bivector, closed form. Throws GeometryError if B has
/// components outside the twist span.
Multivector motor_exp(const Multivector& b);
/// Principal logarithm of a normalized motor; throws at rotation angle pi.
Multivector motor_log(const Multivector& m);

Multivector rotor(const Vec3& axis, double angle);
Multivector translator(const Vec3& t);
Multivector motor_from_pose(const Eigen::Isometry3d& pose);
Eigen::Isometry3d pose_from_motor(const Multivector& m);

/// M M~ = 1 after rescaling; throws if M M~ is not a positive scalar.
Multivector normalize_motor(const Multivector& m);

/// M x M~ on a Euclidean point.
Vec3 apply_motor(const Multivector& m, const Vec3& x);

/// Motor taking the normalized line L1 onto L2 (M L1 M~ = L2). Throws when
/// the lines are anti-parallel.
Multivector motor_between_lines(const Multivector& l1, const Multivector& l2);

}  // namespace ergodic::cga
