#pragma once

#include "ergodic/multivector.hpp"

#include <Eigen/Core>

#include <span>
#include <utility>
#include <vector>

namespace ergodic::cga {

/// P = e0 + x + |x|^2/2 einf
Multivector embed_point(const Vec3& x);

/// Euclidean location of a (possibly scaled) conformal point.
/// Throws GeometryError for points at infinity.
Vec3 extract_point(const Multivector& point);

/// Flat point x^einf... written as P ^ einf for a finite point P.
Multivector flat_point(const Vec3& x);

/// Line through two points, normalized so that L^2 = 1 and oriented a -> b.
Multivector line_through(const Vec3& a, const Vec3& b);
/// Line through `point` with direction `direction` (need not be unit).
Multivector line_from_point_direction(const Vec3& point, const Vec3& direction);
/// Scales a line so that L^2 = 1. Throws on degenerate elements.
Multivector normalize_line(const Multivector& line);

enum class PrimitiveKind { kPlane, kSphere };

/// Plane or sphere fitted to a neighborhood.
///
/// `dual` is the IPNS vector X* scaled so that P.X* approximates the signed
/// distance of a point to the surface (unit normal for planes, sphere vector
/// divided by its radius). `element` is the OPNS blade X with X* = X I^-1.
struct Primitive {
  PrimitiveKind kind = PrimitiveKind::kPlane;
  Multivector dual;
  Multivector element;
  /// (P_i . X*)^2 per fitted point; empty for primitives built directly.
  std::vector<double> residuals;
  /// Smallest eigenvector of the 5x5 fitting matrix in the centered/scaled fit
  /// frame, ordered as the fitting weights: (x, y, z, einf-part, e0-part).
  Eigen::Matrix<double, 5, 1> fit_vector = Eigen::Matrix<double, 5, 1>::Zero();
  Vec3 fit_center = Vec3::Zero();
  double fit_scale = 1.0;

  /// Plane: unit normal. Sphere: throws.
  Vec3 normal() const;
  /// Plane: signed offset d in {x : n.x = d}. Sphere: throws.
  double offset() const;
  Vec3 center() const;
  double radius() const;
  /// P.X* for an arbitrary Euclidean point.
  double signed_residual(const Vec3& x) const;
};

Primitive make_plane(const Vec3& normal, double offset);
Primitive make_sphere(const Vec3& center, double radius);
/// Wraps an IPNS vector (plane n + d einf or sphere) as a normalized primitive.
Primitive primitive_from_dual(const Multivector& dual_vector);

/// Least-squares plane/sphere through the points (smallest eigenvector of the
/// 5x5 moment matrix). Needs >= 4 points with a unique minimizer.
Primitive fit_primitive(std::span<const Vec3> points);
/// Same objective restricted to planes (e0 component forced to zero).
Primitive fit_plane(std::span<const Vec3> points);

/// Sum of (P_i . X*)^2 in the fit frame of `fit` for a 5-vector v (any norm).
double fit_objective(std::span<const Vec3> points, const Primitive& fit,
                     const Eigen::Matrix<double, 5, 1>& v);

/// ((P ^ einf) ⌋ X) X^-1: point pair (sphere) or flat point (plane) on X along
/// the line through P orthogonal to X.
Multivector project_to_primitive(const Multivector& point, const Multivector& element);
Multivector project_to_primitive(const Multivector& point, const Primitive& primitive);

/// True when the grade-2 element carries an einf factor (flat point).
bool is_flat_point(const Multivector& pair, double tol = 1e-9);

/// The two factor points of a real point pair, lexicographically ordered by
/// Euclidean coordinates. Throws GeometryError for imaginary pairs.
std::pair<Multivector, Multivector> split_pair_points(const Multivector& pair);

/// Factor of `pair` nearest to `reference`; equidistant factors resolve to the
/// lexicographically smaller coordinate. Flat points return their finite point.
Multivector split_pair(const Multivector& pair, const Multivector& reference);

/// X* ^ P ^ einf, normalized: the line through P orthogonal to X.
Multivector orthogonal_line(const Primitive& primitive, const Multivector& point);

/// L* ^ P ^ einf: the plane through P orthogonal to the direction of L.
Multivector tangent_plane(const Multivector& line, const Multivector& point);

/// Unit normal and offset of an OPNS plane (n.x = d).
std::pair<Vec3, double> plane_parameters(const Multivector& plane);

/// Unit direction and closest-to-origin point of an OPNS line.
std::pair<Vec3, Vec3> line_parameters(const Multivector& line);

}  // namespace ergodic::cga
