#include "ergodic/cga.hpp"

#include "ergodic/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace ergodic::cga {

using namespace blades;
using Vec5 = Eigen::Matrix<double, 5, 1>;
using Mat5 = Eigen::Matrix<double, 5, 5>;

Multivector embed_point(const Vec3& x) {
  Multivector p = Multivector::vector(x);
  p += Multivector::blade(kE0);
  p += Multivector::blade(kEinf, 0.5 * x.squaredNorm());
  return p;
}

Vec3 extract_point(const Multivector& point) {
  const double w = point[kE0];
  const double scale = std::max({std::abs(point[kE1]), std::abs(point[kE2]), std::abs(point[kE3]),
                                 std::abs(point[kEinf]), std::abs(w)});
  if (!(std::abs(w) > 1e-12 * scale) || scale == 0.0) {
    throw GeometryError("extract_point: point at infinity");
  }
  return Vec3(point[kE1], point[kE2], point[kE3]) / w;
}

Multivector flat_point(const Vec3& x) { return embed_point(x) ^ Multivector::einf(); }

Multivector normalize_line(const Multivector& line) {
  const double sq = (line * line).scalar_part();
  const double scale = line.max_abs();
  if (!(scale > 0.0) || !(sq > 1e-20 * scale * scale)) {
    throw GeometryError("degenerate line element");
  }
  return line / std::sqrt(sq);
}

Multivector line_through(const Vec3& a, const Vec3& b) {
  return normalize_line(embed_point(a) ^ embed_point(b) ^ Multivector::einf());
}

Multivector line_from_point_direction(const Vec3& point, const Vec3& direction) {
  return normalize_line(embed_point(point) ^ Multivector::vector(direction) ^ Multivector::einf());
}

std::pair<Vec3, Vec3> line_parameters(const Multivector& line) {
  const Vec3 d(line[kE0 | kE1 | kEinf], line[kE0 | kE2 | kEinf], line[kE0 | kE3 | kEinf]);
  const double n2 = d.squaredNorm();
  if (!(n2 > 0.0)) throw GeometryError("line_parameters: element has no direction");
  // Moment x ^ d read as the cross product x × d.
  const Vec3 m(line[kE2 | kE3 | kEinf], -line[kE1 | kE3 | kEinf], line[kE1 | kE2 | kEinf]);
  const Vec3 closest = d.cross(m) / n2;
  return {d / std::sqrt(n2), closest};
}

std::pair<Vec3, double> plane_parameters(const Multivector& plane) {
  const Multivector s = plane.dual();
  const Vec3 n(s[kE1], s[kE2], s[kE3]);
  const double len = n.norm();
  const double scale = s.max_abs();
  if (!(len > 1e-12 * scale) || scale == 0.0 || std::abs(s[kE0]) > 1e-9 * scale) {
    throw GeometryError("plane_parameters: element is not a plane");
  }
  return {n / len, s[kEinf] / len};
}

// ---------------------------------------------------------------------------
// Primitives

Vec3 Primitive::normal() const {
  if (kind != PrimitiveKind::kPlane) throw GeometryError("normal() requested on a sphere");
  return Vec3(dual[kE1], dual[kE2], dual[kE3]);
}

double Primitive::offset() const {
  if (kind != PrimitiveKind::kPlane) throw GeometryError("offset() requested on a sphere");
  return dual[kEinf];
}

Vec3 Primitive::center() const {
  if (kind != PrimitiveKind::kSphere) throw GeometryError("center() requested on a plane");
  return Vec3(dual[kE1], dual[kE2], dual[kE3]) / dual[kE0];
}

double Primitive::radius() const {
  if (kind != PrimitiveKind::kSphere) throw GeometryError("radius() requested on a plane");
  return 1.0 / dual[kE0];
}

double Primitive::signed_residual(const Vec3& x) const {
  return scalar_product(embed_point(x), dual);
}

namespace {

Primitive finish_primitive(PrimitiveKind kind, Multivector dual) {
  Primitive p;
  p.kind = kind;
  p.dual = std::move(dual);
  p.element = p.dual.undual();
  return p;
}

}  // namespace

Primitive make_plane(const Vec3& normal, double offset) {
  const double len = normal.norm();
  if (!(len > 0.0)) throw GeometryError("make_plane: zero normal");
  return finish_primitive(PrimitiveKind::kPlane,
                          Multivector::vector(normal / len) + Multivector::blade(kEinf, offset / len));
}

Primitive make_sphere(const Vec3& center, double radius) {
  if (!(radius > 0.0)) throw GeometryError("make_sphere: radius must be positive");
  Multivector s = embed_point(center) - Multivector::blade(kEinf, 0.5 * radius * radius);
  return finish_primitive(PrimitiveKind::kSphere, s / radius);
}

Primitive primitive_from_dual(const Multivector& v) {
  const double s0 = v[kE0];
  const Vec3 s(v[kE1], v[kE2], v[kE3]);
  const double sinf = v[kEinf];
  const double scale = std::max({std::abs(s0), s.cwiseAbs().maxCoeff(), std::abs(sinf)});
  if (!(scale > 0.0)) throw GeometryError("primitive_from_dual: zero vector");
  if (std::abs(s0) <= 1e-12 * scale) {
    if (!(s.norm() > 0.0)) throw GeometryError("primitive_from_dual: degenerate plane");
    return make_plane(s, sinf);
  }
  const Vec3 c = s / s0;
  const double rho = sinf / s0;
  const double r2 = c.squaredNorm() - 2.0 * rho;
  if (!(r2 > 0.0)) throw GeometryError("primitive_from_dual: imaginary sphere");
  return make_sphere(c, std::sqrt(r2));
}

namespace {

struct FitFrame {
  Vec3 center = Vec3::Zero();
  double scale = 1.0;
  Mat5 moments = Mat5::Zero();
};

Vec5 fit_weights(const Vec3& x) {
  Vec5 w;
  w << x.x(), x.y(), x.z(), -1.0, -0.5 * x.squaredNorm();
  return w;
}

FitFrame fit_frame(std::span<const Vec3> points) {
  if (points.size() < 4) throw GeometryError("fit needs at least 4 points");
  FitFrame f;
  for (const Vec3& p : points) f.center += p;
  f.center /= static_cast<double>(points.size());
  double ss = 0.0;
  for (const Vec3& p : points) ss += (p - f.center).squaredNorm();
  f.scale = std::sqrt(ss / static_cast<double>(points.size()));
  if (!(f.scale > 0.0)) throw GeometryError("fit points are all identical");
  for (const Vec3& p : points) {
    const Vec5 w = fit_weights((p - f.center) / f.scale);
    f.moments.noalias() += w * w.transpose();
  }
  return f;
}

/// Maps an IPNS 5-vector (x, y, z, einf, e0) from the fit frame back to world.
Multivector world_dual(const FitFrame& f, const Vec5& v) {
  const Vec3 s(v[0], v[1], v[2]);
  const double sinf = v[3];
  const double s0 = v[4];
  const Vec3 sw = f.scale * s + s0 * f.center;
  const double sinf_w = f.scale * f.center.dot(s) + f.scale * f.scale * sinf +
                        0.5 * s0 * f.center.squaredNorm();
  return Multivector::vector(sw) + Multivector::blade(kEinf, sinf_w) + Multivector::blade(kE0, s0);
}

Primitive assemble(std::span<const Vec3> points, const FitFrame& f, Vec5 v, bool is_plane) {
  if (is_plane) v[4] = 0.0;
  Primitive p = primitive_from_dual(world_dual(f, v));
  p.fit_vector = v;
  p.fit_center = f.center;
  p.fit_scale = f.scale;
  p.residuals.reserve(points.size());
  for (const Vec3& x : points) {
    const double r = p.signed_residual(x);
    p.residuals.push_back(r * r);
  }
  return p;
}

}  // namespace

Primitive fit_primitive(std::span<const Vec3> points) {
  const FitFrame f = fit_frame(points);
  const Eigen::SelfAdjointEigenSolver<Mat5> eig(f.moments);
  const Eigen::Matrix<double, 5, 1> lambda = eig.eigenvalues();
  if (!(lambda[1] > 1e-10 * lambda[4])) {
    throw GeometryError("fit_primitive: neighborhood does not determine a unique primitive");
  }
  const Vec5 v = eig.eigenvectors().col(0);
  const bool plane = std::abs(v[4]) <= 1e-9 * v.norm();
  return assemble(points, f, v, plane);
}

Primitive fit_plane(std::span<const Vec3> points) {
  const FitFrame f = fit_frame(points);
  const Eigen::Matrix4d sub = f.moments.topLeftCorner<4, 4>();
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(sub);
  if (!(eig.eigenvalues()[1] > 1e-10 * eig.eigenvalues()[3])) {
    throw GeometryError("fit_plane: points do not determine a unique plane");
  }
  Vec5 v = Vec5::Zero();
  v.head<4>() = eig.eigenvectors().col(0);
  return assemble(points, f, v, true);
}

double fit_objective(std::span<const Vec3> points, const Primitive& fit, const Vec5& v) {
  double sum = 0.0;
  for (const Vec3& p : points) {
    const double r = fit_weights((p - fit.fit_center) / fit.fit_scale).dot(v);
    sum += r * r;
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Projection and splitting

Multivector project_to_primitive(const Multivector& point, const Multivector& element) {
  const Multivector inv = element.inverse();
  return (left_contraction(point ^ Multivector::einf(), element) * inv).grade(2);
}

Multivector project_to_primitive(const Multivector& point, const Primitive& primitive) {
  return project_to_primitive(point, primitive.element);
}

bool is_flat_point(const Multivector& pair, double tol) {
  const double scale = pair.max_abs();
  if (scale == 0.0) return false;
  return (Multivector::einf() ^ pair).max_abs() <= tol * scale;
}

namespace {

bool lex_less(const Vec3& a, const Vec3& b) {
  return std::lexicographical_compare(a.data(), a.data() + 3, b.data(), b.data() + 3);
}

}  // namespace

std::pair<Multivector, Multivector> split_pair_points(const Multivector& pair) {
  const double scale = pair.max_abs();
  if (scale == 0.0) throw GeometryError("split: zero point pair");
  double sq = (pair * pair).scalar_part();
  if (sq < -1e-10 * scale * scale) throw GeometryError("split: imaginary point pair");
  sq = std::max(sq, 0.0);
  const Multivector d = -left_contraction(Multivector::einf(), pair);
  const double root = std::sqrt(sq);
  const Vec3 a = extract_point(((Multivector::scalar(root) + pair) * d).grade(1));
  const Vec3 b = extract_point(((Multivector::scalar(-root) + pair) * d).grade(1));
  if (lex_less(b, a)) return {embed_point(b), embed_point(a)};
  return {embed_point(a), embed_point(b)};
}

Multivector split_pair(const Multivector& pair, const Multivector& reference) {
  if (is_flat_point(pair)) {
    const double w = pair[kE0 | kEinf];
    const double scale = pair.max_abs();
    if (!(std::abs(w) > 1e-12 * scale)) throw GeometryError("split: flat point at infinity");
    return embed_point(Vec3(pair[kE1 | kEinf], pair[kE2 | kEinf], pair[kE3 | kEinf]) / w);
  }
  const auto [first, second] = split_pair_points(pair);
  const Vec3 ref = extract_point(reference);
  const Vec3 a = extract_point(first);
  const Vec3 b = extract_point(second);
  const double da = (a - ref).norm();
  const double db = (b - ref).norm();
  const double tie = 1e-12 * std::max({1.0, da, db});
  if (std::abs(da - db) <= tie) return first;  // lexicographically smaller
  return da < db ? first : second;
}

Multivector orthogonal_line(const Primitive& primitive, const Multivector& point) {
  return normalize_line(primitive.dual ^ point ^ Multivector::einf());
}

Multivector tangent_plane(const Multivector& line, const Multivector& point) {
  const Multivector plane = line.dual() ^ point ^ Multivector::einf();
  const auto [n, d] = plane_parameters(plane);
  return make_plane(n, d).element;
}

}  // namespace ergodic::cga
