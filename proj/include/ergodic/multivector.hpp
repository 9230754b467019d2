#pragma once

#include <Eigen/Core>

#include <array>
#include <string>

namespace ergodic::cga {

using Vec3 = Eigen::Vector3d;

/// Null-basis blade masks. A blade is the outer product of the set basis
/// vectors taken in the order e0, e1, e2, e3, einf; e.g. `kE0 | kE3` is e0^e3.
namespace blades {
inline constexpr unsigned kE0 = 1u << 0;
inline constexpr unsigned kE1 = 1u << 1;
inline constexpr unsigned kE2 = 1u << 2;
inline constexpr unsigned kE3 = 1u << 3;
inline constexpr unsigned kEinf = 1u << 4;
}  // namespace blades

/// Element of the conformal algebra R(4,1).
///
/// Stored densely as 32 coefficients over the null-basis blades (index = mask).
/// The metric is e0.einf = -1, e0^2 = einf^2 = 0, ei^2 = 1; the product tables
/// are derived once through the orthonormal basis e0 = (e- - e+)/2, einf = e- + e+.
class Multivector {
 public:
  static constexpr int kSize = 32;

  Multivector() { c_.fill(0.0); }

  static Multivector scalar(double s);
  /// Null-basis blade with the given mask (see `blades`).
  static Multivector blade(unsigned null_mask, double coeff = 1.0);
  static Multivector vector(const Vec3& v);
  static Multivector e0() { return blade(blades::kE0); }
  static Multivector einf() { return blade(blades::kEinf); }
  /// Pseudoscalar e0^e1^e2^e3^einf (equal to e1 e2 e3 e+ e-).
  static Multivector pseudoscalar();

  /// Coefficient of a null-basis blade.
  double operator[](unsigned null_mask) const;
  void set(unsigned null_mask, double value);
  std::array<double, kSize> null_coefficients() const;

  double scalar_part() const { return c_[0]; }
  /// Grade-k projection.
  Multivector grade(int k) const;
  /// True when every coefficient outside grade k is below tol (absolute).
  bool is_grade(int k, double tol = 1e-12) const;
  Multivector reverse() const;
  Multivector involute() const;
  /// Multiplication by the inverse pseudoscalar.
  Multivector dual() const;
  /// Inverse of `dual`: multiplication by the pseudoscalar.
  Multivector undual() const;
  /// Versor/blade inverse X~ / (X X~); throws GeometryError when X X~ is not
  /// an invertible scalar.
  Multivector inverse() const;

  /// <X X~>_0
  double norm_squared() const;
  double max_abs() const;
  bool all_finite() const;

  Multivector& operator+=(const Multivector& o);
  Multivector& operator-=(const Multivector& o);
  Multivector& operator*=(double s);

  friend Multivector operator+(Multivector a, const Multivector& b) { return a += b; }
  friend Multivector operator-(Multivector a, const Multivector& b) { return a -= b; }
  friend Multivector operator-(Multivector a) { return a *= -1.0; }
  friend Multivector operator*(Multivector a, double s) { return a *= s; }
  friend Multivector operator*(double s, Multivector a) { return a *= s; }
  friend Multivector operator/(Multivector a, double s) { return a *= 1.0 / s; }

  /// Geometric product.
  friend Multivector operator*(const Multivector& a, const Multivector& b);
  /// Outer product.
  friend Multivector operator^(const Multivector& a, const Multivector& b);

  /// Null-basis coefficients indexed by blade mask.
  const std::array<double, kSize>& raw() const { return c_; }
  std::array<double, kSize>& raw() { return c_; }

 private:
  std::array<double, kSize> c_;
};

/// Left contraction a ⌋ b (the metric inner product used throughout).
Multivector left_contraction(const Multivector& a, const Multivector& b);
/// <a b>_0
double scalar_product(const Multivector& a, const Multivector& b);
/// Commutator product (ab - ba)/2.
Multivector commutator(const Multivector& a, const Multivector& b);
/// a b a~, the sandwich used to apply motors.
Multivector sandwich(const Multivector& versor, const Multivector& x);

/// Renders a signed null-basis blade sum, e.g. "1 e01 - 0.5 e23".
/// einf is written `i` (e.g. "e3i"); coefficients below `zero_tol` are omitted.
std::string to_string(const Multivector& x, int precision = 6, double zero_tol = 1e-12);
std::string blade_name(unsigned null_mask);

int popcount5(unsigned mask);

}  // namespace ergodic::cga
