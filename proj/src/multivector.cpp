#include "ergodic/multivector.hpp"

#include "ergodic/errors.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <vector>

namespace ergodic::cga {

namespace {

constexpr int kN = Multivector::kSize;
constexpr unsigned kMinusBit = 1u << 4;  // e- in the orthonormal ordering e1,e2,e3,e+,e-

/// Sign from reordering the concatenation of blades a and b into canonical order.
constexpr double reorder_sign(unsigned a, unsigned b) {
  a >>= 1;
  int swaps = 0;
  while (a != 0) {
    swaps += std::popcount(a & b);
    a >>= 1;
  }
  return (swaps & 1) ? -1.0 : 1.0;
}

struct Term {
  unsigned mask;
  double coeff;
};

struct Tables {
  // Products of null-basis blades, computed once through the orthonormal basis.
  // Storing in the null basis keeps einf^2 = 0 exact (no large cancelling terms).
  std::array<std::array<std::vector<Term>, kN>, kN> geometric;
  std::array<std::array<std::vector<Term>, kN>, kN> contraction;
  std::array<std::array<double, kN>, kN> outer_sign{};

  Tables() {
    std::array<std::array<double, kN>, kN> ortho_sign{};
    for (unsigned a = 0; a < kN; ++a) {
      for (unsigned b = 0; b < kN; ++b) {
        double s = reorder_sign(a, b);
        if ((a & b) & kMinusBit) s = -s;
        ortho_sign[a][b] = s;
        outer_sign[a][b] = (a & b) ? 0.0 : reorder_sign(a, b);
      }
    }
    // Vectors of each basis expressed in the other. Outer products are metric free,
    // so blades follow from wedging these images in canonical order.
    const std::array<std::vector<std::pair<unsigned, double>>, 5> null_vec_in_ortho{{
        {{1u << 4, 0.5}, {1u << 3, -0.5}},  // e0 = (e- - e+)/2
        {{1u << 0, 1.0}},                   // e1
        {{1u << 1, 1.0}},                   // e2
        {{1u << 2, 1.0}},                   // e3
        {{1u << 4, 1.0}, {1u << 3, 1.0}},   // einf = e- + e+
    }};
    const std::array<std::vector<std::pair<unsigned, double>>, 5> ortho_vec_in_null{{
        {{1u << 1, 1.0}},                   // e1
        {{1u << 2, 1.0}},                   // e2
        {{1u << 3, 1.0}},                   // e3
        {{1u << 4, 0.5}, {1u << 0, -1.0}},  // e+ = einf/2 - e0
        {{1u << 4, 0.5}, {1u << 0, 1.0}},   // e- = einf/2 + e0
    }};
    using Matrix = std::array<std::array<double, kN>, kN>;
    auto build = [](const auto& images, Matrix& matrix) {
      for (unsigned blade = 0; blade < kN; ++blade) {
        std::array<double, kN> acc{};
        acc[0] = 1.0;
        for (int bit = 0; bit < 5; ++bit) {
          if (!(blade & (1u << bit))) continue;
          std::array<double, kN> next{};
          for (unsigned m = 0; m < kN; ++m) {
            if (acc[m] == 0.0) continue;
            for (const auto& [vb, vc] : images[bit]) {
              if (m & vb) continue;
              next[m | vb] += reorder_sign(m, vb) * acc[m] * vc;
            }
          }
          acc = next;
        }
        for (unsigned m = 0; m < kN; ++m) matrix[m][blade] = acc[m];
      }
    };
    Matrix null_to_ortho{};
    Matrix ortho_to_null{};
    build(null_vec_in_ortho, null_to_ortho);
    build(ortho_vec_in_null, ortho_to_null);

    for (unsigned a = 0; a < kN; ++a) {
      for (unsigned b = 0; b < kN; ++b) {
        std::array<double, kN> prod{};
        for (unsigned i = 0; i < kN; ++i) {
          if (null_to_ortho[i][a] == 0.0) continue;
          for (unsigned j = 0; j < kN; ++j) {
            if (null_to_ortho[j][b] == 0.0) continue;
            prod[i ^ j] += ortho_sign[i][j] * null_to_ortho[i][a] * null_to_ortho[j][b];
          }
        }
        const int ga = std::popcount(a);
        const int gb = std::popcount(b);
        for (unsigned m = 0; m < kN; ++m) {
          double c = 0.0;
          for (unsigned i = 0; i < kN; ++i) c += ortho_to_null[m][i] * prod[i];
          if (std::abs(c) < 1e-12) continue;
          geometric[a][b].push_back({m, c});
          if (ga <= gb && std::popcount(m) == gb - ga) contraction[a][b].push_back({m, c});
        }
      }
    }
  }
};

const Tables& tables() {
  static const Tables t;
  return t;
}

Multivector table_product(const Multivector& a, const Multivector& b,
                          const std::array<std::array<std::vector<Term>, kN>, kN>& table) {
  Multivector out;
  auto& oc = out.raw();
  const auto& ac = a.raw();
  const auto& bc = b.raw();
  for (unsigned i = 0; i < kN; ++i) {
    if (ac[i] == 0.0) continue;
    for (unsigned j = 0; j < kN; ++j) {
      if (bc[j] == 0.0) continue;
      const double ab = ac[i] * bc[j];
      for (const Term& t : table[i][j]) oc[t.mask] += t.coeff * ab;
    }
  }
  return out;
}

}  // namespace

int popcount5(unsigned mask) { return std::popcount(mask & 31u); }

Multivector Multivector::scalar(double s) {
  Multivector m;
  m.c_[0] = s;
  return m;
}

Multivector Multivector::blade(unsigned null_mask, double coeff) {
  Multivector m;
  m.c_[null_mask & 31u] = coeff;
  return m;
}

Multivector Multivector::vector(const Vec3& v) {
  Multivector m;
  m.c_[blades::kE1] = v.x();
  m.c_[blades::kE2] = v.y();
  m.c_[blades::kE3] = v.z();
  return m;
}

Multivector Multivector::pseudoscalar() { return blade(31u); }

double Multivector::operator[](unsigned null_mask) const { return c_[null_mask & 31u]; }

void Multivector::set(unsigned null_mask, double value) { c_[null_mask & 31u] = value; }

std::array<double, Multivector::kSize> Multivector::null_coefficients() const { return c_; }

Multivector Multivector::grade(int k) const {
  Multivector m;
  for (unsigned i = 0; i < kN; ++i) {
    if (std::popcount(i) == k) m.c_[i] = c_[i];
  }
  return m;
}

bool Multivector::is_grade(int k, double tol) const {
  for (unsigned i = 0; i < kN; ++i) {
    if (std::popcount(i) != k && std::abs(c_[i]) > tol) return false;
  }
  return true;
}

Multivector Multivector::reverse() const {
  Multivector m = *this;
  for (unsigned i = 0; i < kN; ++i) {
    const int g = std::popcount(i);
    if ((g * (g - 1) / 2) & 1) m.c_[i] = -m.c_[i];
  }
  return m;
}

Multivector Multivector::involute() const {
  Multivector m = *this;
  for (unsigned i = 0; i < kN; ++i) {
    if (std::popcount(i) & 1) m.c_[i] = -m.c_[i];
  }
  return m;
}

// I^2 = -1 in R(4,1), hence I^-1 = -I.
Multivector Multivector::dual() const { return -((*this) * pseudoscalar()); }

Multivector Multivector::undual() const { return (*this) * pseudoscalar(); }

Multivector Multivector::inverse() const {
  const Multivector rev = reverse();
  const Multivector prod = (*this) * rev;
  const double s = prod.scalar_part();
  double rest = 0.0;
  for (int i = 1; i < kN; ++i) rest = std::max(rest, std::abs(prod.c_[i]));
  if (!(std::abs(s) > 1e-300) || rest > 1e-9 * std::abs(s)) {
    throw GeometryError("multivector is not invertible as a versor or blade");
  }
  return rev / s;
}

double Multivector::norm_squared() const { return scalar_product(*this, reverse()); }

double Multivector::max_abs() const {
  double m = 0.0;
  for (double v : c_) m = std::max(m, std::abs(v));
  return m;
}

bool Multivector::all_finite() const {
  for (double v : c_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Multivector& Multivector::operator+=(const Multivector& o) {
  for (int i = 0; i < kN; ++i) c_[i] += o.c_[i];
  return *this;
}

Multivector& Multivector::operator-=(const Multivector& o) {
  for (int i = 0; i < kN; ++i) c_[i] -= o.c_[i];
  return *this;
}

Multivector& Multivector::operator*=(double s) {
  for (double& v : c_) v *= s;
  return *this;
}

Multivector operator*(const Multivector& a, const Multivector& b) {
  return table_product(a, b, tables().geometric);
}

Multivector operator^(const Multivector& a, const Multivector& b) {
  const auto& t = tables();
  Multivector out;
  for (unsigned i = 0; i < kN; ++i) {
    if (a.c_[i] == 0.0) continue;
    for (unsigned j = 0; j < kN; ++j) {
      if ((i & j) || b.c_[j] == 0.0) continue;
      out.c_[i | j] += t.outer_sign[i][j] * a.c_[i] * b.c_[j];
    }
  }
  return out;
}

Multivector left_contraction(const Multivector& a, const Multivector& b) {
  return table_product(a, b, tables().contraction);
}

double scalar_product(const Multivector& a, const Multivector& b) {
  const auto& t = tables();
  double s = 0.0;
  for (unsigned i = 0; i < kN; ++i) {
    if (a.raw()[i] == 0.0) continue;
    for (unsigned j = 0; j < kN; ++j) {
      if (b.raw()[j] == 0.0) continue;
      for (const Term& term : t.geometric[i][j]) {
        if (term.mask == 0) s += term.coeff * a.raw()[i] * b.raw()[j];
      }
    }
  }
  return s;
}

Multivector commutator(const Multivector& a, const Multivector& b) { return 0.5 * (a * b - b * a); }

Multivector sandwich(const Multivector& versor, const Multivector& x) {
  return versor * x * versor.reverse();
}

std::string blade_name(unsigned null_mask) {
  if (null_mask == 0) return "1";
  std::string name = "e";
  const char* symbols = "0123i";
  for (int bit = 0; bit < 5; ++bit) {
    if (null_mask & (1u << bit)) name += symbols[bit];
  }
  return name;
}

std::string to_string(const Multivector& x, int precision, double zero_tol) {
  const auto coeffs = x.null_coefficients();
  std::string out;
  for (int g = 0; g <= 5; ++g) {
    for (unsigned m = 0; m < kN; ++m) {
      if (std::popcount(m) != g || std::abs(coeffs[m]) <= zero_tol) continue;
      const double c = coeffs[m];
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.*g", precision, std::abs(c));
      if (out.empty()) {
        if (c < 0) out += "-";
      } else {
        out += c < 0 ? " - " : " + ";
      }
      out += buf;
      if (m != 0) out += " " + blade_name(m);
    }
  }
  return out.empty() ? "0" : out;
}

}  // namespace ergodic::cga
