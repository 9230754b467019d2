#pragma once

#include "ergodic/laplacian.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCholesky>

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>

namespace ergodic {

using Field = Eigen::VectorXd;

struct SpectralParams {
  /// Relative residual ||S x - lambda M x|| / (||S x|| + |lambda| ||M x||).
  double tolerance = 1e-10;
  /// Block iterations allowed per requested mode.
  int iteration_factor = 50;
  std::uint64_t seed = 0x5eed;
  /// 0 picks min(n_M, 8).
  int block_size = 0;
};

/// Smallest generalized eigenpairs S phi = lambda M phi, M-orthonormal.
struct SpectralBasis {
  Eigen::VectorXd eigenvalues;   // ascending, >= 0
  Eigen::MatrixXd eigenvectors;  // n_P x n_M
  Eigen::VectorXd mass;          // diagonal of M

  Eigen::Index modes() const { return eigenvalues.size(); }
  Eigen::Index points() const { return eigenvectors.rows(); }
};

/// Shift-invert block Lanczos with full M-reorthogonalization and Rayleigh-Ritz
/// on (S, M). Throws SolverError with the achieved residuals on non-convergence.
SpectralBasis compute_basis(const LaplacianOperator& op, int n_modes, const SpectralParams& params = {});

/// Dense generalized eigensolver on the same matrices (small clouds and tests).
SpectralBasis compute_basis_dense(const LaplacianOperator& op, int n_modes);

/// tau = alpha h^2
double timestep(double h, double alpha);

Eigen::VectorXd project(const SpectralBasis& basis, const Field& u);
Field reconstruct(const SpectralBasis& basis, const Eigen::VectorXd& coeffs);
enum class Decay {
  /// 1 / (1 + tau lambda): the backward-Euler step restricted to the basis.
  kImplicit,
  /// exp(-tau lambda): the exact heat semigroup restricted to the basis.
  kExponential,
};

Decay decay_from_string(const std::string& name);
std::string to_string(Decay decay);

Field diffuse_spectral(const SpectralBasis& basis, const Field& u0, double tau, Decay decay = Decay::kExponential);

/// Backward-Euler heat step (M + tau S) u = M u0 with a per-tau factorization cache.
/// Thread safe; concurrent first use of a tau factors once.
class ImplicitDiffusion {
 public:
  explicit ImplicitDiffusion(const LaplacianOperator& op);

  Field diffuse(const Field& u0, double tau) const;
  std::size_t cached_factorizations() const;

 private:
  using Factor = Eigen::SimplicialLDLT<SparseMatrix>;
  std::shared_ptr<const Factor> factor(double tau) const;

  const LaplacianOperator& op_;
  mutable std::mutex mutex_;
  mutable std::map<double, std::shared_ptr<const Factor>> cache_;
};

/// One-off implicit step (no cache beyond this call).
Field diffuse_implicit(const LaplacianOperator& op, const Field& u0, double tau);

/// Implicit route with the solution operator (M + tau S)^-1 M formed explicitly
/// up front, so each step is a dense matrix-vector product.
class DenseImplicitDiffusion {
 public:
  DenseImplicitDiffusion(const LaplacianOperator& op, double tau);
  Field diffuse(const Field& u0) const;

 private:
  Eigen::MatrixXd op_;
};

/// Text dump: first line lists eigenvalues, then one row of Phi per point.
void export_basis(const SpectralBasis& basis, const std::filesystem::path& path);

}  // namespace ergodic
