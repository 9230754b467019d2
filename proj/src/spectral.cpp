#include "ergodic/spectral.hpp"

#include "ergodic/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace ergodic {

namespace {

void fix_signs(Eigen::MatrixXd& phi) {
  for (Eigen::Index j = 0; j < phi.cols(); ++j) {
    Eigen::Index imax = 0;
    phi.col(j).cwiseAbs().maxCoeff(&imax);
    if (phi(imax, j) < 0.0) phi.col(j) = -phi.col(j);
  }
}

/// Rayleigh quotients, clamping, sign rule and ascending order.
SpectralBasis finish_basis(const LaplacianOperator& op, Eigen::MatrixXd phi) {
  const Eigen::Index k = phi.cols();
  Eigen::VectorXd lambda(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const double mm = phi.col(j).dot(op.mass.cwiseProduct(phi.col(j)));
    phi.col(j) /= std::sqrt(mm);
    lambda[j] = std::max(0.0, phi.col(j).dot(op.stiffness * phi.col(j)));
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return lambda[a] < lambda[b]; });
  SpectralBasis basis;
  basis.eigenvalues.resize(k);
  basis.eigenvectors.resize(phi.rows(), k);
  for (Eigen::Index j = 0; j < k; ++j) {
    basis.eigenvalues[j] = lambda[order[static_cast<std::size_t>(j)]];
    basis.eigenvectors.col(j) = phi.col(order[static_cast<std::size_t>(j)]);
  }
  fix_signs(basis.eigenvectors);
  basis.mass = op.mass;
  return basis;
}

void check_modes(const LaplacianOperator& op, int n_modes) {
  if (n_modes < 1 || static_cast<std::size_t>(n_modes) > op.size()) {
    throw DomainError("n_M must lie in [1, n_P]; got " + std::to_string(n_modes));
  }
}

double inf_norm(const SparseMatrix& s) {
  Eigen::VectorXd rows = Eigen::VectorXd::Zero(s.rows());
  for (Eigen::Index c = 0; c < s.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator it(s, c); it; ++it) rows[it.row()] += std::abs(it.value());
  }
  return rows.maxCoeff();
}

}  // namespace

SpectralBasis compute_basis(const LaplacianOperator& op, int n_modes, const SpectralParams& params) {
  check_modes(op, n_modes);
  const Eigen::Index n = static_cast<Eigen::Index>(op.size());
  const Eigen::Index nm = n_modes;
  const Eigen::Index b = std::min<Eigen::Index>(
      n, params.block_size > 0 ? params.block_size : std::min<Eigen::Index>(nm, 8));
  const Eigen::Index want_dim = std::min<Eigen::Index>(n, nm + b);
  const Eigen::VectorXd& mass = op.mass;
  const SparseMatrix& s = op.stiffness;

  const double sigma = -1e-8 * s.diagonal().sum() / static_cast<double>(n);
  SparseMatrix shifted = s;
  for (Eigen::Index i = 0; i < n; ++i) shifted.coeffRef(i, i) -= sigma * mass[i];
  const Eigen::SimplicialLDLT<SparseMatrix> solver(shifted);
  if (solver.info() != Eigen::Success) throw SolverError("shift-invert factorization failed");

  const double snorm = std::max(inf_norm(s), 1e-300);
  std::mt19937_64 rng(params.seed);
  std::normal_distribution<double> gauss;
  auto random_vector = [&] {
    Eigen::VectorXd x(n);
    for (Eigen::Index i = 0; i < n; ++i) x[i] = gauss(rng);
    return x;
  };

  Eigen::MatrixXd v(n, std::min<Eigen::Index>(n, 4 * want_dim));
  Eigen::MatrixXd sv(n, v.cols());
  Eigen::MatrixXd ar(0, 0);
  Eigen::Index m = 0;

  // Start block: the constant null vector plus random columns.
  Eigen::MatrixXd block(n, b);
  block.col(0).setOnes();
  for (Eigen::Index j = 1; j < b; ++j) block.col(j) = random_vector();

  const long cap = static_cast<long>(params.iteration_factor) * nm;
  Eigen::VectorXd residuals;
  for (long iter = 0;; ++iter) {
    const Eigen::Index first_new = m;
    for (Eigen::Index j = 0; j < block.cols() && m < n; ++j) {
      Eigen::VectorXd x = block.col(j);
      bool accepted = false;
      for (int attempt = 0; attempt < 6 && !accepted; ++attempt) {
        const double before = std::sqrt(x.dot(mass.cwiseProduct(x)));
        for (int pass = 0; pass < 2; ++pass) {
          if (m == 0) break;
          const Eigen::VectorXd c = v.leftCols(m).transpose() * mass.cwiseProduct(x);
          x.noalias() -= v.leftCols(m) * c;
        }
        const double after = std::sqrt(x.dot(mass.cwiseProduct(x)));
        if (after > 1e-8 * before && after > 0.0) {
          if (m == v.cols()) {
            const Eigen::Index grow = std::min<Eigen::Index>(n, 2 * v.cols());
            v.conservativeResize(Eigen::NoChange, grow);
            sv.conservativeResize(Eigen::NoChange, grow);
          }
          v.col(m) = x / after;
          ++m;
          accepted = true;
        } else {
          x = random_vector();  // rank deficiency: restart this direction
        }
      }
    }
    const Eigen::Index added = m - first_new;
    if (added > 0) {
      sv.middleCols(first_new, added) = s * v.middleCols(first_new, added);
      Eigen::MatrixXd grown = Eigen::MatrixXd::Zero(m, m);
      grown.topLeftCorner(first_new, first_new) = ar;
      const Eigen::MatrixXd c = v.leftCols(m).transpose() * sv.middleCols(first_new, added);
      grown.middleCols(first_new, added) = c;
      grown.middleRows(first_new, added) = c.transpose();
      ar = 0.5 * (grown + grown.transpose());
    }

    if (m >= want_dim || m == n || added == 0) {
      const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> rr(ar);
      const Eigen::MatrixXd y = rr.eigenvectors().leftCols(std::min(nm, m));
      const Eigen::MatrixXd x = v.leftCols(m) * y;
      const Eigen::MatrixXd sx = sv.leftCols(m) * y;
      residuals.resize(y.cols());
      for (Eigen::Index j = 0; j < y.cols(); ++j) {
        const double th = rr.eigenvalues()[j];
        const Eigen::VectorXd r = sx.col(j) - th * mass.cwiseProduct(x.col(j));
        residuals[j] = r.norm() / (snorm * x.col(j).norm());
      }
      const bool done = m == n || (y.cols() == nm && residuals.maxCoeff() <= params.tolerance);
      if (done) {
        if (y.cols() < nm) throw SolverError("Krylov space exhausted before n_M modes were found");
        return finish_basis(op, x);
      }
      if (added == 0) {
        throw SolverError("Krylov space stopped growing; max residual " +
                          std::to_string(residuals.maxCoeff()));
      }
    }
    if (iter + 1 >= cap) {
      char buf[160];
      std::snprintf(buf, sizeof(buf),
                    "Lanczos did not converge in %ld block iterations: max residual %.3e "
                    "(tolerance %.1e)",
                    cap, residuals.size() ? residuals.maxCoeff() : -1.0, params.tolerance);
      throw SolverError(buf);
    }
    // Next Krylov block: (S - sigma M)^-1 M applied to the newest basis vectors.
    const Eigen::MatrixXd rhs = mass.asDiagonal() * v.middleCols(first_new, added);
    block = solver.solve(rhs);
  }
}

SpectralBasis compute_basis_dense(const LaplacianOperator& op, int n_modes) {
  check_modes(op, n_modes);
  const Eigen::MatrixXd sd = Eigen::MatrixXd(op.stiffness);
  const Eigen::MatrixXd md = op.mass.asDiagonal();
  const Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> eig(sd, md);
  if (eig.info() != Eigen::Success) throw SolverError("dense generalized eigensolver failed");
  return finish_basis(op, eig.eigenvectors().leftCols(n_modes));
}

double timestep(double h, double alpha) {
  if (!(h > 0.0) || !(alpha > 0.0)) throw DomainError("timestep needs h > 0 and alpha > 0");
  return alpha * h * h;
}

Eigen::VectorXd project(const SpectralBasis& basis, const Field& u) {
  if (u.size() != basis.points()) throw DomainError("project: field length does not match basis");
  return basis.eigenvectors.transpose() * basis.mass.cwiseProduct(u);
}

Field reconstruct(const SpectralBasis& basis, const Eigen::VectorXd& coeffs) {
  if (coeffs.size() != basis.modes()) throw DomainError("reconstruct: coefficient count mismatch");
  return basis.eigenvectors * coeffs;
}

Decay decay_from_string(const std::string& name) {
  if (name == "implicit") return Decay::kImplicit;
  if (name == "exponential") return Decay::kExponential;
  throw DomainError("unknown spectral decay '" + name + "'");
}

std::string to_string(Decay decay) { return decay == Decay::kImplicit ? "implicit" : "exponential"; }

Field diffuse_spectral(const SpectralBasis& basis, const Field& u0, double tau, Decay decay) {
  if (!(tau >= 0.0)) throw DomainError("diffuse_spectral: tau must be nonnegative");
  const Eigen::ArrayXd tl = tau * basis.eigenvalues.array();
  Eigen::VectorXd factor;
  if (decay == Decay::kImplicit) {
    factor = (1.0 + tl).inverse().matrix();
  } else {
    factor = (-tl).exp().matrix();
  }
  return reconstruct(basis, factor.cwiseProduct(project(basis, u0)));
}

ImplicitDiffusion::ImplicitDiffusion(const LaplacianOperator& op) : op_(op) {}

std::shared_ptr<const ImplicitDiffusion::Factor> ImplicitDiffusion::factor(double tau) const {
  std::lock_guard lock(mutex_);
  if (auto it = cache_.find(tau); it != cache_.end()) return it->second;
  SparseMatrix a = tau * op_.stiffness;
  for (Eigen::Index i = 0; i < a.rows(); ++i) a.coeffRef(i, i) += op_.mass[i];
  auto f = std::make_shared<Factor>(a);
  if (f->info() != Eigen::Success) throw SolverError("implicit diffusion: factorization failed");
  cache_.emplace(tau, f);
  return f;
}

Field ImplicitDiffusion::diffuse(const Field& u0, double tau) const {
  if (!(tau >= 0.0)) throw DomainError("diffuse_implicit: tau must be nonnegative");
  if (u0.size() != op_.mass.size()) throw DomainError("diffuse_implicit: field length mismatch");
  if (tau == 0.0) return u0;
  const auto f = factor(tau);
  Field u = f->solve(op_.mass.cwiseProduct(u0));
  if (f->info() != Eigen::Success || !u.allFinite()) throw SolverError("implicit diffusion solve failed");
  return u;
}

std::size_t ImplicitDiffusion::cached_factorizations() const {
  std::lock_guard lock(mutex_);
  return cache_.size();
}

Field diffuse_implicit(const LaplacianOperator& op, const Field& u0, double tau) {
  return ImplicitDiffusion(op).diffuse(u0, tau);
}

DenseImplicitDiffusion::DenseImplicitDiffusion(const LaplacianOperator& op, double tau) {
  if (!(tau >= 0.0)) throw DomainError("tau must be nonnegative");
  SparseMatrix a = tau * op.stiffness;
  for (Eigen::Index i = 0; i < a.rows(); ++i) a.coeffRef(i, i) += op.mass[i];
  const Eigen::SimplicialLDLT<SparseMatrix> f(a);
  if (f.info() != Eigen::Success) throw SolverError("dense implicit route: factorization failed");
  const Eigen::MatrixXd rhs = Eigen::MatrixXd(op.mass.asDiagonal());
  op_ = f.solve(rhs);
}

Field DenseImplicitDiffusion::diffuse(const Field& u0) const {
  if (u0.size() != op_.cols()) throw DomainError("field length mismatch");
  return op_ * u0;
}

void export_basis(const SpectralBasis& basis, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string());
  char buf[40];
  for (Eigen::Index j = 0; j < basis.modes(); ++j) {
    std::snprintf(buf, sizeof(buf), "%s%.17g", j ? " " : "", basis.eigenvalues[j]);
    out << buf;
  }
  out << '\n';
  for (Eigen::Index i = 0; i < basis.points(); ++i) {
    for (Eigen::Index j = 0; j < basis.modes(); ++j) {
      std::snprintf(buf, sizeof(buf), "%s%.17g", j ? " " : "", basis.eigenvectors(i, j));
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace ergodic
