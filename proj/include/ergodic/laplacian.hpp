#pragma once

#include "ergodic/kdtree.hpp"
#include "ergodic/pointcloud.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <filesystem>
#include <vector>

namespace ergodic {

using SparseMatrix = Eigen::SparseMatrix<double>;

struct LaplacianParams {
  int k = 12;
  /// Added to every local edge length, relative to the mean spacing h.
  double mollify = 1e-5;
  /// 0 means default_workers().
  std::size_t workers = 0;
};

/// Local tangent structure of one point: PCA frame plus its projected k-NN.
struct TangentFrame {
  std::size_t origin = 0;
  Vec3 t1 = Vec3::UnitX();
  Vec3 t2 = Vec3::UnitY();
  Vec3 n = Vec3::UnitZ();
  std::vector<std::size_t> neighbors;
  std::vector<Eigen::Vector2d> coords;
};

/// Weak Laplacian S (positive semidefinite, S 1 = 0) with lumped mass M.
struct LaplacianOperator {
  Eigen::VectorXd mass;
  SparseMatrix stiffness;
  std::vector<bool> boundary;
  double spacing = 0.0;

  std::size_t size() const { return static_cast<std::size_t>(mass.size()); }
};

TangentFrame build_tangent_frame(const PointCloud& cloud, const KdTree& index, std::size_t i, int k);
TangentFrame build_tangent_frame(const PointCloud& cloud, std::size_t i, int k);

/// True when consecutive neighbor directions leave an angular gap above pi/2.
bool detect_boundary(const TangentFrame& frame);

/// One-ring of the origin in the local 2-D Delaunay triangulation of the
/// frame's projected neighbors: ccw-ordered positions into `frame.neighbors`
/// and, for each consecutive pair, whether they span a triangle.
struct OneRing {
  std::vector<std::size_t> ring;
  std::vector<bool> closed;  // closed[j]: triangle (origin, ring[j], ring[j+1 mod n])
};
OneRing local_delaunay_ring(const TangentFrame& frame);

LaplacianOperator build_laplacian(const PointCloud& cloud, const LaplacianParams& params = {});

/// Text export: "i j value" rows for every stored entry of S, one mass per line for M.
void export_operator(const LaplacianOperator& op, const std::filesystem::path& stiffness_path,
                     const std::filesystem::path& mass_path);
LaplacianOperator import_operator(const std::filesystem::path& stiffness_path,
                                  const std::filesystem::path& mass_path);

}  // namespace ergodic
