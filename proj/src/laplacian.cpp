#include "ergodic/laplacian.hpp"

#include "ergodic/errors.hpp"
#include "ergodic/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

namespace ergodic {

using Vec2 = Eigen::Vector2d;

TangentFrame build_tangent_frame(const PointCloud& cloud, const KdTree& index, std::size_t i,
                                 int k) {
  const std::size_t n = cloud.size();
  if (k < 6) throw DomainError("tangent frame needs k >= 6");
  if (n <= static_cast<std::size_t>(k)) {
    throw DomainError("cloud has " + std::to_string(n) + " points, need more than k = " +
                      std::to_string(k));
  }
  if (i >= n) throw DomainError("point index out of range");

  const Vec3& xi = cloud.position(i);
  TangentFrame f;
  f.origin = i;
  // Over-query so that exact duplicates of x_i can be skipped.
  std::size_t want = std::min<std::size_t>(n, 2 * static_cast<std::size_t>(k) + 1);
  while (true) {
    f.neighbors.clear();
    for (std::size_t j : index.knn(xi, want)) {
      if (j == i || (cloud.position(j) - xi).squaredNorm() == 0.0) continue;
      f.neighbors.push_back(j);
      if (f.neighbors.size() == static_cast<std::size_t>(k)) break;
    }
    if (f.neighbors.size() == static_cast<std::size_t>(k) || want == n) break;
    want = std::min(n, 2 * want);
  }
  if (f.neighbors.size() < 3) throw FrameError("point " + std::to_string(i) + ": too few distinct neighbors");

  Vec3 mean = xi;
  for (std::size_t j : f.neighbors) mean += cloud.position(j);
  mean /= static_cast<double>(f.neighbors.size() + 1);
  Eigen::Matrix3d cov = (xi - mean) * (xi - mean).transpose();
  for (std::size_t j : f.neighbors) {
    const Vec3 d = cloud.position(j) - mean;
    cov.noalias() += d * d.transpose();
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  const Vec3 lambda = eig.eigenvalues();
  if (!(lambda[1] > 1e-12 * lambda[2])) {
    throw FrameError("point " + std::to_string(i) + ": neighbors are collinear");
  }
  auto canonical = [](Vec3 v) {
    Eigen::Index m = 0;
    v.cwiseAbs().maxCoeff(&m);
    return v[m] < 0.0 ? Vec3(-v) : v;
  };
  f.n = canonical(eig.eigenvectors().col(0));
  f.t1 = canonical(eig.eigenvectors().col(2));
  f.t1 = (f.t1 - f.t1.dot(f.n) * f.n).normalized();
  f.t2 = f.n.cross(f.t1);

  f.coords.reserve(f.neighbors.size());
  for (std::size_t j : f.neighbors) {
    const Vec3 d = cloud.position(j) - xi;
    f.coords.emplace_back(d.dot(f.t1), d.dot(f.t2));
  }
  return f;
}

TangentFrame build_tangent_frame(const PointCloud& cloud, std::size_t i, int k) {
  const KdTree index(cloud);
  return build_tangent_frame(cloud, index, i, k);
}

bool detect_boundary(const TangentFrame& frame) {
  if (frame.coords.size() < 3) throw DomainError("boundary test needs at least 3 neighbors");
  std::vector<double> angles;
  angles.reserve(frame.coords.size());
  for (const Vec2& c : frame.coords) angles.push_back(std::atan2(c.y(), c.x()));
  std::sort(angles.begin(), angles.end());
  double gap = angles.front() + 2.0 * std::numbers::pi - angles.back();
  for (std::size_t j = 1; j < angles.size(); ++j) gap = std::max(gap, angles[j] - angles[j - 1]);
  return gap > 0.5 * std::numbers::pi;
}

namespace {

struct CellVertex {
  Vec2 p;
  int tag;  // neighbor that generated the edge leaving this vertex; -1 for the bounding box
};

/// Clips a convex ccw polygon by {p : p.q <= |q|^2 / 2}.
std::vector<CellVertex> clip(const std::vector<CellVertex>& poly, const Vec2& q, int tag) {
  const double c = 0.5 * q.squaredNorm();
  const double eps = 1e-12 * q.squaredNorm();
  std::vector<CellVertex> out;
  out.reserve(poly.size() + 1);
  const std::size_t m = poly.size();
  for (std::size_t a = 0; a < m; ++a) {
    const CellVertex& cur = poly[a];
    const CellVertex& nxt = poly[(a + 1) % m];
    const double fc = cur.p.dot(q) - c;
    const double fn = nxt.p.dot(q) - c;
    const bool in_c = fc <= eps;
    const bool in_n = fn <= eps;
    if (in_c) {
      if (in_n) {
        out.push_back(cur);
      } else {
        out.push_back(cur);
        const Vec2 x = cur.p + (fc / (fc - fn)) * (nxt.p - cur.p);
        out.push_back({x, tag});
      }
    } else if (in_n) {
      const Vec2 x = cur.p + (fc / (fc - fn)) * (nxt.p - cur.p);
      out.push_back({x, cur.tag});
    }
  }
  return out;
}

}  // namespace

OneRing local_delaunay_ring(const TangentFrame& frame) {
  double rmax = 0.0;
  for (const Vec2& c : frame.coords) rmax = std::max(rmax, c.norm());
  const double b = 1e3 * std::max(rmax, 1e-300);
  std::vector<CellVertex> cell = {{Vec2(-b, -b), -1}, {Vec2(b, -b), -1}, {Vec2(b, b), -1}, {Vec2(-b, b), -1}};
  for (std::size_t j = 0; j < frame.coords.size(); ++j) {
    cell = clip(cell, frame.coords[j], static_cast<int>(j));
    if (cell.empty()) break;
  }
  // Drop degenerate edges (cocircular neighbors touching the cell at a vertex).
  const double tiny = 1e-9 * rmax;
  std::vector<CellVertex> clean;
  for (std::size_t a = 0; a < cell.size(); ++a) {
    const Vec2& nxt = cell[(a + 1) % cell.size()].p;
    if ((nxt - cell[a].p).norm() > tiny) clean.push_back(cell[a]);
  }
  OneRing r;
  const std::size_t m = clean.size();
  for (std::size_t a = 0; a < m; ++a) {
    if (clean[a].tag < 0) continue;
    r.ring.push_back(static_cast<std::size_t>(clean[a].tag));
    r.closed.push_back(clean[(a + 1) % m].tag >= 0);
  }
  return r;
}

namespace {

struct LocalRow {
  std::vector<std::pair<std::size_t, double>> weights;  // (neighbor index, cot weight)
  double mass = 0.0;
  bool boundary = false;
};

LocalRow assemble_point(const TangentFrame& f, double delta) {
  LocalRow row;
  row.boundary = detect_boundary(f);
  const OneRing ring = local_delaunay_ring(f);
  std::vector<double> w(f.neighbors.size(), 0.0);
  const std::size_t m = ring.ring.size();
  for (std::size_t t = 0; t < m; ++t) {
    if (!ring.closed[t]) continue;
    const std::size_t a = ring.ring[t];
    const std::size_t b = ring.ring[(t + 1) % m];
    const Vec2& qa = f.coords[a];
    const Vec2& qb = f.coords[b];
    // Mollified intrinsic edge lengths.
    const double la = qa.norm() + delta;
    const double lb = qb.norm() + delta;
    const double lab = (qa - qb).norm() + delta;
    const double s = 0.5 * (la + lb + lab);
    const double area2 = s * (s - la) * (s - lb) * (s - lab);
    if (!(area2 > 0.0)) continue;
    const double area = std::sqrt(area2);
    const double cot_a = (la * la + lab * lab - lb * lb) / (4.0 * area);  // at a, opposite the 0-b edge
    const double cot_b = (lb * lb + lab * lab - la * la) / (4.0 * area);  // at b, opposite the 0-a edge
    const double cot_o = (la * la + lb * lb - lab * lab) / (4.0 * area);  // at the origin
    w[a] += 0.5 * cot_b;
    w[b] += 0.5 * cot_a;
    if (cot_o < 0.0) {
      row.mass += 0.5 * area;
    } else if (cot_a < 0.0 || cot_b < 0.0) {
      row.mass += 0.25 * area;
    } else {
      row.mass += 0.125 * (la * la * cot_b + lb * lb * cot_a);
    }
  }
  for (std::size_t j = 0; j < w.size(); ++j) {
    if (w[j] > 0.0) row.weights.emplace_back(f.neighbors[j], w[j]);
  }
  std::sort(row.weights.begin(), row.weights.end());
  return row;
}

}  // namespace

LaplacianOperator build_laplacian(const PointCloud& cloud, const LaplacianParams& params) {
  const std::size_t n = cloud.size();
  if (params.k < 6) throw DomainError("laplacian: k must be at least 6");
  if (n < static_cast<std::size_t>(params.k) + 1) {
    throw DomainError("laplacian: cloud needs at least k + 1 points");
  }
  if (!(params.mollify >= 0.0)) throw DomainError("laplacian: mollify must be nonnegative");

  const KdTree index(cloud);
  LaplacianOperator op;
  op.spacing = mean_spacing(cloud);
  const double delta = params.mollify * op.spacing;

  std::vector<LocalRow> rows(n);
  std::vector<char> failed(n, 0);
  const std::size_t workers = params.workers == 0 ? default_workers() : params.workers;
  parallel_for(n, workers, [&](std::size_t i) {
    try {
      rows[i] = assemble_point(build_tangent_frame(cloud, index, i, params.k), delta);
      if (!(rows[i].mass > 0.0)) failed[i] = 1;
    } catch (const FrameError&) {
      failed[i] = 1;
    }
  });
  std::vector<std::size_t> bad;
  for (std::size_t i = 0; i < n; ++i) {
    if (failed[i]) bad.push_back(i);
  }
  if (!bad.empty()) {
    std::string list;
    for (std::size_t t = 0; t < std::min<std::size_t>(bad.size(), 10); ++t) {
      list += (t ? ", " : "") + std::to_string(bad[t]);
    }
    if (bad.size() > 10) list += ", ...";
    throw OperatorError("laplacian: no valid tangent frame at " + std::to_string(bad.size()) +
                            " point(s): " + list,
                        std::move(bad));
  }

  // Index-ordered merge keeps the result independent of the worker schedule.
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& [j, w] : rows[i].weights) {
      trip.emplace_back(static_cast<int>(i), static_cast<int>(j), 0.5 * w);
      trip.emplace_back(static_cast<int>(j), static_cast<int>(i), 0.5 * w);
    }
  }
  SparseMatrix wsym(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  wsym.setFromTriplets(trip.begin(), trip.end());

  std::vector<Eigen::Triplet<double>> st;
  st.reserve(static_cast<std::size_t>(wsym.nonZeros()) + n);
  for (Eigen::Index c = 0; c < wsym.outerSize(); ++c) {
    double diag = 0.0;
    for (SparseMatrix::InnerIterator it(wsym, c); it; ++it) {
      diag += it.value();
      st.emplace_back(static_cast<int>(it.row()), static_cast<int>(c), -it.value());
    }
    st.emplace_back(static_cast<int>(c), static_cast<int>(c), diag);
  }
  op.stiffness.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  op.stiffness.setFromTriplets(st.begin(), st.end());
  op.stiffness.makeCompressed();

  op.mass.resize(static_cast<Eigen::Index>(n));
  op.boundary.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    op.mass[static_cast<Eigen::Index>(i)] = rows[i].mass;
    op.boundary[i] = rows[i].boundary;
  }
  return op;
}

void export_operator(const LaplacianOperator& op, const std::filesystem::path& stiffness_path,
                     const std::filesystem::path& mass_path) {
  std::ofstream s(stiffness_path);
  std::ofstream m(mass_path);
  if (!s || !m) throw Error("cannot open operator export files for writing");
  char buf[96];
  for (Eigen::Index c = 0; c < op.stiffness.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator it(op.stiffness, c); it; ++it) {
      std::snprintf(buf, sizeof(buf), "%lld %lld %.17g\n", static_cast<long long>(it.row()),
                    static_cast<long long>(it.col()), it.value());
      s << buf;
    }
  }
  for (Eigen::Index i = 0; i < op.mass.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g\n", op.mass[i]);
    m << buf;
  }
}

LaplacianOperator import_operator(const std::filesystem::path& stiffness_path,
                                  const std::filesystem::path& mass_path) {
  std::ifstream m(mass_path);
  if (!m) throw DomainError("cannot open " + mass_path.string());
  std::vector<double> mass;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(m, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    double v = 0.0;
    if (!(ss >> v)) throw ParseError("bad mass entry", lineno);
    mass.push_back(v);
  }
  if (mass.empty()) throw DomainError("mass file is empty");
  const auto n = static_cast<Eigen::Index>(mass.size());

  std::ifstream s(stiffness_path);
  if (!s) throw DomainError("cannot open " + stiffness_path.string());
  std::vector<Eigen::Triplet<double>> trip;
  lineno = 0;
  while (std::getline(s, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    long long i = 0;
    long long j = 0;
    double v = 0.0;
    if (!(ss >> i >> j >> v) || i < 0 || j < 0 || i >= n || j >= n) {
      throw ParseError("bad triplet", lineno);
    }
    trip.emplace_back(static_cast<int>(i), static_cast<int>(j), v);
  }
  LaplacianOperator op;
  op.mass = Eigen::Map<const Eigen::VectorXd>(mass.data(), n);
  op.stiffness.resize(n, n);
  op.stiffness.setFromTriplets(trip.begin(), trip.end());
  op.stiffness.makeCompressed();
  op.boundary.assign(mass.size(), false);
  return op;
}

}  // namespace ergodic
