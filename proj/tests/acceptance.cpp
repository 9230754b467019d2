#include "ergodic/cga.hpp"
#include "ergodic/control.hpp"
#include "ergodic/fixtures.hpp"
#include "ergodic/harness.hpp"
#include "ergodic/kinematics.hpp"
#include "ergodic/laplacian.hpp"
#include "ergodic/motor.hpp"
#include "ergodic/parallel.hpp"
#include "ergodic/spectral.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

namespace {

using namespace ergodic;
using cga::Multivector;
namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), format, args...);
  return buf;
}

Field random_field(Eigen::Index n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Field f(n);
  for (Eigen::Index i = 0; i < n; ++i) f[i] = u(rng);
  return f;
}

Outcome operator_sanity() {
  struct Case {
    std::string name;
    PointCloud cloud;
  };
  const std::vector<Case> cases = {{"grid400", fixtures::grid(20, 20, 1.0)},
                                   {"grid900", fixtures::grid(30, 30, 1.0)},
                                   {"sphere1000", fixtures::fibonacci_sphere(1000, 50.0)},
                                   {"sphere2562", fixtures::icosphere(4, 50.0)}};
  Outcome out{true, ""};
  for (const Case& c : cases) {
    const LaplacianOperator op = build_laplacian(c.cloud);
    const Eigen::MatrixXd s(op.stiffness);
    const double scale = s.cwiseAbs().maxCoeff();
    const double row_sum = (s * Eigen::VectorXd::Ones(s.rows())).cwiseAbs().maxCoeff() / scale;
    const double asym = (s - s.transpose()).cwiseAbs().maxCoeff();
    const double min_mass = op.mass.minCoeff();
    const SpectralBasis b = compute_basis(op, 100);
    const Eigen::MatrixXd gram = b.eigenvectors.transpose() * op.mass.asDiagonal() * b.eigenvectors;
    const double ortho = (gram - Eigen::MatrixXd::Identity(b.modes(), b.modes())).cwiseAbs().maxCoeff();
    const bool ok = row_sum <= 1e-9 && asym <= 1e-12 && min_mass > 0.0 && ortho <= 1e-8;
    out.pass = out.pass && ok;
    out.detail += fmt("%s S1=%.1e asym=%.1e minM=%.2e PhiTMPhi-I=%.1e; ", c.name.c_str(), row_sum, asym, min_mass, ortho);
  }
  return out;
}

Outcome solver_equivalence() {
  const PointCloud cloud = fixtures::downsample_to(fixtures::wavy_sheet(40, 60.0), 500);
  const LaplacianOperator op = build_laplacian(cloud);
  const SpectralBasis b = compute_basis(op, static_cast<int>(op.size()));
  const ImplicitDiffusion imp(op);
  const Field u = random_field(static_cast<Eigen::Index>(op.size()), 11);
  Outcome out{true, fmt("n_P=%zu ", op.size())};
  for (double alpha : {1.0, 10.0, 100.0}) {
    const double tau = timestep(op.spacing, alpha);
    const Field a = imp.diffuse(u, tau);
    const double rel = (diffuse_spectral(b, u, tau, Decay::kImplicit) - a).norm() / a.norm();
    out.pass = out.pass && rel <= 1e-6;
    out.detail += fmt("alpha=%g rel=%.1e ", alpha, rel);
  }
  return out;
}

Outcome conservation() {
  const LaplacianOperator op = build_laplacian(fixtures::icosphere(3, 10.0));
  const ImplicitDiffusion imp(op);
  double worst_mass = 0.0, worst_excursion = -1e300;
  for (unsigned seed = 0; seed < 20; ++seed) {
    const Field u = random_field(static_cast<Eigen::Index>(op.size()), 100 + seed);
    const double total = op.mass.dot(u);
    for (double alpha : {1.0, 10.0, 100.0}) {
      const Field a = imp.diffuse(u, timestep(op.spacing, alpha));
      worst_mass = std::max(worst_mass, std::abs(op.mass.dot(a) - total) / std::abs(total));
      worst_excursion = std::max({worst_excursion, u.minCoeff() - a.minCoeff(), a.maxCoeff() - u.maxCoeff()});
    }
  }
  return {worst_mass <= 1e-8 && worst_excursion <= 1e-9,
          fmt("mass rel=%.1e, overshoot past [min u0, max u0]=%.1e (<= 0 means inside)", worst_mass, worst_excursion)};
}

Outcome cga_suite() {
  using namespace cga;
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto rv = [&](double s) { return Vec3(s * u(rng), s * u(rng), s * u(rng)); };

  double null_err = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Multivector x = embed_point(rv(100));
    null_err = std::max(null_err, std::abs(scalar_product(x, x)) / (1.0 + std::abs(x.max_abs())));
  }

  double sphere_err = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Vec3 c = rv(10.0);
    const double r = 1.0 + 5.0 * std::abs(u(rng));
    std::vector<Vec3> pts;
    for (int i = 0; i < 30; ++i) pts.push_back(c + r * rv(1.0).normalized());
    const Primitive s = fit_primitive(pts);
    sphere_err = std::max({sphere_err, (s.center() - c).norm(), std::abs(s.radius() - r)});
  }

  int ordering_violations = 0;
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    const double r = 2.0 + 0.1 * t;
    const Vec3 c = rv(10.0);
    std::vector<Vec3> pts;
    for (int i = 0; i < 40; ++i) {
      Vec3 d = rv(1.0);
      d.z() = std::abs(d.z()) + 0.5;
      pts.push_back(c + (r + 0.01 * r * noise(rng)) * d.normalized());
    }
    const Primitive s = fit_primitive(pts);
    const Primitive p = fit_plane(pts);
    if (fit_objective(pts, s, s.fit_vector) > fit_objective(pts, p, p.fit_vector) * (1.0 + 1e-12)) ++ordering_violations;
  }

  double proj_err = 0.0;
  {
    const Primitive plane = make_plane(Vec3::UnitZ(), 0.0);
    const Multivector above = embed_point(Vec3(3, -2, 5));
    proj_err = std::max(proj_err, (extract_point(split_pair(project_to_primitive(above, plane), above)) - Vec3(3, -2, 0)).norm());
    const Primitive sphere = make_sphere(Vec3::Zero(), 1.0);
    const Multivector p = embed_point(Vec3(0, 0, 2));
    proj_err = std::max(proj_err, (extract_point(split_pair(project_to_primitive(p, sphere), p)) - Vec3(0, 0, 1)).norm());
    const Multivector tie = project_to_primitive(embed_point(Vec3(2, 0, 0)), sphere);
    proj_err = std::max(proj_err, (extract_point(split_pair(tie, embed_point(Vec3::Zero()))) - Vec3(-1, 0, 0)).norm());
    for (int t = 0; t < 50; ++t) {
      const Vec3 x = rv(6.0);
      const Multivector px = embed_point(x);
      proj_err = std::max(proj_err, (extract_point(split_pair(project_to_primitive(px, sphere), px)) - x.normalized()).norm());
    }
  }

  double line_err = 0.0;
  for (int checked = 0; checked < 100;) {
    const Vec3 d1 = rv(1.0).normalized(), d2 = rv(1.0).normalized();
    if (d1.dot(d2) < -0.99) continue;
    const Multivector l1 = line_from_point_direction(rv(10.0), d1);
    const Multivector l2 = line_from_point_direction(rv(10.0), d2);
    line_err = std::max(line_err, (sandwich(motor_between_lines(l1, l2), l1) - l2).max_abs());
    ++checked;
  }
  const bool ok = null_err <= 1e-9 && sphere_err <= 1e-6 && ordering_violations == 0 && proj_err <= 1e-9 && line_err <= 1e-8;
  return {ok, fmt("null=%.1e sphere fit=%.1e residual-order violations=%d/50 projection=%.1e M L1 M~ - L2=%.1e", null_err,
                  sphere_err, ordering_violations, proj_err, line_err)};
}

struct BodyJacobian {
  Eigen::Matrix<double, 6, 7> body;
};

BodyJacobian classical_body_jacobian(const Eigen::VectorXd& q) {
  const auto dh = cga::panda_dh();
  const Eigen::Isometry3d pose = cga::dh_forward(dh, cga::panda_flange(), q);
  const Eigen::Matrix3d rt = pose.rotation().transpose();
  BodyJacobian j;
  for (int i = 0; i < 7; ++i) {
    const std::vector<cga::DhJoint> head(dh.begin(), dh.begin() + i + 1);
    const Eigen::Isometry3d frame = cga::dh_forward(head, Eigen::Isometry3d::Identity(), q.head(i + 1));
    const Vec3 z = frame.rotation().col(2);
    const Vec3 o = frame.translation();
    j.body.col(i) << rt * z, rt * (z.cross(pose.translation()) + o.cross(z));
  }
  return j;
}

Outcome kinematics_oracle() {
  const cga::KinematicChain chain = cga::panda_chain();
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  double fk_err = 0.0, jac_err = 0.0, fd_err = 0.0, torque_err = 0.0;
  for (int t = 0; t < 50; ++t) {
    Eigen::VectorXd q(7), qd(7);
    for (int i = 0; i < 7; ++i) q[i] = u(rng), qd[i] = 0.1 * u(rng);
    const Eigen::Isometry3d oracle = cga::dh_forward(cga::panda_dh(), cga::panda_flange(), q);
    const Multivector m = cga::forward_kinematics(chain, q);
    fk_err = std::max(fk_err, (cga::apply_motor(m, Vec3::Zero()) - oracle.translation()).norm());
    fk_err = std::max(fk_err, (cga::apply_motor(m, Vec3(0, 0, 100)) - oracle * Vec3(0, 0, 100)).norm());

    const auto jee = cga::ee_frame_jacobian(chain, q);
    const BodyJacobian cj = classical_body_jacobian(q);
    const double jscale = cj.body.cwiseAbs().maxCoeff();
    for (int i = 0; i < 7; ++i) {
      const cga::Twist b = cga::twist_components(jee[static_cast<std::size_t>(i)]);
      Eigen::Matrix<double, 6, 1> col;
      col << b.omega, b.v;
      jac_err = std::max(jac_err, (col - cj.body.col(i)).cwiseAbs().maxCoeff() / jscale);

      const double step = 1e-5;
      Eigen::VectorXd qp = q, qm = q;
      qp[i] += step;
      qm[i] -= step;
      const Multivector lp = cga::motor_log(m.reverse() * cga::forward_kinematics(chain, qp));
      const Multivector lm = cga::motor_log(m.reverse() * cga::forward_kinematics(chain, qm));
      const Multivector fd = (lp - lm) * (1.0 / (2.0 * step));
      fd_err = std::max(fd_err, (fd - jee[static_cast<std::size_t>(i)]).max_abs() / std::max(1.0, jee[static_cast<std::size_t>(i)].max_abs()));
    }

    const Multivector target = cga::normalize_line(
        cga::sandwich(cga::translator(Vec3(u(rng), u(rng), u(rng)) * 5.0) * cga::rotor(Vec3(u(rng), u(rng), 1.0), 0.2),
                      control::end_effector_line(chain, q)));
    const Multivector desired = control::wrench_from_coefficients((control::Vector6() << 0, 0, 0, 0, 0, 5).finished());
    const Multivector measured = control::wrench_from_coefficients(control::Vector6::Random());
    const auto outc = control::control_torques(chain, q, qd, target, desired, measured, control::ControllerGains{},
                                               control::WrenchPidState{});
    const control::Vector6 c = control::wrench_coefficients(outc.total_wrench);
    Eigen::Matrix<double, 6, 1> w;
    w << 0.5 * c[0], -0.5 * c[1], 0.5 * c[2], 0.5 * c[3], 0.5 * c[4], 0.5 * c[5];
    const Eigen::VectorXd classical = -cj.body.transpose() * w;
    torque_err = std::max(torque_err, (outc.torques - classical).cwiseAbs().maxCoeff() /
                                          std::max(1.0, classical.cwiseAbs().maxCoeff()));
  }
  const bool ok = fk_err <= 1e-9 && jac_err <= 1e-9 && fd_err <= 1e-6 && torque_err <= 1e-8;
  return {ok, fmt("FK position=%.1e mm, J_ee vs matrix=%.1e rel, J_ee vs FD=%.1e rel, torques vs -J^T w=%.1e rel", fk_err,
                  jac_err, fd_err, torque_err)};
}

std::string config_path(const std::string& name) { return std::string(ERGODIC_SOURCE_DIR) + "/configs/" + name; }

std::vector<std::uint64_t> ten_seeds() { return {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}; }

Outcome coverage_behavior() {
  const auto t0 = std::chrono::steady_clock::now();
  const ScenarioConfig base = load_config(config_path("grid_two_disks.json"));
  const auto cells = sweep(base, expand_grid("n_m=25,100"), ten_seeds(), default_workers());
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const SweepCell& m25 = cells[0];
  const SweepCell& m100 = cells[1];
  const auto below = std::count_if(m100.final_ergodicity.begin(), m100.final_ergodicity.end(), [](double e) { return e < 0.2; });
  const bool ok = m100.final_ergodicity.size() == 10 && m25.final_ergodicity.size() == 10 && below >= 9 &&
                  m100.median <= m25.median && secs < 600.0;
  return {ok, fmt("n_M=100: %ld/10 runs eps<0.2, median %.4f; n_M=25 median %.4f; %.1f s", static_cast<long>(below),
                  m100.median, m25.median, secs)};
}

Outcome failure_mode() {
  const ScenarioConfig base = load_config(config_path("concentrated_source.json"));
  const auto weak = sweep(base, {{"alpha=1", "n_m=25"}}, ten_seeds(), default_workers())[0];
  const auto strong = sweep(base, {{"alpha=50", "n_m=100"}}, ten_seeds(), default_workers())[0];
  const bool complete = weak.final_ergodicity.size() == 10 && strong.final_ergodicity.size() == 10;
  const bool ok = complete && weak.flagged >= 5 && strong.flagged == 0;
  return {ok, fmt("alpha=1,n_M=25 flagged %d/10 (median eps %.3f); alpha=50,n_M=100 flagged %d/10 (median eps %.3f)",
                  weak.flagged, weak.median, strong.flagged, strong.median)};
}

double seconds_of(const std::vector<BenchmarkRow>& rows, std::size_t index, const std::string& method) {
  std::vector<std::size_t> sizes;
  for (const auto& r : rows) {
    if (std::find(sizes.begin(), sizes.end(), r.n_points) == sizes.end()) sizes.push_back(r.n_points);
  }
  for (const auto& r : rows) {
    if (r.n_points == sizes[index] && r.method == method) return r.seconds;
  }
  return std::nan("");
}

Outcome complexity_ordering() {
  BenchmarkOptions o;
  o.sizes = {2000, 4000};
  o.repetitions = 3;
  o.mode = "preprocess";
  const auto pre = benchmark(o);
  o.mode = "diffuse";
  o.repetitions = 5;
  const auto dif = benchmark(o);
  const double spectral = seconds_of(pre, 1, "spectral") / seconds_of(pre, 0, "spectral");
  const double dense = seconds_of(pre, 1, "implicit-dense") / seconds_of(pre, 0, "implicit-dense");
  const double sparse = seconds_of(pre, 1, "implicit") / seconds_of(pre, 0, "implicit");
  const double step = seconds_of(dif, 1, "spectral") / seconds_of(dif, 0, "spectral");
  const bool ok = spectral < dense && step <= 2.2;
  return {ok, fmt("preprocess growth 2k->4k: spectral %.2f, dense factorization %.2f (sparse %.2f); diffuse_spectral %.2f",
                  spectral, dense, sparse, step)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "ergodic_acceptance_determinism";
  fs::remove_all(dir);
  const std::string cmd = std::string(ERGODIC_CLI) + " simulate " + config_path("grid_two_disks.json") + " --set seed=7 -o ";
  const int a = std::system((cmd + (dir / "a").string() + " > /dev/null").c_str());
  const int b = std::system((cmd + (dir / "b").string() + " > /dev/null").c_str());
  const std::string ta = slurp(dir / "a" / "trace.csv");
  const std::string tb = slurp(dir / "b" / "trace.csv");
  const bool ok = a == 0 && b == 0 && !ta.empty() && ta == tb;
  const std::string detail = fmt("exit %d/%d, %zu bytes, identical=%s", a, b, ta.size(), ta == tb ? "yes" : "no");
  fs::remove_all(dir);
  return {ok, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"operator sanity", operator_sanity},   {"solver equivalence", solver_equivalence},
      {"conservation and maximum principle", conservation}, {"CGA geometry", cga_suite},
      {"kinematics oracle", kinematics_oracle}, {"coverage behavior", coverage_behavior},
      {"failure-mode reproduction", failure_mode}, {"complexity ordering", complexity_ordering},
      {"determinism", determinism}};
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %zu %s: %s [%.1f s] %s\n", k + 1, criteria[k].first.c_str(), o.pass ? "PASS" : "FAIL", secs,
                o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
