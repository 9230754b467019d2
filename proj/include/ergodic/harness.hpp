#pragma once

#include "ergodic/coverage.hpp"
#include "ergodic/fixtures.hpp"
#include "ergodic/laplacian.hpp"
#include "ergodic/spectral.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ergodic {

using Json = nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

/// Where the cloud comes from: a file, or a generated fixture.
struct CloudSpec {
  std::string path;
  /// "grid", "icosphere", "fibonacci", "sheet"; empty when `path` is used.
  std::string fixture;
  int nx = 30;
  int ny = 30;
  double spacing = 2.0;
  int level = 4;
  int count = 1000;
  double radius = 1.0;
  double extent = 60.0;
};

struct TargetSpec {
  /// "column" (cloud's own p), "disks", "file" (one value per line), "uniform".
  std::string type = "disks";
  std::vector<fixtures::Disk> disks;
  std::string path;
};

struct StartSpec {
  /// "random": uniform cloud point; "point": nearest cloud point to `position`;
  /// "far": random point among those at >= `far_fraction` of the maximal
  /// geodesic distance from the target's peak.
  std::string mode = "random";
  Vec3 position = Vec3::Zero();
  double far_fraction = 0.9;
};

struct ScenarioConfig {
  CloudSpec cloud;
  TargetSpec target;
  StartSpec start;
  int n_modes = 100;
  double alpha = 10.0;
  double agent_radius = 7.5;
  double v_max = 3.0;
  double a_max = 3.0;
  double dt = 0.1;
  double epsilon = 2.0;
  /// Acceleration per unit gradient of the peak-normalized potential [mm^2/s^2].
  double gradient_gain = 1000.0;
  int steps = 1000;
  double threshold = 0.05;
  std::uint64_t seed = 0;
  std::string solver = "spectral";
  /// Spectral mode weights: "implicit" or "exponential".
  std::string decay = "exponential";
  LaplacianParams laplacian;
  SpectralParams spectral;
  std::string output;
};

/// Parses and validates; throws ConfigError with the offending field.
ScenarioConfig config_from_json(const Json& j);
Json config_to_json(const ScenarioConfig& c);
ScenarioConfig load_config(const std::filesystem::path& path);
void validate_config(const ScenarioConfig& c);

/// Applies "key=value" overrides; keys are top-level config fields, with
/// dotted paths for nested ones (e.g. "laplacian.k=10"). Values are parsed as JSON
/// when possible, else taken as strings.
ScenarioConfig apply_overrides(const ScenarioConfig& base, const std::vector<std::string>& overrides);

PointCloud make_cloud(const CloudSpec& spec);
Field make_target(const TargetSpec& spec, const PointCloud& cloud);

/// Operator, basis and index shared by runs on the same cloud and preprocessing.
struct Prepared {
  PointCloud cloud;
  KdTree index;
  LaplacianOperator op;
  std::optional<SpectralBasis> basis;
  std::unique_ptr<ImplicitDiffusion> implicit;
  Decay decay = Decay::kExponential;
  double laplacian_seconds = 0.0;
  double basis_seconds = 0.0;

  Prepared(PointCloud c, LaplacianOperator o);
  Field diffuse(const Field& u0, double tau) const;
};

std::shared_ptr<Prepared> prepare(const ScenarioConfig& config);

struct TraceRecord {
  long step = 0;
  Vec3 position = Vec3::Zero();
  double speed = 0.0;
  double ergodicity = 0.0;
  double source_l1 = 0.0;
};

struct RunSummary {
  double initial_ergodicity = 0.0;
  double final_ergodicity = 0.0;
  long steps = 0;
  bool converged = false;
  bool flagged = false;
  int reseeds = 0;
  int pullbacks = 0;
  double preprocess_seconds = 0.0;
  double loop_seconds = 0.0;
  double total_seconds = 0.0;
};

struct RunTrace {
  std::vector<TraceRecord> records;
  RunSummary summary;
  Json config;
  Field coverage;
  Field target;
};

/// Runs with preprocessing done by the caller (shared across runs).
RunTrace run_scenario(const ScenarioConfig& config, const Prepared& prepared);
/// Preprocesses and runs.
RunTrace run_scenario(const ScenarioConfig& config);

/// Flag threshold for infeasible runs (epsilon at cap).
inline constexpr double kInfeasibleEpsilon = 0.5;

std::string trace_csv(const RunTrace& trace);
Json summary_json(const RunTrace& trace);
/// Writes trace.csv, summary.json and fields.csv into `dir`.
void write_run(const RunTrace& trace, const std::filesystem::path& dir);

struct SweepCell {
  std::vector<std::string> overrides;
  std::vector<std::uint64_t> seeds;
  std::vector<double> final_ergodicity;  // successful runs only, seed order
  std::vector<std::string> failures;
  int flagged = 0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
};

/// Parses "a=1,2;b=x,y" into the cross product of override lists.
std::vector<std::vector<std::string>> expand_grid(const std::string& grid);

/// Runs every grid cell for every seed, up to `workers` runs at once. Runs on
/// the same cloud and preprocessing share one Prepared. Per-run outputs go to
/// `<output>/<cell>/seed-<s>/` when the base config names an output directory.
std::vector<SweepCell> sweep(const ScenarioConfig& base, const std::vector<std::vector<std::string>>& grid,
                             const std::vector<std::uint64_t>& seeds, std::size_t workers);
Json sweep_json(const std::vector<SweepCell>& cells);

/// Linear-interpolated quantile of a nonempty sample.
double quantile(std::vector<double> values, double q);

struct BenchmarkRow {
  std::size_t n_points = 0;
  int n_modes = 0;
  std::string method;
  std::string phase;
  double seconds = 0.0;
};

struct BenchmarkOptions {
  std::vector<std::size_t> sizes = {1000, 2000, 4000, 8000};
  int n_modes = 100;
  /// "preprocess" or "diffuse".
  std::string mode = "preprocess";
  int repetitions = 5;
  double alpha = 10.0;
  /// Dense route skipped above this many points.
  std::size_t dense_limit = 9000;
};

/// Timings on the wavy-sheet fixture voxel-filtered to each size. Preprocess
/// mode times the Lanczos basis against the dense (M + tau S)^-1 M inverse;
/// diffuse mode times one diffusion with each method. Medians of
/// `repetitions` samples after one discarded warmup; samples of all sizes and
/// methods are taken in interleaved rounds.
std::vector<BenchmarkRow> benchmark(const BenchmarkOptions& options);
Json benchmark_json(const std::vector<BenchmarkRow>& rows);

}  // namespace ergodic
