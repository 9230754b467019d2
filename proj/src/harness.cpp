#include "ergodic/harness.hpp"

#include "ergodic/errors.hpp"
#include "ergodic/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <queue>
#include <random>
#include <set>
#include <sstream>

namespace ergodic {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Vec3 vec3_from_json(const Json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(field + ": expected an array of 3 numbers");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

Json vec3_to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

void reject_unknown(const Json& j, const std::set<std::string>& known, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) throw ConfigError(where + ": unknown field '" + it.key() + "'");
  }
}

template <typename T>
void read(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Geodesic distances along the operator's edges from `source` (Dijkstra).
std::vector<double> graph_distances(const PointCloud& cloud, const LaplacianOperator& op, std::size_t source) {
  const std::size_t n = cloud.size();
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[source] = 0.0;
  heap.emplace(0.0, source);
  while (!heap.empty()) {
    const auto [d, i] = heap.top();
    heap.pop();
    if (d > dist[i]) continue;
    for (SparseMatrix::InnerIterator it(op.stiffness, static_cast<Eigen::Index>(i)); it; ++it) {
      const auto j = static_cast<std::size_t>(it.row());
      if (j == i) continue;
      const double nd = d + (cloud.position(i) - cloud.position(j)).norm();
      if (nd < dist[j]) {
        dist[j] = nd;
        heap.emplace(nd, j);
      }
    }
  }
  return dist;
}

Vec3 start_position(const ScenarioConfig& c, const Prepared& prep, const Field& target) {
  const PointCloud& cloud = prep.cloud;
  std::mt19937_64 rng(c.seed);
  if (c.start.mode == "point") return cloud.position(prep.index.nearest(c.start.position));
  if (c.start.mode == "random") {
    std::uniform_int_distribution<std::size_t> pick(0, cloud.size() - 1);
    return cloud.position(pick(rng));
  }
  Eigen::Index peak = 0;
  target.maxCoeff(&peak);
  const std::vector<double> dist = graph_distances(cloud, prep.op, static_cast<std::size_t>(peak));
  double dmax = 0.0;
  for (double d : dist) {
    if (std::isfinite(d)) dmax = std::max(dmax, d);
  }
  std::vector<std::size_t> far;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (std::isfinite(dist[i]) && dist[i] >= c.start.far_fraction * dmax) far.push_back(i);
  }
  std::uniform_int_distribution<std::size_t> pick(0, far.size() - 1);
  return cloud.position(far[pick(rng)]);
}

}  // namespace

// ---------------------------------------------------------------- config

ScenarioConfig config_from_json(const Json& j) {
  ScenarioConfig c;
  try {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    reject_unknown(j,
                   {"cloud", "target", "start", "n_m", "alpha", "r_a", "v_max", "a_max", "dt", "epsilon",
                    "gradient_gain", "steps", "threshold", "seed", "solver", "decay", "laplacian", "spectral",
                    "output"},
                   "config");
    if (!j.contains("cloud")) throw ConfigError("config: 'cloud' is required");
    const Json& cj = j.at("cloud");
    if (cj.is_string()) {
      c.cloud.path = cj.get<std::string>();
    } else if (cj.is_object()) {
      reject_unknown(cj, {"path", "fixture", "nx", "ny", "spacing", "level", "count", "radius", "extent"}, "cloud");
      read(cj, "path", c.cloud.path);
      read(cj, "fixture", c.cloud.fixture);
      read(cj, "nx", c.cloud.nx);
      read(cj, "ny", c.cloud.ny);
      read(cj, "spacing", c.cloud.spacing);
      read(cj, "level", c.cloud.level);
      read(cj, "count", c.cloud.count);
      read(cj, "radius", c.cloud.radius);
      read(cj, "extent", c.cloud.extent);
    } else {
      throw ConfigError("cloud: expected a path or an object");
    }
    if (j.contains("target")) {
      const Json& tj = j.at("target");
      reject_unknown(tj, {"type", "disks", "path"}, "target");
      read(tj, "type", c.target.type);
      read(tj, "path", c.target.path);
      if (tj.contains("disks")) {
        for (const Json& dj : tj.at("disks")) {
          reject_unknown(dj, {"center", "radius", "mass"}, "target.disks");
          fixtures::Disk d;
          d.center = vec3_from_json(dj.at("center"), "target.disks.center");
          read(dj, "radius", d.radius);
          read(dj, "mass", d.mass);
          c.target.disks.push_back(d);
        }
      }
    }
    if (j.contains("start")) {
      const Json& sj = j.at("start");
      reject_unknown(sj, {"mode", "position", "far_fraction"}, "start");
      read(sj, "mode", c.start.mode);
      if (sj.contains("position")) c.start.position = vec3_from_json(sj.at("position"), "start.position");
      read(sj, "far_fraction", c.start.far_fraction);
    }
    read(j, "n_m", c.n_modes);
    read(j, "alpha", c.alpha);
    read(j, "r_a", c.agent_radius);
    read(j, "v_max", c.v_max);
    read(j, "a_max", c.a_max);
    read(j, "dt", c.dt);
    read(j, "epsilon", c.epsilon);
    read(j, "gradient_gain", c.gradient_gain);
    read(j, "steps", c.steps);
    read(j, "threshold", c.threshold);
    read(j, "seed", c.seed);
    read(j, "solver", c.solver);
    read(j, "decay", c.decay);
    read(j, "output", c.output);
    if (j.contains("laplacian")) {
      const Json& lj = j.at("laplacian");
      reject_unknown(lj, {"k", "mollify", "workers"}, "laplacian");
      read(lj, "k", c.laplacian.k);
      read(lj, "mollify", c.laplacian.mollify);
      read(lj, "workers", c.laplacian.workers);
    }
    if (j.contains("spectral")) {
      const Json& sj = j.at("spectral");
      reject_unknown(sj, {"tolerance", "iteration_factor", "seed", "block_size"}, "spectral");
      read(sj, "tolerance", c.spectral.tolerance);
      read(sj, "iteration_factor", c.spectral.iteration_factor);
      read(sj, "seed", c.spectral.seed);
      read(sj, "block_size", c.spectral.block_size);
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  validate_config(c);
  return c;
}

Json config_to_json(const ScenarioConfig& c) {
  Json j;
  if (c.cloud.fixture.empty()) {
    j["cloud"] = c.cloud.path;
  } else {
    j["cloud"] = {{"fixture", c.cloud.fixture}, {"nx", c.cloud.nx},         {"ny", c.cloud.ny},
                  {"spacing", c.cloud.spacing}, {"level", c.cloud.level},   {"count", c.cloud.count},
                  {"radius", c.cloud.radius},   {"extent", c.cloud.extent}};
  }
  Json disks = Json::array();
  for (const auto& d : c.target.disks) {
    disks.push_back({{"center", vec3_to_json(d.center)}, {"radius", d.radius}, {"mass", d.mass}});
  }
  j["target"] = {{"type", c.target.type}, {"disks", disks}, {"path", c.target.path}};
  j["start"] = {{"mode", c.start.mode},
                {"position", vec3_to_json(c.start.position)},
                {"far_fraction", c.start.far_fraction}};
  j["n_m"] = c.n_modes;
  j["alpha"] = c.alpha;
  j["r_a"] = c.agent_radius;
  j["v_max"] = c.v_max;
  j["a_max"] = c.a_max;
  j["dt"] = c.dt;
  j["epsilon"] = c.epsilon;
  j["gradient_gain"] = c.gradient_gain;
  j["steps"] = c.steps;
  j["threshold"] = c.threshold;
  j["seed"] = c.seed;
  j["solver"] = c.solver;
  j["decay"] = c.decay;
  j["laplacian"] = {{"k", c.laplacian.k}, {"mollify", c.laplacian.mollify}, {"workers", c.laplacian.workers}};
  j["spectral"] = {{"tolerance", c.spectral.tolerance},
                   {"iteration_factor", c.spectral.iteration_factor},
                   {"seed", c.spectral.seed},
                   {"block_size", c.spectral.block_size}};
  j["output"] = c.output;
  return j;
}

void validate_config(const ScenarioConfig& c) {
  const auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(c.cloud.path.empty() != c.cloud.fixture.empty(), "cloud: give exactly one of path or fixture");
  if (!c.cloud.fixture.empty()) {
    static const std::set<std::string> kFixtures = {"grid", "icosphere", "fibonacci", "sheet"};
    require(kFixtures.count(c.cloud.fixture) == 1, "cloud.fixture: unknown fixture '" + c.cloud.fixture + "'");
  }
  static const std::set<std::string> kTargets = {"column", "disks", "file", "uniform"};
  require(kTargets.count(c.target.type) == 1, "target.type: unknown type '" + c.target.type + "'");
  require(c.target.type != "disks" || !c.target.disks.empty(), "target.disks: at least one disk required");
  for (const auto& d : c.target.disks) {
    require(d.radius > 0.0 && d.mass >= 0.0, "target.disks: radius must be positive and mass nonnegative");
  }
  require(c.target.type != "file" || !c.target.path.empty(), "target.path: required for file targets");
  static const std::set<std::string> kStarts = {"random", "point", "far"};
  require(kStarts.count(c.start.mode) == 1, "start.mode: unknown mode '" + c.start.mode + "'");
  require(c.start.far_fraction > 0.0 && c.start.far_fraction <= 1.0, "start.far_fraction must lie in (0, 1]");
  require(c.n_modes >= 1, "n_m must be >= 1");
  require(c.alpha > 0.0, "alpha must be positive");
  require(c.agent_radius > 0.0, "r_a must be positive");
  require(c.v_max > 0.0 && c.a_max > 0.0, "v_max and a_max must be positive");
  require(c.dt > 0.0, "dt must be positive");
  require(c.epsilon > 0.0, "epsilon must be positive");
  require(c.gradient_gain >= 0.0, "gradient_gain must be nonnegative");
  require(c.steps >= 1, "steps must be >= 1");
  require(c.threshold >= 0.0, "threshold must be nonnegative");
  require(c.solver == "spectral" || c.solver == "implicit", "solver must be 'spectral' or 'implicit'");
  require(c.decay == "implicit" || c.decay == "exponential", "decay must be 'implicit' or 'exponential'");
  require(c.laplacian.k >= 6, "laplacian.k must be >= 6");
  require(c.laplacian.mollify >= 0.0, "laplacian.mollify must be nonnegative");
  require(c.spectral.tolerance > 0.0 && c.spectral.iteration_factor >= 1, "spectral settings must be positive");
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  const auto base = path.parent_path();
  const auto resolve = [&](Json& node) {
    if (node.is_string() && !node.get<std::string>().empty()) {
      const std::filesystem::path p = node.get<std::string>();
      if (p.is_relative()) node = (base / p).lexically_normal().string();
    }
  };
  if (j.is_object() && j.contains("cloud")) {
    if (j["cloud"].is_string()) resolve(j["cloud"]);
    if (j["cloud"].is_object() && j["cloud"].contains("path")) resolve(j["cloud"]["path"]);
  }
  if (j.is_object() && j.contains("target") && j["target"].is_object() && j["target"].contains("path")) {
    resolve(j["target"]["path"]);
  }
  return config_from_json(j);
}

ScenarioConfig apply_overrides(const ScenarioConfig& base, const std::vector<std::string>& overrides) {
  Json j = config_to_json(base);
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + o + "' is not key=value");
    std::string key = o.substr(0, eq);
    const std::string text = o.substr(eq + 1);
    Json value;
    try {
      value = Json::parse(text);
    } catch (const Json::exception&) {
      value = text;
    }
    std::replace(key.begin(), key.end(), '.', '/');
    if (key.rfind("cloud/", 0) == 0 && j["cloud"].is_string()) {
      j["cloud"] = Json{{"path", j["cloud"]}};
    }
    j[Json::json_pointer("/" + key)] = value;
  }
  return config_from_json(j);
}

// ---------------------------------------------------------------- inputs

PointCloud make_cloud(const CloudSpec& s) {
  if (!s.path.empty()) return load_cloud(s.path);
  if (s.fixture == "grid") return fixtures::grid(s.nx, s.ny, s.spacing);
  if (s.fixture == "icosphere") return fixtures::icosphere(s.level, s.radius);
  if (s.fixture == "fibonacci") return fixtures::fibonacci_sphere(s.count, s.radius);
  if (s.fixture == "sheet") return fixtures::wavy_sheet(s.nx, s.extent);
  throw ConfigError("unknown cloud fixture '" + s.fixture + "'");
}

Field make_target(const TargetSpec& spec, const PointCloud& cloud) {
  const auto n = static_cast<Eigen::Index>(cloud.size());
  Field p(n);
  if (spec.type == "uniform") {
    p.setOnes();
  } else if (spec.type == "column") {
    if (!cloud.has_target()) throw ConfigError("target.type 'column' but the cloud has no p column");
    for (Eigen::Index i = 0; i < n; ++i) p[i] = cloud.target()[static_cast<std::size_t>(i)];
  } else if (spec.type == "disks") {
    const auto v = fixtures::painted_disks(cloud, spec.disks);
    for (Eigen::Index i = 0; i < n; ++i) p[i] = v[static_cast<std::size_t>(i)];
  } else if (spec.type == "file") {
    std::ifstream in(spec.path);
    if (!in) throw ConfigError("cannot open target file " + spec.path);
    std::vector<double> v;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        std::size_t used = 0;
        v.push_back(std::stod(line, &used));
      } catch (const std::exception&) {
        throw ParseError("target value is not a number", lineno);
      }
    }
    if (v.size() != cloud.size()) {
      throw ConfigError("target file has " + std::to_string(v.size()) + " values for " +
                        std::to_string(cloud.size()) + " points");
    }
    for (Eigen::Index i = 0; i < n; ++i) p[i] = v[static_cast<std::size_t>(i)];
  } else {
    throw ConfigError("unknown target type '" + spec.type + "'");
  }
  if ((p.array() < 0.0).any() || !(p.sum() > 0.0)) {
    throw ConfigError("target must be nonnegative with positive total mass on this cloud");
  }
  return p;
}

// ---------------------------------------------------------------- runs

Prepared::Prepared(PointCloud c, LaplacianOperator o) : cloud(std::move(c)), index(cloud), op(std::move(o)) {}

Field Prepared::diffuse(const Field& u0, double tau) const {
  if (basis) return diffuse_spectral(*basis, u0, tau, decay);
  return implicit->diffuse(u0, tau);
}

std::shared_ptr<Prepared> prepare(const ScenarioConfig& config) {
  validate_config(config);
  PointCloud cloud = make_cloud(config.cloud);
  const auto t0 = Clock::now();
  LaplacianOperator op = build_laplacian(cloud, config.laplacian);
  const double t_lap = seconds_since(t0);
  auto prep = std::make_shared<Prepared>(std::move(cloud), std::move(op));
  prep->laplacian_seconds = t_lap;
  const auto t1 = Clock::now();
  if (config.solver == "spectral") {
    if (static_cast<std::size_t>(config.n_modes) > prep->op.size()) {
      throw ConfigError("n_m exceeds the number of cloud points");
    }
    prep->basis = compute_basis(prep->op, config.n_modes, config.spectral);
    prep->decay = decay_from_string(config.decay);
  } else {
    prep->implicit = std::make_unique<ImplicitDiffusion>(prep->op);
  }
  prep->basis_seconds = seconds_since(t1);
  return prep;
}

RunTrace run_scenario(const ScenarioConfig& config, const Prepared& prep) {
  validate_config(config);
  const auto t_start = Clock::now();
  const PointCloud& cloud = prep.cloud;
  const double h = prep.op.spacing;
  const double tau = timestep(h, config.alpha);

  RunTrace trace;
  trace.config = config_to_json(config);
  const Field target = make_target(config.target, cloud);
  CoverageState state = make_coverage_state(target, prep.op.mass, config.dt);
  trace.target = state.target;
  trace.summary.initial_ergodicity = ergodicity(state);

  AgentState agent;
  agent.radius = config.agent_radius;
  agent.v_max = config.v_max;
  agent.a_max = config.a_max;
  agent.position = start_position(config, prep, state.target);
  Neighborhood nbh = project_agent(cloud, prep.index, agent, h);
  agent.position = nbh.projected;

  for (long t = 0; t < config.steps; ++t) {
    const std::vector<double> w = footprint_weights(nbh, config.epsilon);
    accumulate_coverage(state, nbh, w, prep.op.mass);
    const Field s = source_term(state);
    const double eps = ergodicity(state);
    trace.records.push_back({t, agent.position, agent.velocity.norm(), eps, s.lpNorm<1>()});
    if (eps < config.threshold) {
      trace.summary.converged = true;
      break;
    }
    if (t + 1 == config.steps) break;

    const Field u = prep.diffuse(s, tau);
    const double peak = u.cwiseAbs().maxCoeff();
    Vec3 accel = Vec3::Zero();
    if (peak > 0.0) accel = config.gradient_gain * estimate_gradient(u / peak, cloud, nbh, w);

    try {
      AgentStep step = step_agent(agent, accel, config.dt, cloud, prep.index, h);
      agent = step.agent;
      nbh = std::move(step.neighborhood);
      if (step.clamped) ++trace.summary.pullbacks;
    } catch (const LostAgentError&) {
      ++trace.summary.reseeds;
      agent.position = cloud.position(prep.index.nearest(agent.position));
      agent.velocity.setZero();
      nbh = project_agent(cloud, prep.index, agent, h);
      agent.position = nbh.projected;
    }
  }
  trace.coverage = state.coverage;
  trace.summary.steps = static_cast<long>(trace.records.size());
  trace.summary.final_ergodicity = trace.records.back().ergodicity;
  trace.summary.flagged = !trace.summary.converged && trace.summary.final_ergodicity > kInfeasibleEpsilon;
  trace.summary.loop_seconds = seconds_since(t_start);
  trace.summary.preprocess_seconds = prep.laplacian_seconds + prep.basis_seconds;
  trace.summary.total_seconds = trace.summary.preprocess_seconds + trace.summary.loop_seconds;
  return trace;
}

RunTrace run_scenario(const ScenarioConfig& config) {
  const auto t0 = Clock::now();
  const auto prep = prepare(config);
  const double pre = seconds_since(t0);
  RunTrace trace = run_scenario(config, *prep);
  trace.summary.preprocess_seconds = pre;
  trace.summary.total_seconds = seconds_since(t0);
  return trace;
}

std::string trace_csv(const RunTrace& trace) {
  std::ostringstream out;
  out << "step,x,y,z,speed,ergodicity,source_l1\n";
  for (const TraceRecord& r : trace.records) {
    out << r.step << ',' << fmt(r.position.x()) << ',' << fmt(r.position.y()) << ',' << fmt(r.position.z()) << ','
        << fmt(r.speed) << ',' << fmt(r.ergodicity) << ',' << fmt(r.source_l1) << '\n';
  }
  return out.str();
}

Json summary_json(const RunTrace& trace) {
  const RunSummary& s = trace.summary;
  return {{"version", kVersion},
          {"initial_ergodicity", s.initial_ergodicity},
          {"final_ergodicity", s.final_ergodicity},
          {"steps", s.steps},
          {"converged", s.converged},
          {"flagged", s.flagged},
          {"reseeds", s.reseeds},
          {"pullbacks", s.pullbacks},
          {"seconds", {{"preprocess", s.preprocess_seconds}, {"loop", s.loop_seconds}, {"total", s.total_seconds}}},
          {"config", trace.config}};
}

void write_run(const RunTrace& trace, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw Error("cannot write " + (dir / name).string());
    out << text;
  };
  write("trace.csv", trace_csv(trace));
  write("summary.json", summary_json(trace).dump(2) + "\n");
  std::ostringstream fields;
  fields << "index,target,coverage\n";
  for (Eigen::Index i = 0; i < trace.coverage.size(); ++i) {
    fields << i << ',' << fmt(trace.target[i]) << ',' << fmt(trace.coverage[i]) << '\n';
  }
  write("fields.csv", fields.str());
}

// ---------------------------------------------------------------- sweep

std::vector<std::vector<std::string>> expand_grid(const std::string& grid) {
  std::vector<std::vector<std::string>> cells = {{}};
  std::stringstream axes(grid);
  std::string axis;
  while (std::getline(axes, axis, ';')) {
    if (axis.empty()) continue;
    const auto eq = axis.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("grid axis '" + axis + "' is not key=v1,v2");
    const std::string key = axis.substr(0, eq);
    std::vector<std::string> values;
    std::stringstream vs(axis.substr(eq + 1));
    std::string v;
    while (std::getline(vs, v, ',')) values.push_back(v);
    if (values.empty()) throw ConfigError("grid axis '" + key + "' has no values");
    std::vector<std::vector<std::string>> next;
    for (const auto& cell : cells) {
      for (const auto& value : values) {
        auto c = cell;
        c.push_back(key + "=" + value);
        next.push_back(std::move(c));
      }
    }
    cells = std::move(next);
  }
  return cells;
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw DomainError("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::vector<SweepCell> sweep(const ScenarioConfig& base, const std::vector<std::vector<std::string>>& grid,
                             const std::vector<std::uint64_t>& seeds, std::size_t workers) {
  if (grid.empty() || seeds.empty()) throw ConfigError("sweep needs at least one cell and one seed");
  std::vector<ScenarioConfig> cell_configs;
  for (const auto& overrides : grid) cell_configs.push_back(apply_overrides(base, overrides));

  // One preprocessing per distinct (cloud, laplacian, solver, n_M) combination.
  std::map<std::string, std::shared_ptr<Prepared>> prepared;
  std::vector<std::string> keys;
  for (const auto& c : cell_configs) {
    Json k = config_to_json(c);
    const std::string key = Json{k["cloud"], k["laplacian"], k["spectral"], c.solver, c.decay,
                                 c.solver == "spectral" ? c.n_modes : 0}
                                .dump();
    keys.push_back(key);
    if (!prepared.count(key)) prepared[key] = nullptr;
  }
  std::vector<std::string> unique;
  for (const auto& [k, v] : prepared) unique.push_back(k);
  std::vector<std::string> prep_errors(unique.size());
  parallel_for(unique.size(), workers, [&](std::size_t u) {
    const std::size_t cell = static_cast<std::size_t>(std::find(keys.begin(), keys.end(), unique[u]) - keys.begin());
    try {
      prepared.at(unique[u]) = prepare(cell_configs[cell]);
    } catch (const std::exception& e) {
      prep_errors[u] = e.what();
    }
  });

  struct Job {
    std::size_t cell;
    std::size_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < cell_configs.size(); ++c) {
    for (std::size_t s = 0; s < seeds.size(); ++s) jobs.push_back({c, s});
  }
  std::vector<std::optional<RunSummary>> results(jobs.size());
  std::vector<std::string> errors(jobs.size());
  parallel_for(jobs.size(), workers, [&](std::size_t j) {
    const Job& job = jobs[j];
    ScenarioConfig cfg = cell_configs[job.cell];
    cfg.seed = seeds[job.seed];
    const auto& prep = prepared.at(keys[job.cell]);
    if (!prep) {
      const auto u = static_cast<std::size_t>(std::find(unique.begin(), unique.end(), keys[job.cell]) - unique.begin());
      errors[j] = "preprocessing failed: " + prep_errors[u];
      return;
    }
    try {
      RunTrace trace = run_scenario(cfg, *prep);
      if (!base.output.empty()) {
        std::string name = "cell-" + std::to_string(job.cell);
        write_run(trace, std::filesystem::path(base.output) / name / ("seed-" + std::to_string(cfg.seed)));
      }
      results[j] = trace.summary;
    } catch (const std::exception& e) {
      errors[j] = e.what();
    }
  });

  std::vector<SweepCell> cells(cell_configs.size());
  for (std::size_t c = 0; c < cells.size(); ++c) cells[c].overrides = grid[c];
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    SweepCell& cell = cells[jobs[j].cell];
    if (results[j]) {
      cell.seeds.push_back(seeds[jobs[j].seed]);
      cell.final_ergodicity.push_back(results[j]->final_ergodicity);
      if (results[j]->flagged) ++cell.flagged;
    } else {
      cell.failures.push_back("seed " + std::to_string(seeds[jobs[j].seed]) + ": " + errors[j]);
    }
  }
  for (SweepCell& cell : cells) {
    if (cell.final_ergodicity.empty()) continue;
    cell.median = quantile(cell.final_ergodicity, 0.5);
    cell.q1 = quantile(cell.final_ergodicity, 0.25);
    cell.q3 = quantile(cell.final_ergodicity, 0.75);
  }
  return cells;
}

Json sweep_json(const std::vector<SweepCell>& cells) {
  Json out = Json::array();
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const SweepCell& cell = cells[c];
    Json runs = Json::array();
    for (std::size_t k = 0; k < cell.seeds.size(); ++k) {
      runs.push_back({{"seed", cell.seeds[k]}, {"final_ergodicity", cell.final_ergodicity[k]}});
    }
    Json row = {{"cell", c},
                {"overrides", cell.overrides},
                {"runs", runs},
                {"failures", cell.failures},
                {"flagged", cell.flagged}};
    if (!cell.final_ergodicity.empty()) {
      row["median"] = cell.median;
      row["q1"] = cell.q1;
      row["q3"] = cell.q3;
    }
    out.push_back(row);
  }
  return out;
}

// ---------------------------------------------------------------- benchmark

namespace {

/// Per-callable medians over `reps` rounds after one warmup each. Every round
/// samples every callable in turn, so slow drift of the machine affects all of
/// them alike. Each sample repeats its callable enough times to last ~20 ms.
std::vector<double> time_medians(int reps, const std::vector<std::function<void()>>& fns) {
  std::vector<int> batch(fns.size());
  for (std::size_t k = 0; k < fns.size(); ++k) {
    const auto w0 = Clock::now();
    fns[k]();
    const double once = std::max(seconds_since(w0), 1e-9);
    batch[k] = std::max(1, static_cast<int>(std::ceil(0.02 / once)));
  }
  std::vector<std::vector<double>> samples(fns.size());
  for (int r = 0; r < reps; ++r) {
    for (std::size_t k = 0; k < fns.size(); ++k) {
      const auto t0 = Clock::now();
      for (int b = 0; b < batch[k]; ++b) fns[k]();
      samples[k].push_back(seconds_since(t0) / batch[k]);
    }
  }
  std::vector<double> medians;
  for (const auto& v : samples) medians.push_back(quantile(v, 0.5));
  return medians;
}

}  // namespace

std::vector<BenchmarkRow> benchmark(const BenchmarkOptions& o) {
  if (o.mode != "preprocess" && o.mode != "diffuse") throw ConfigError("benchmark mode must be preprocess or diffuse");
  if (o.sizes.empty() || o.n_modes < 1 || o.repetitions < 1 || !(o.alpha > 0.0)) {
    throw ConfigError("benchmark needs sizes, n_M >= 1, repetitions >= 1 and alpha > 0");
  }
  const std::size_t largest = *std::max_element(o.sizes.begin(), o.sizes.end());
  const int side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(largest) * 1.3))) + 2;
  const PointCloud sheet = fixtures::wavy_sheet(side, 100.0);

  struct Case {
    LaplacianOperator op;
    int nm = 0;
    double tau = 0.0;
    std::optional<SpectralBasis> basis;
    std::unique_ptr<ImplicitDiffusion> implicit;
    std::unique_ptr<DenseImplicitDiffusion> dense;
    Field u0;
  };
  std::vector<std::unique_ptr<Case>> cases;
  for (std::size_t size : o.sizes) {
    auto c = std::make_unique<Case>();
    c->op = build_laplacian(fixtures::downsample_to(sheet, size));
    c->nm = std::min<int>(o.n_modes, static_cast<int>(c->op.size()));
    c->tau = timestep(c->op.spacing, o.alpha);
    if (o.mode == "diffuse") {
      c->basis = compute_basis(c->op, c->nm);
      c->implicit = std::make_unique<ImplicitDiffusion>(c->op);
      if (c->op.size() <= o.dense_limit) c->dense = std::make_unique<DenseImplicitDiffusion>(c->op, c->tau);
      std::mt19937_64 rng(7);
      std::uniform_real_distribution<double> uni(0.0, 1.0);
      c->u0.resize(static_cast<Eigen::Index>(c->op.size()));
      for (Eigen::Index i = 0; i < c->u0.size(); ++i) c->u0[i] = uni(rng);
    }
    cases.push_back(std::move(c));
  }

  std::vector<BenchmarkRow> rows;
  std::vector<std::function<void()>> fns;
  volatile double sink = 0.0;
  for (const auto& cp : cases) {
    Case& c = *cp;
    const std::size_t n = c.op.size();
    const auto add = [&](const std::string& method, const std::string& phase, std::function<void()> fn) {
      rows.push_back({n, c.nm, method, phase, 0.0});
      fns.push_back(std::move(fn));
    };
    if (o.mode == "preprocess") {
      add("spectral", "basis", [&c] { (void)compute_basis(c.op, c.nm); });
      add("implicit", "factorization", [&c] {
        ImplicitDiffusion solver(c.op);
        (void)solver.diffuse(Field::Zero(static_cast<Eigen::Index>(c.op.size())), c.tau);
      });
      if (n <= o.dense_limit) add("implicit-dense", "inverse", [&c] { DenseImplicitDiffusion dense(c.op, c.tau); });
    } else {
      add("spectral", "diffuse", [&c, &sink] { sink = sink + diffuse_spectral(*c.basis, c.u0, c.tau)[0]; });
      add("implicit", "diffuse", [&c, &sink] { sink = sink + c.implicit->diffuse(c.u0, c.tau)[0]; });
      if (c.dense) add("implicit-dense", "diffuse", [&c, &sink] { sink = sink + c.dense->diffuse(c.u0)[0]; });
    }
  }
  const std::vector<double> medians = time_medians(o.repetitions, fns);
  for (std::size_t k = 0; k < rows.size(); ++k) rows[k].seconds = medians[k];
  return rows;
}

Json benchmark_json(const std::vector<BenchmarkRow>& rows) {
  Json out = Json::array();
  for (const auto& r : rows) {
    out.push_back({{"n_P", r.n_points}, {"n_M", r.n_modes}, {"method", r.method}, {"phase", r.phase},
                   {"seconds", r.seconds}});
  }
  return out;
}

}  // namespace ergodic
