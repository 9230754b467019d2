#include "ergodic/control.hpp"
#include "ergodic/errors.hpp"
#include "ergodic/harness.hpp"
#include "ergodic/parallel.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace ergodic;

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

void emit(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
std::vector<T> parse_list(const std::string& s, const std::string& what) {
  std::vector<T> out;
  for (const std::string& item : split(s, ',')) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v < 0) throw std::invalid_argument(item);
      out.push_back(static_cast<T>(v));
    } catch (const std::exception&) {
      throw ConfigError(what + ": '" + item + "' is not a nonnegative integer");
    }
  }
  if (out.empty()) throw ConfigError(what + ": empty list");
  return out;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ergodic surface coverage on point clouds"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "Build the Laplacian and spectral basis of a cloud");
  std::string pre_cloud, pre_out;
  int pre_nm = 100;
  LaplacianParams pre_lap;
  pre->add_option("cloud", pre_cloud, "Cloud file (.csv or .ply)")->required();
  pre->add_option("--n-m", pre_nm, "Number of eigenpairs")->check(CLI::PositiveNumber);
  pre->add_option("--k", pre_lap.k, "Neighbors per point")->check(CLI::Range(6, 1000));
  pre->add_option("--mollify", pre_lap.mollify, "Edge-length mollification relative to h")
      ->check(CLI::NonNegativeNumber);
  pre->add_option("-o,--output", pre_out, "Directory for stiffness.txt, mass.txt and basis.txt");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run one coverage scenario");
  std::string sim_config, sim_out;
  std::vector<std::string> sim_set;
  sim->add_option("config", sim_config, "Scenario JSON")->required();
  sim->add_option("--set", sim_set, "Override a config field, key=value (repeatable)");
  sim->add_option("-o,--output", sim_out, "Output directory (overrides config 'output')");

  // sweep
  auto* swp = app.add_subcommand("sweep", "Run a parameter grid over several seeds");
  std::string swp_config, swp_grid, swp_seeds, swp_out;
  std::vector<std::string> swp_set;
  int swp_repeats = 10;
  std::size_t swp_workers = 0;
  swp->add_option("config", swp_config, "Base scenario JSON")->required();
  swp->add_option("--grid", swp_grid, "Overrides grid, e.g. 'n_m=25,100;alpha=1,10'")->required();
  swp->add_option("--seeds", swp_seeds, "Comma-separated seeds (default 0..repeats-1)");
  swp->add_option("--repeats", swp_repeats, "Seeds 0..repeats-1 when --seeds is absent")
      ->check(CLI::PositiveNumber);
  swp->add_option("--set", swp_set, "Override a base config field, key=value (repeatable)");
  swp->add_option("--workers", swp_workers, std::string("Parallel runs (default ") + kWorkersEnv + " or all cores)");
  swp->add_option("-o,--output", swp_out, "Write the aggregate JSON here instead of stdout");

  // benchmark
  auto* bench = app.add_subcommand("benchmark", "Time spectral against implicit diffusion");
  std::string bench_sizes = "1000,2000,4000,8000", bench_out;
  BenchmarkOptions bench_opt;
  bench->add_option("--sizes", bench_sizes, "Comma-separated point counts");
  bench->add_option("--n-m", bench_opt.n_modes, "Number of eigenpairs")->check(CLI::PositiveNumber);
  bench->add_option("--mode", bench_opt.mode, "preprocess or diffuse")
      ->check(CLI::IsMember({"preprocess", "diffuse"}));
  bench->add_option("--reps", bench_opt.repetitions, "Timed samples after one warmup")->check(CLI::PositiveNumber);
  bench->add_option("--alpha", bench_opt.alpha, "Timestep scale")->check(CLI::PositiveNumber);
  bench->add_option("--dense-limit", bench_opt.dense_limit, "Skip the dense route above this size");
  bench->add_option("-o,--output", bench_out, "Write JSON here instead of stdout");

  // control-demo
  auto* demo = app.add_subcommand("control-demo", "Step the toy first-order plant under the impedance law");
  control::DemoConfig demo_cfg;
  std::string demo_out;
  demo->add_option("--steps", demo_cfg.steps, "Steps")->check(CLI::PositiveNumber);
  demo->add_option("--dt", demo_cfg.dt, "Step [s]")->check(CLI::PositiveNumber);
  demo->add_option("--admittance", demo_cfg.admittance, "qdot per unit torque")->check(CLI::PositiveNumber);
  demo->add_option("--force", demo_cfg.desired_force, "Desired force along the tool z-axis");
  demo->add_option("-o,--output", demo_out, "Write CSV here instead of stdout");

  // export
  auto* exp = app.add_subcommand("export", "Re-emit a simulate output directory as CSV or JSON");
  std::string exp_dir, exp_format = "json", exp_out;
  exp->add_option("run", exp_dir, "Directory written by simulate")->required();
  exp->add_option("--format", exp_format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  exp->add_option("-o,--output", exp_out, "Write here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*pre) {
      const auto t0 = std::chrono::steady_clock::now();
      const PointCloud cloud = load_cloud(pre_cloud);
      const LaplacianOperator op = build_laplacian(cloud, pre_lap);
      const auto t1 = std::chrono::steady_clock::now();
      if (static_cast<std::size_t>(pre_nm) > op.size()) throw ConfigError("--n-m exceeds the number of points");
      const SpectralBasis basis = compute_basis(op, pre_nm);
      const auto t2 = std::chrono::steady_clock::now();
      std::size_t boundary = 0;
      for (bool b : op.boundary) boundary += b ? 1 : 0;
      Json j = {{"n_P", op.size()},
                {"n_M", basis.modes()},
                {"h", op.spacing},
                {"boundary_points", boundary},
                {"total_area", op.mass.sum()},
                {"lambda_min", basis.eigenvalues[0]},
                {"lambda_max", basis.eigenvalues[basis.modes() - 1]},
                {"seconds", {{"laplacian", std::chrono::duration<double>(t1 - t0).count()},
                             {"basis", std::chrono::duration<double>(t2 - t1).count()}}}};
      if (!pre_out.empty()) {
        std::filesystem::create_directories(pre_out);
        const std::filesystem::path dir = pre_out;
        export_operator(op, dir / "stiffness.txt", dir / "mass.txt");
        export_basis(basis, dir / "basis.txt");
      }
      std::cout << j.dump(2) << "\n";
    } else if (*sim) {
      ScenarioConfig cfg = apply_overrides(load_config(sim_config), sim_set);
      if (!sim_out.empty()) cfg.output = sim_out;
      const RunTrace trace = run_scenario(cfg);
      if (!cfg.output.empty()) write_run(trace, cfg.output);
      std::cout << summary_json(trace).dump(2) << "\n";
    } else if (*swp) {
      const ScenarioConfig base = apply_overrides(load_config(swp_config), swp_set);
      std::vector<std::uint64_t> seeds;
      if (swp_seeds.empty()) {
        for (int s = 0; s < swp_repeats; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
      } else {
        seeds = parse_list<std::uint64_t>(swp_seeds, "--seeds");
      }
      const std::size_t workers = swp_workers > 0 ? swp_workers : default_workers();
      const auto cells = sweep(base, expand_grid(swp_grid), seeds, workers);
      emit(sweep_json(cells).dump(2) + "\n", swp_out);
    } else if (*bench) {
      bench_opt.sizes = parse_list<std::size_t>(bench_sizes, "--sizes");
      emit(benchmark_json(benchmark(bench_opt)).dump(2) + "\n", bench_out);
    } else if (*demo) {
      const auto samples = control::run_control_demo(demo_cfg);
      std::ostringstream out;
      out << "t";
      for (int i = 1; i <= 7; ++i) out << ",q" << i;
      for (int i = 1; i <= 7; ++i) out << ",tau" << i;
      out << ",line_error,wrench_error\n";
      for (const auto& s : samples) {
        out << fmt(s.t);
        for (Eigen::Index i = 0; i < s.q.size(); ++i) out << ',' << fmt(s.q[i]);
        for (Eigen::Index i = 0; i < s.torques.size(); ++i) out << ',' << fmt(s.torques[i]);
        out << ',' << fmt(s.line_error) << ',' << fmt(s.wrench_error) << '\n';
      }
      emit(out.str(), demo_out);
    } else if (*exp) {
      const std::filesystem::path dir = exp_dir;
      const std::string trace = read_file(dir / "trace.csv");
      Json summary;
      try {
        summary = Json::parse(read_file(dir / "summary.json"));
      } catch (const Json::exception& e) {
        throw ConfigError(std::string("summary.json: ") + e.what());
      }
      if (exp_format == "csv") {
        std::ostringstream out;
        out << "# final_ergodicity=" << fmt(summary.at("final_ergodicity").get<double>())
            << " steps=" << summary.at("steps").get<long>() << "\n"
            << trace;
        emit(out.str(), exp_out);
      } else {
        Json records = Json::array();
        const auto lines = split(trace, '\n');
        if (lines.empty()) throw ConfigError("trace.csv is empty");
        const auto header = split(lines.front(), ',');
        for (std::size_t l = 1; l < lines.size(); ++l) {
          const auto cells = split(lines[l], ',');
          if (cells.size() != header.size()) throw ConfigError("trace.csv: ragged row " + std::to_string(l + 1));
          Json rec;
          for (std::size_t c = 0; c < cells.size(); ++c) rec[header[c]] = std::stod(cells[c]);
          records.push_back(rec);
        }
        emit(Json{{"summary", summary}, {"trace", records}}.dump(2) + "\n", exp_out);
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
