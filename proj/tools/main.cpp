#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bsfilter/errors.hpp"
#include "bsfilter/experiment.hpp"
#include "bsfilter/sde.hpp"

namespace fs = std::filesystem;
using namespace bsfilter;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "out";
  std::string methods_csv;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = -1;
  bool quiet = false;
};

void add_common(CLI::App* sub, CommonArgs& args, bool with_methods) {
  sub->add_option("--config", args.config_path, "experiment config file (JSON)")->required();
  sub->add_option("--out", args.out_dir, "output directory");
  sub->add_option("--seed", args.seed, "override seeds.master")
      ->each([&args](const std::string&) { args.seed_set = true; });
  sub->add_flag("--quiet", args.quiet, "suppress progress output");
  sub->add_option("--threads", args.threads, "worker threads (0 = hardware)");
  if (with_methods) {
    sub->add_option("--methods", args.methods_csv,
                    "comma-separated subset of spde,particle,kalman (overrides config)");
  }
}

ExperimentConfig load_config(const CommonArgs& args) {
  ExperimentConfig cfg = ExperimentConfig::from_file(args.config_path);
  if (args.seed_set) cfg.master_seed = args.seed;
  if (args.threads >= 0) cfg.threads = args.threads;
  if (!args.methods_csv.empty()) {
    std::vector<Method> methods;
    std::stringstream ss(args.methods_csv);
    std::string token;
    while (std::getline(ss, token, ',')) {
      Method m;
      if (token == "spde") {
        m = Method::BackwardSpde;
      } else if (token == "particle") {
        m = Method::ParticleKs;
      } else if (token == "kalman") {
        m = Method::KalmanBucy;
      } else {
        throw ConfigError("--methods: unknown method '" + token + "'");
      }
      if (std::find(methods.begin(), methods.end(), m) == methods.end()) methods.push_back(m);
    }
    if (methods.empty()) throw ConfigError("--methods: nothing selected");
    cfg.methods = std::move(methods);
  }
  return cfg;
}

class StageTimer {
 public:
  explicit StageTimer(bool quiet) : quiet_(quiet), start_(std::chrono::steady_clock::now()) {}
  void mark(const std::string& stage) {
    const auto now = std::chrono::steady_clock::now();
    if (!quiet_) {
      std::fprintf(stderr, "[timing] %s: %.3f s\n", stage.c_str(),
                   std::chrono::duration<double>(now - start_).count());
    }
    start_ = now;
  }

 private:
  bool quiet_;
  std::chrono::steady_clock::time_point start_;
};

int cmd_simulate(const CommonArgs& args) {
  const ExperimentConfig cfg = load_config(args);
  StageTimer timer(args.quiet);
  fs::create_directories(args.out_dir);
  const TimeGrid grid = TimeGrid::uniform(cfg.model.T, cfg.grids.n_time);
  for (int p = 0; p < cfg.n_paths; ++p) {
    const SystemPaths sys = simulate_system(cfg.model, grid, cfg.master_seed,
                                            (std::uint64_t(std::uint32_t(p)) << 32) | 0,
                                            (std::uint64_t(std::uint32_t(p)) << 32) | 1);
    char name[32];
    std::snprintf(name, sizeof(name), "path_%05d.csv", p);
    std::ofstream out(fs::path(args.out_dir) / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write trajectory file");
    out << "t,X,Y\n";
    char buf[96];
    for (int i = 0; i < grid.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", grid.t(i), sys.x.values[i],
                    sys.y.values[i]);
      out << buf;
    }
  }
  timer.mark("simulate");
  if (!args.quiet) {
    std::fprintf(stderr, "wrote %d trajectories to %s\n", cfg.n_paths, args.out_dir.c_str());
  }
  return 0;
}

int cmd_filter(const CommonArgs& args) {
  const ExperimentConfig cfg = load_config(args);
  StageTimer timer(args.quiet);
  const std::vector<PathRecord> records = run_filter_experiment(cfg);
  timer.mark("filter");
  fs::create_directories(args.out_dir);
  write_records_jsonl(records, (fs::path(args.out_dir) / "records.jsonl").string());
  write_summary_csv(records, (fs::path(args.out_dir) / "summary.csv").string());
  timer.mark("write");
  int failures = 0;
  for (const auto& r : records) failures += r.failed ? 1 : 0;
  if (!args.quiet) {
    std::fprintf(stderr, "%zu records (%d failed) -> %s\n", records.size(), failures,
                 args.out_dir.c_str());
  }
  return failures > 0 ? 3 : 0;
}

int cmd_validate_flow(const CommonArgs& args) {
  const ExperimentConfig cfg = load_config(args);
  StageTimer timer(args.quiet);
  const auto rows = run_flow_validation(cfg);
  timer.mark("validate-flow");
  fs::create_directories(args.out_dir);
  write_flow_validation_csv(rows, (fs::path(args.out_dir) / "validate_flow.csv").string());
  if (!args.quiet) {
    for (const auto& r : rows) {
      std::fprintf(stderr, "%s level=%d n=%d value=%.6g\n", r.check.c_str(), r.level, r.n_time,
                   r.value);
    }
  }
  return 0;
}

int cmd_converge(const CommonArgs& args) {
  const ExperimentConfig cfg = load_config(args);
  StageTimer timer(args.quiet);
  const auto rows = run_convergence_study(cfg);
  timer.mark("converge");
  fs::create_directories(args.out_dir);
  write_convergence_csv(rows, (fs::path(args.out_dir) / "converge.csv").string());
  if (!args.quiet) {
    for (const auto& r : rows) {
      std::fprintf(stderr, "level=%d n=%d m=%d est_error=%.6g flow_residual_rms=%.6g\n", r.level,
                   r.n_time, r.m_space, r.est_error, r.flow_residual_rms);
    }
  }
  return 0;
}

int cmd_emit_plots(const CommonArgs& args) {
  // Config is loaded for schema validation only; plots read prior outputs.
  (void)load_config(args);
  emit_plot_data((fs::path(args.out_dir) / "records.jsonl").string(),
                 (fs::path(args.out_dir) / "converge.csv").string(), args.out_dir);
  if (!args.quiet) std::fprintf(stderr, "plot data written to %s\n", args.out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Backward-SPDE representation of the nonlinear filter: experiment runner"};
  app.require_subcommand(1);

  CommonArgs args;
  CLI::App* simulate = app.add_subcommand("simulate", "record signal/observation trajectories");
  CLI::App* filter = app.add_subcommand("filter", "run the filter estimate pipeline");
  CLI::App* validate_flow =
      app.add_subcommand("validate-flow", "flow identities: restart and integral form");
  CLI::App* converge = app.add_subcommand("converge", "refinement ladder study");
  CLI::App* emit_plots = app.add_subcommand("emit-plots", "tidy plot CSVs from prior outputs");
  add_common(simulate, args, false);
  add_common(filter, args, true);
  add_common(validate_flow, args, false);
  add_common(converge, args, false);
  add_common(emit_plots, args, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(args);
    if (filter->parsed()) return cmd_filter(args);
    if (validate_flow->parsed()) return cmd_validate_flow(args);
    if (converge->parsed()) return cmd_converge(args);
    if (emit_plots->parsed()) return cmd_emit_plots(args);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
