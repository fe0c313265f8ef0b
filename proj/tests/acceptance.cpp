// Acceptance suite: one line per criterion, wall-clock budgets enforced.
// Exits nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "bsfilter/experiment.hpp"
#include "bsfilter/rng.hpp"
#include "bsfilter/sde.hpp"
#include "bsfilter/spde.hpp"

using namespace bsfilter;
namespace fs = std::filesystem;

namespace {

SystemModel catalog_model() {
  return make_system_model(CoefficientFn::tanh(1.0, 1.0), CoefficientFn::sine(1.0, 1.0),
                           CoefficientFn::tanh(1.0, 2.0), 0.0, 0.0, 1.0);
}

ExperimentConfig catalog_config(int n_paths, long long particles, int n_time, int m_space) {
  ExperimentConfig cfg;
  cfg.model = catalog_model();
  cfg.grids = GridSpec{n_time, m_space, std::nullopt};
  cfg.master_seed = 20240801;
  cfg.n_paths = n_paths;
  cfg.methods = {Method::BackwardSpde, Method::ParticleKs};
  cfg.particle_n = particles;
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 1. Backward-integral definition: bit-exact agreement with the forward
//    integral of the time-reversed pair, 100 random pairs, N in {8, 64, 512}.
bool criterion_backward_definition(std::string& detail) {
  int failures = 0;
  int pair_index = 0;
  for (const int n : {8, 64, 512}) {
    for (int rep = 0; rep < 34 && pair_index < 100; ++rep, ++pair_index) {
      TimeGrid grid = TimeGrid::uniform(1.0, n);
      if (rep % 3 == 1) {
        std::vector<double> pts(static_cast<std::size_t>(n) + 1);
        pts[0] = 0.0;
        for (int i = 1; i <= n; ++i) {
          pts[i] = pts[i - 1] + 0.2 / n + rng::uniform_draw(1, pair_index, i) / n;
        }
        grid = TimeGrid::from_points(std::move(pts));
      }
      const BrownianPath w = sample_brownian(grid, 9000 + pair_index, 0);
      SampledProcess xi{grid, std::vector<double>(grid.size())};
      for (int i = 0; i < grid.size(); ++i) {
        xi.values[i] = rng::normal_draw(9500 + pair_index, 1, static_cast<std::uint64_t>(i));
      }
      if (backward_ito_integral(xi, w) != ito_integral(time_reverse(xi), time_reverse(w))) {
        ++failures;
      }
    }
  }
  std::ostringstream os;
  os << pair_index << " pairs, " << failures << " bit mismatches";
  detail = os.str();
  return failures == 0;
}

// 2. Ito correction: backward minus forward integral of W against W
//    reproduces [W,W]_T = T within 5 N^{-1/2} in RMS over 200 seeds.
bool criterion_ito_correction(std::string& detail) {
  const int n = 1 << 10;
  const double T = 1.0;
  const TimeGrid grid = TimeGrid::uniform(T, n);
  double acc = 0.0;
  const int seeds = 200;
  for (int s = 0; s < seeds; ++s) {
    const BrownianPath w = sample_brownian(grid, 777, static_cast<std::uint64_t>(s));
    const double gap = backward_ito_integral(w.as_process(), w) - ito_integral(w.as_process(), w);
    acc += (gap - T) * (gap - T);
  }
  const double rms = std::sqrt(acc / seeds);
  const double bound = 5.0 / std::sqrt(static_cast<double>(n));
  std::ostringstream os;
  os << "rms " << rms << " vs bound " << bound;
  detail = os.str();
  return rms <= bound;
}

// 3. Cross-validation triangle: backward-SPDE ratio against the weighted particle
//    estimate on 20 recorded paths of the bounded catalog model.
bool criterion_triangle(std::string& detail) {
  const ExperimentConfig cfg = catalog_config(20, 100000, 1 << 10, 401);
  const auto records = run_filter_experiment(cfg);
  double worst_margin = -1e300, worst_gap = 0.0, worst_bound = 0.0;
  int violations = 0;
  for (const auto& r : records) {
    if (r.failed || r.estimates.size() != 2) return false;
    const FilterEstimate& spde = r.estimates[0];
    const FilterEstimate& pf = r.estimates[1];
    const double gap = std::abs(spde.m_t - pf.m_t);
    const double bound = 3.0 * (pf.stderr_est + 0.05);
    if (gap > bound) ++violations;
    if (gap - bound > worst_margin) {
      worst_margin = gap - bound;
      worst_gap = gap;
      worst_bound = bound;
    }
  }
  std::ostringstream os;
  os << records.size() << " paths, worst gap " << worst_gap << " vs bound " << worst_bound;
  detail = os.str();
  return violations == 0;
}

// 4. Kalman-Bucy cross-check on the linear model; ensemble relative RMS.
bool criterion_kalman(std::string& detail) {
  ExperimentConfig cfg;
  cfg.model = make_system_model(CoefficientFn::linear(-0.5), CoefficientFn::linear(1.0),
                                CoefficientFn::linear(1.0), 1.0, 0.0, 1.0, true);
  cfg.allow_unbounded = true;
  cfg.grids = GridSpec{1 << 10, 601, 10.0};
  cfg.master_seed = 20240802;
  cfg.n_paths = 20;
  cfg.methods = {Method::BackwardSpde, Method::KalmanBucy};
  const auto records = run_filter_experiment(cfg);
  double num = 0.0, den = 0.0, worst_abs = 0.0;
  for (const auto& r : records) {
    if (r.failed || r.estimates.size() != 2) return false;
    const double d = r.estimates[0].m_t - r.estimates[1].m_t;
    num += d * d;
    den += r.estimates[1].m_t * r.estimates[1].m_t;
    worst_abs = std::max(worst_abs, std::abs(d));
  }
  const double rel = std::sqrt(num / den);
  std::ostringstream os;
  os << "relative rms over " << records.size() << " paths: " << rel << ", worst |gap| "
     << worst_abs;
  detail = os.str();
  return rel <= 0.05;
}

// 5. Flow integral form at desk scale: residual RMS over 100 seeds decays
//    across N in {2^6, 2^8, 2^10} and ends below 0.05.
bool criterion_flow_residual(std::string& detail) {
  const FlowModel flow =
      scalar_flow(CoefficientFn::tanh(1.0, 1.0), CoefficientFn::constant(1.0), 1.0);
  const int seeds = 100;
  std::vector<double> rms;
  for (const int n : {1 << 6, 1 << 8, 1 << 10}) {
    const TimeGrid grid = TimeGrid::uniform(1.0, n);
    double acc = 0.0;
    for (int s = 0; s < seeds; ++s) {
      const BrownianPath w = sample_brownian(grid, 4400, static_cast<std::uint64_t>(s));
      const double r = flow_integral_residual(flow, grid, 0.0, w);
      acc += r * r;
    }
    rms.push_back(std::sqrt(acc / seeds));
  }
  std::ostringstream os;
  os << "rms " << rms[0] << " -> " << rms[1] << " -> " << rms[2];
  detail = os.str();
  const bool monotone = rms[1] <= 1.5 * rms[0] && rms[2] <= 1.5 * rms[1] && rms[2] < rms[0];
  return monotone && rms[2] <= 0.05;
}

// 6. Exact invariants bundled: unit readout, silent observations, flow
//    restart, weight cancellation.
bool criterion_exact_invariants(std::string& detail) {
  std::ostringstream os;
  bool ok = true;

  const SystemModel m = catalog_model();
  const int n = 1 << 8;
  const TimeGrid tgrid = TimeGrid::uniform(1.0, n);
  const SpatialGrid sgrid = make_centered_grid(0.0, 9.0, 181);

  {
    const SystemModel unit =
        make_system_model(m.f, m.h, CoefficientFn::constant(1.0), 0.0, 0.0, 1.0);
    const SystemPaths sys = simulate_system(unit, tgrid, 61, 0, 1);
    const FilterEstimate spde = filter_estimate_spde(unit, sgrid, tgrid, sys.y);
    const FilterEstimate pf = particle_ks_estimate(unit, sys.y, tgrid, 1000, 61, 100);
    const bool pass = std::abs(spde.m_t - 1.0) <= 1e-10 && pf.m_t == 1.0;
    os << "unit readout " << (pass ? "ok" : "FAIL");
    ok = ok && pass;
  }
  {
    const SystemModel silent =
        make_system_model(m.f, CoefficientFn::constant(0.0), m.g, 0.0, 0.0, 1.0);
    const SystemPaths sys = simulate_system(silent, tgrid, 62, 0, 1);
    const auto [v1, rep] = solve_backward(silent, sgrid, tgrid, sys.y, TerminalData::One);
    bool pass = true;
    for (double v : v1.values) pass = pass && v == 1.0;
    os << ", v1 identically one " << (pass ? "ok" : "FAIL");
    ok = ok && pass;
  }
  {
    const FlowModel flow = scalar_flow(m.f, CoefficientFn::constant(1.0), 1.0);
    const BrownianPath w = sample_brownian(tgrid, 63, 0);
    const double res = check_evolution_identity(flow, tgrid, {{-0.7}, {0.0}, {0.4}}, n / 3,
                                                std::span<const BrownianPath>(&w, 1));
    os << ", flow restart residual " << res;
    ok = ok && res <= 1e-12;
  }
  {
    bool pass = true;
    for (int s = 0; s < 20; ++s) {
      const SystemPaths sys = simulate_system(m, tgrid, 64, static_cast<std::uint64_t>(2 * s),
                                              static_cast<std::uint64_t>(2 * s + 1));
      const double lri = girsanov_log_weight(sys.x, sys.y, m.h, WeightDirection::RhoInverse);
      const double lr = girsanov_log_weight(sys.x, sys.w2.as_process(), m.h, WeightDirection::Rho);
      pass = pass && std::abs(std::exp(lr) * std::exp(lri) - 1.0) <= 1e-10;
    }
    os << ", rho cancellation " << (pass ? "ok" : "FAIL");
    ok = ok && pass;
  }
  detail = os.str();
  return ok;
}

// 7. Heat-equation moment: quadratic readout gains exactly T at the center.
bool criterion_heat_moment(std::string& detail) {
  const double x0 = 0.0, T = 1.0;
  const SystemModel m =
      make_system_model(CoefficientFn::constant(0.0), CoefficientFn::constant(0.0),
                        CoefficientFn::quadratic(1.0), x0, 0.0, T, true);
  const TimeGrid tgrid = TimeGrid::uniform(T, 2048);
  const SpatialGrid sgrid = make_centered_grid(x0, 8.0 * std::sqrt(T), 401);
  const SystemPaths sys = simulate_system(m, tgrid, 65, 0, 1);
  const auto [field, report] = solve_backward(m, sgrid, tgrid, sys.y, TerminalData::TestFunctionG);
  const double got = evaluate_field(field, 0, x0);
  const double expect = x0 * x0 + T;
  std::ostringstream os;
  os << "v(0,x0) = " << got << " vs " << expect;
  detail = os.str();
  return std::abs(got - expect) <= 0.02 * expect;
}

// 8. Determinism: the smallest triangle configuration, re-run under different
//    thread counts, produces byte-identical outputs.
bool criterion_determinism(std::string& detail) {
  ExperimentConfig cfg = catalog_config(2, 20000, 1 << 10, 401);
  const fs::path dir = fs::temp_directory_path() / "bsfilter_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);

  cfg.threads = 1;
  const auto r1 = run_filter_experiment(cfg);
  write_records_jsonl(r1, (dir / "a.jsonl").string());
  write_summary_csv(r1, (dir / "a.csv").string());
  cfg.threads = 2;
  const auto r2 = run_filter_experiment(cfg);
  write_records_jsonl(r2, (dir / "b.jsonl").string());
  write_summary_csv(r2, (dir / "b.csv").string());

  const bool same_records = slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl");
  const bool same_summary = slurp(dir / "a.csv") == slurp(dir / "b.csv");
  detail = std::string("records ") + (same_records ? "identical" : "DIFFER") + ", summary " +
           (same_summary ? "identical" : "DIFFER");
  return same_records && same_summary && !slurp(dir / "a.jsonl").empty();
}

struct Criterion {
  const char* name;
  double budget_s;
  std::function<bool(std::string&)> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"backward-integral definition (bit-exact reversal identity)", 1.0,
       criterion_backward_definition},
      {"Ito correction term equals the quadratic variation", 5.0, criterion_ito_correction},
      {"ratio formula vs weighted particles, 20 catalog paths", 300.0, criterion_triangle},
      {"ratio formula vs Kalman-Bucy oracle, linear model", 180.0, criterion_kalman},
      {"flow integral-form residual decays to < 0.05", 120.0, criterion_flow_residual},
      {"exact invariants (unit readout, silent obs, restart, weights)", 30.0,
       criterion_exact_invariants},
      {"heat-equation second moment at the center node", 30.0, criterion_heat_moment},
      {"byte-identical re-runs across thread counts", 60.0, criterion_determinism},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = false;
    try {
      ok = criteria[i].run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_budget = elapsed <= criteria[i].budget_s;
    if (!ok || !in_budget) ++failures;
    std::printf("criterion %zu/%zu: %s ... %s (%.2f s / budget %.0f s)%s\n", i + 1,
                criteria.size(), criteria[i].name, ok && in_budget ? "PASS" : "FAIL", elapsed,
                criteria[i].budget_s, detail.empty() ? "" : ("  [" + detail + "]").c_str());
  }
  if (failures > 0) std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
