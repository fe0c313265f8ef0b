#include "bsfilter/filtering.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <vector>

#include "bsfilter/errors.hpp"
#include "bsfilter/rng.hpp"

namespace bsfilter {

namespace {

// Chunked parallel loop; results must be written to per-index slots so the
// final reduction order does not depend on the thread count.
void parallel_for(long long count, int threads, const std::function<void(long long, long long)>& body) {
  int n_threads = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  if (n_threads < 1) n_threads = 1;
  n_threads = static_cast<int>(std::min<long long>(n_threads, count));
  if (n_threads <= 1) {
    body(0, count);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  const long long chunk = (count + n_threads - 1) / n_threads;
  for (int t = 0; t < n_threads; ++t) {
    const long long lo = t * chunk;
    const long long hi = std::min(count, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back(body, lo, hi);
  }
  for (auto& th : pool) th.join();
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::BackwardSpde:
      return "spde";
    case Method::ParticleKs:
      return "particle";
    case Method::KalmanBucy:
      return "kalman";
  }
  return "unknown";
}

double girsanov_log_weight(const SampledProcess& x, const SampledProcess& driver,
                           const CoefficientFn& h, WeightDirection direction) {
  if (!x.grid.aligned_with(driver.grid)) {
    throw std::invalid_argument("girsanov_log_weight: trajectory and driver grids misaligned");
  }
  const double sign = direction == WeightDirection::RhoInverse ? 1.0 : -1.0;
  double stochastic = 0.0;
  double quadratic = 0.0;
  const int n = x.grid.n_steps();
  for (int i = 0; i < n; ++i) {
    const double hx = h.eval(x.values[i]);
    stochastic += hx * (driver.values[i + 1] - driver.values[i]);
    quadratic += hx * hx * x.grid.dt(i);
  }
  return sign * stochastic - 0.5 * quadratic;
}

FilterEstimate particle_ks_estimate(const SystemModel& model, const SampledProcess& y,
                                    const TimeGrid& grid, long long n_particles,
                                    std::uint64_t seed, std::uint64_t stream_base, int threads) {
  if (n_particles < 100) {
    throw std::invalid_argument("particle_ks_estimate: need at least 100 particles");
  }
  if (!y.grid.aligned_with(grid)) {
    throw std::invalid_argument("particle_ks_estimate: observation path grid misaligned");
  }

  const int n = grid.n_steps();
  std::vector<double> dy(static_cast<std::size_t>(n)), dt(static_cast<std::size_t>(n)),
      sqrt_dt(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    dy[i] = y.values[i + 1] - y.values[i];
    dt[i] = grid.dt(i);
    sqrt_dt[i] = std::sqrt(dt[i]);
  }

  std::vector<double> log_w(static_cast<std::size_t>(n_particles));
  std::vector<double> g_t(static_cast<std::size_t>(n_particles));

  const CoefficientFn& f = model.f;
  const CoefficientFn& h = model.h;
  const CoefficientFn& g = model.g;
  const double x0 = model.x0;

  parallel_for(n_particles, threads, [&](long long lo, long long hi) {
    for (long long k = lo; k < hi; ++k) {
      const std::uint64_t stream = stream_base + static_cast<std::uint64_t>(k);
      double x = x0;
      double lw = 0.0;
      double z_hold = 0.0;
      for (int i = 0; i < n; ++i) {
        double z;
        if ((i & 1) == 0) {
          const auto pair = rng::normal_pair(seed, stream, static_cast<std::uint64_t>(i) >> 1);
          z = pair[0];
          z_hold = pair[1];
        } else {
          z = z_hold;
        }
        const double hx = h.eval(x);
        lw += hx * dy[i] - 0.5 * hx * hx * dt[i];
        x += f.eval(x) * dt[i] + sqrt_dt[i] * z;
      }
      log_w[k] = lw;
      g_t[k] = g.eval(x);
    }
  });

  // Ordered reduction in log domain.
  const double lw_max = *std::max_element(log_w.begin(), log_w.end());
  double sum_w = 0.0, sum_wg = 0.0, sum_w2 = 0.0;
  for (long long k = 0; k < n_particles; ++k) {
    const double w = std::exp(log_w[k] - lw_max);
    sum_w += w;
    sum_wg += w * g_t[k];
    sum_w2 += w * w;
  }
  const double m_t = sum_wg / sum_w;
  double var = 0.0;
  for (long long k = 0; k < n_particles; ++k) {
    const double wn = std::exp(log_w[k] - lw_max) / sum_w;
    const double dev = g_t[k] - m_t;
    var += wn * wn * dev * dev;
  }

  FilterEstimate est;
  est.method = Method::ParticleKs;
  est.m_t = m_t;
  est.n_particles = n_particles;
  est.ess = sum_w * sum_w / sum_w2;
  est.stderr_est = std::sqrt(var);
  est.ess_warning = est.ess < 10.0;
  est.assumption_violation = model.assumption_violation();
  return est;
}

FilterEstimate kalman_bucy_oracle(double a, double c, double x0, double p0,
                                  const SampledProcess& y, const TimeGrid& grid) {
  if (!y.grid.aligned_with(grid)) {
    throw std::invalid_argument("kalman_bucy_oracle: observation path grid misaligned");
  }
  if (p0 < 0.0) throw std::invalid_argument("kalman_bucy_oracle: p0 must be nonnegative");
  double m = x0;
  double p = p0;
  const int n = grid.n_steps();
  for (int i = 0; i < n; ++i) {
    const double dt = grid.dt(i);
    const double dy = y.values[i + 1] - y.values[i];
    const double m_next = m + a * m * dt + p * c * (dy - c * m * dt);
    const double p_next = p + (2.0 * a * p + 1.0 - c * c * p * p) * dt;
    m = m_next;
    p = p_next;
  }
  FilterEstimate est;
  est.method = Method::KalmanBucy;
  est.m_t = m;
  est.p_t = p;
  est.assumption_violation = true;  // linear coefficients leave C^3_b by construction
  return est;
}

FilterEstimate filter_estimate_spde(const SystemModel& model, const SpatialGrid& sgrid,
                                    const TimeGrid& tgrid, const SampledProcess& y) {
  if (!sgrid.well_inside(model.x0)) {
    throw ConfigError("filter_estimate_spde: x0 must lie well inside the truncated domain");
  }
  auto [v_g, report_g] = solve_backward(model, sgrid, tgrid, y, TerminalData::TestFunctionG);
  auto [v_1, report_1] = solve_backward(model, sgrid, tgrid, y, TerminalData::One);

  const double numerator = evaluate_field(v_g, 0, model.x0);
  const double denominator = evaluate_field(v_1, 0, model.x0);
  if (!(denominator > 0.0)) {
    std::ostringstream os;
    os << "filter_estimate_spde: normalizer v1(0,x0) = " << denominator
       << " is not positive (cfl_ratio=" << report_1.cfl_ratio
       << ", mass_change_rel=" << report_1.mass_change_rel << ")";
    throw NumericError(os.str());
  }

  FilterEstimate est;
  est.method = Method::BackwardSpde;
  est.m_t = numerator / denominator;
  est.numerator = numerator;
  est.denominator = denominator;
  est.report_numerator = report_g;
  est.report_denominator = report_1;
  est.assumption_violation = model.assumption_violation();
  return est;
}

}  // namespace bsfilter
