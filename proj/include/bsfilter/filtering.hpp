#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "bsfilter/coefficients.hpp"
#include "bsfilter/paths.hpp"
#include "bsfilter/spde.hpp"

namespace bsfilter {

enum class Method { BackwardSpde, ParticleKs, KalmanBucy };

std::string method_name(Method m);

// The filter output m_T with per-method diagnostics.
struct FilterEstimate {
  Method method = Method::BackwardSpde;
  double m_t = 0.0;

  // BackwardSpde
  double numerator = 0.0;
  double denominator = 0.0;
  std::optional<SolverReport> report_numerator;
  std::optional<SolverReport> report_denominator;

  // ParticleKs
  long long n_particles = 0;
  double ess = 0.0;
  double stderr_est = 0.0;
  bool ess_warning = false;

  // KalmanBucy
  double p_t = 0.0;

  bool assumption_violation = false;
};

enum class WeightDirection {
  RhoInverse,  // +int h dw~ - 1/2 int h^2 dt   (driver: w~ = Y - y)
  Rho,         // -int h dw2 - 1/2 int h^2 dt   (driver: w^2)
};

// Log likelihood ratio along one trajectory; left-endpoint sums for both the
// stochastic and the time integral.
double girsanov_log_weight(const SampledProcess& x, const SampledProcess& driver,
                           const CoefficientFn& h, WeightDirection direction);

// Kallianpur-Striebel estimate: X-paths sampled under the reference measure
// (fresh w^1 streams, Y frozen), weighted by rho^{-1} in log domain.
// Particle k consumes stream `stream_base + k`; reductions run in ascending
// particle order so the result is independent of the thread count.
FilterEstimate particle_ks_estimate(const SystemModel& model, const SampledProcess& y,
                                    const TimeGrid& grid, long long n_particles,
                                    std::uint64_t seed, std::uint64_t stream_base,
                                    int threads = 0);

// Analytic oracle for the linear-Gaussian case f(x)=a x, h(x)=c x, g(x)=x:
// Euler integration of the Riccati and conditional-mean equations on the
// observation grid.
FilterEstimate kalman_bucy_oracle(double a, double c, double x0, double p0,
                                  const SampledProcess& y, const TimeGrid& grid);

// Ratio formula: two backward solves (terminal g and terminal 1) on the same
// recorded Y, both read off at (0, x0).
FilterEstimate filter_estimate_spde(const SystemModel& model, const SpatialGrid& sgrid,
                                    const TimeGrid& tgrid, const SampledProcess& y);

}  // namespace bsfilter
