#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "bsfilter/coefficients.hpp"
#include "bsfilter/flow_model.hpp"
#include "bsfilter/paths.hpp"

namespace bsfilter {

// Euler-Maruyama trajectories of the filtering system together with the
// driving noises (the recorded Y path is what the filters consume).
struct SystemPaths {
  SampledProcess x;
  SampledProcess y;
  BrownianPath w1;
  BrownianPath w2;
};

SystemPaths simulate_system(const SystemModel& model, const TimeGrid& grid, std::uint64_t seed,
                            std::uint64_t stream_w1, std::uint64_t stream_w2);

// Same scheme with caller-supplied noises (refinement ladders reuse one
// underlying path across levels).
SystemPaths simulate_system_with_noise(const SystemModel& model, BrownianPath w1, BrownianPath w2);

// Lattice of flow trajectories Z^{s,z}_t advanced by one shared noise
// realization; the pathwise identities (evolution, integral form) only hold
// under common increments.
struct FlowMap {
  FlowModel model;
  TimeGrid grid;
  int s_idx = 0;
  std::vector<std::vector<double>> z0;  // lattice points, each of size d
  // trajectory values, [point][time][component]; rows before s_idx hold z0
  std::vector<double> values;

  double at(int point, int t_idx, int component) const {
    const auto n1 = static_cast<std::size_t>(grid.size());
    return values[(static_cast<std::size_t>(point) * n1 + t_idx) * model.d + component];
  }
};

FlowMap simulate_flow(const FlowModel& model, const TimeGrid& grid, int s_idx,
                      const std::vector<std::vector<double>>& z0_lattice,
                      std::span<const BrownianPath> noise);

// Central-difference flow derivatives over a uniformly spaced scalar lattice.
// first/second are [interior point][time]; interior points drop one lattice
// point on each side.
struct FlowDerivatives {
  int n_interior = 0;
  double spacing = 0.0;
  std::vector<double> first;
  std::vector<double> second;

  double d1(int point, int t_idx, int n_times) const {
    return first[static_cast<std::size_t>(point) * n_times + t_idx];
  }
  double d2(int point, int t_idx, int n_times) const {
    return second[static_cast<std::size_t>(point) * n_times + t_idx];
  }
};

FlowDerivatives flow_derivatives(const FlowMap& flow, double spacing);

// Max over the lattice of |Z(0,T,z) - Z(s,T,Z(0,s,z))| on one noise path.
// Zero for the discrete scheme whenever the restart reuses the increments.
double check_evolution_identity(const FlowModel& model, const TimeGrid& grid,
                                const std::vector<std::vector<double>>& z0_lattice, int s_idx,
                                std::span<const BrownianPath> noise);

// Residual of the pathwise integral identity for a scalar flow:
//   Z(t,T,z) - z  vs  backward integral of Z_z(s,T,z) sigma(z)
//                     + time quadrature of Z_z(s,T,z) b(z) + Z_zz(s,T,z) a(z),
// all coefficients frozen at z. Decays like N^{-1/2} under refinement.
double flow_integral_residual(const FlowModel& model, const TimeGrid& grid, double z,
                       const BrownianPath& noise, int t_idx = 0, double fd_delta = 1e-3);

// CSV with header `point,t,Z1[,Z2,...]`, one lattice point and time per row.
void write_flow_csv(const FlowMap& flow, std::ostream& out);

}  // namespace bsfilter
