#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "bsfilter/time_grid.hpp"

namespace bsfilter {

// A process sampled on a time grid (integrands, simulated trajectories).
struct SampledProcess {
  TimeGrid grid;
  std::vector<double> values;  // size grid.size()
};

// Brownian path. Increments are the primary data -- independent N(0, dt_i)
// draws keyed by (seed, stream, i) -- and values are their prefix sums, so a
// path is reproducible bit for bit from (grid, seed, stream, start).
struct BrownianPath {
  TimeGrid grid;
  std::vector<double> values;      // size N+1
  std::vector<double> increments;  // size N
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  SampledProcess as_process() const { return {grid, values}; }
};

BrownianPath sample_brownian(const TimeGrid& grid, std::uint64_t seed, std::uint64_t stream,
                             double start = 0.0);

// Deterministic path from stored values (CSV reload, analytic test drivers).
BrownianPath path_from_values(const TimeGrid& grid, std::vector<double> values);

// Forward Ito integral: sum_i xi(t_i) (W_{t_{i+1}} - W_{t_i}).
double ito_integral(const SampledProcess& xi, const BrownianPath& w);

// Backward Ito integral: sum_i xi(t_{i+1}) (W_{t_{i+1}} - W_{t_i}), accumulated
// in descending i so it matches the forward integral of the time-reversed
// objects bit for bit.
double backward_ito_integral(const SampledProcess& xi, const BrownianPath& w);

// Time reversal. For a driver: W~(s) = W(T) - W(T-s) (increments reversed,
// anchored at 0); for an integrand: xi~(s) = xi(T-s).
BrownianPath time_reverse(const BrownianPath& w);
SampledProcess time_reverse(const SampledProcess& xi);

// Restriction to every `factor`-th grid point; coarse increments are the sums
// of the fine ones, so every refinement level sees the same underlying path.
BrownianPath coarsen(const BrownianPath& w, int factor);
SampledProcess coarsen(const SampledProcess& p, int factor);

// Restriction to [t_s, T].
BrownianPath suffix(const BrownianPath& w, int s_idx);
SampledProcess suffix(const SampledProcess& p, int s_idx);

// CSV with header `t,value`, 17 significant digits (round-trip exact).
void write_csv(const SampledProcess& p, std::ostream& out);
void write_csv(const SampledProcess& p, const std::string& file);
SampledProcess read_process_csv(std::istream& in);
SampledProcess read_process_csv(const std::string& file);

}  // namespace bsfilter
