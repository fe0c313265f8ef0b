#include "bsfilter/paths.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "bsfilter/rng.hpp"

namespace bsfilter {

namespace {

void require_aligned(const SampledProcess& xi, const BrownianPath& w) {
  if (!xi.grid.aligned_with(w.grid)) {
    throw std::invalid_argument("integral: integrand and driver grids are misaligned");
  }
  if (xi.values.size() != static_cast<std::size_t>(xi.grid.size()) ||
      w.values.size() != static_cast<std::size_t>(w.grid.size())) {
    throw std::invalid_argument("integral: value array does not match its grid");
  }
}

std::vector<double> prefix_sums(const std::vector<double>& increments, double start) {
  std::vector<double> values(increments.size() + 1);
  values[0] = start;
  for (std::size_t i = 0; i < increments.size(); ++i) values[i + 1] = values[i] + increments[i];
  return values;
}

}  // namespace

BrownianPath sample_brownian(const TimeGrid& grid, std::uint64_t seed, std::uint64_t stream,
                             double start) {
  const int n = grid.n_steps();
  std::vector<double> inc(static_cast<std::size_t>(n));
  for (int i = 0; i < n; i += 2) {
    const auto z = rng::normal_pair(seed, stream, static_cast<std::uint64_t>(i) >> 1);
    inc[i] = z[0] * std::sqrt(grid.dt(i));
    if (i + 1 < n) inc[i + 1] = z[1] * std::sqrt(grid.dt(i + 1));
  }
  BrownianPath path{grid, prefix_sums(inc, start), std::move(inc), seed, stream};
  return path;
}

BrownianPath path_from_values(const TimeGrid& grid, std::vector<double> values) {
  if (values.size() != static_cast<std::size_t>(grid.size())) {
    throw std::invalid_argument("path_from_values: size mismatch");
  }
  std::vector<double> inc(values.size() - 1);
  for (std::size_t i = 0; i + 1 < values.size(); ++i) inc[i] = values[i + 1] - values[i];
  return BrownianPath{grid, std::move(values), std::move(inc), 0, 0};
}

double ito_integral(const SampledProcess& xi, const BrownianPath& w) {
  require_aligned(xi, w);
  double acc = 0.0;
  const int n = w.grid.n_steps();
  for (int i = 0; i < n; ++i) acc += xi.values[i] * w.increments[i];
  return acc;
}

double backward_ito_integral(const SampledProcess& xi, const BrownianPath& w) {
  require_aligned(xi, w);
  // Descending order reproduces, operation for operation, the forward
  // integral of the time-reversed pair.
  double acc = 0.0;
  for (int i = w.grid.n_steps() - 1; i >= 0; --i) acc += xi.values[i + 1] * w.increments[i];
  return acc;
}

BrownianPath time_reverse(const BrownianPath& w) {
  std::vector<double> inc(w.increments.rbegin(), w.increments.rend());
  BrownianPath rev{w.grid.reversed(), prefix_sums(inc, 0.0), std::move(inc), w.seed, w.stream};
  return rev;
}

SampledProcess time_reverse(const SampledProcess& xi) {
  return {xi.grid.reversed(), std::vector<double>(xi.values.rbegin(), xi.values.rend())};
}

BrownianPath coarsen(const BrownianPath& w, int factor) {
  const TimeGrid grid = w.grid.coarsen(factor);
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(grid.size()));
  for (int i = 0; i <= w.grid.n_steps(); i += factor) values.push_back(w.values[i]);
  std::vector<double> inc(values.size() - 1);
  for (std::size_t i = 0; i + 1 < values.size(); ++i) inc[i] = values[i + 1] - values[i];
  return BrownianPath{grid, std::move(values), std::move(inc), w.seed, w.stream};
}

SampledProcess coarsen(const SampledProcess& p, int factor) {
  const TimeGrid grid = p.grid.coarsen(factor);
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(grid.size()));
  for (int i = 0; i <= p.grid.n_steps(); i += factor) values.push_back(p.values[i]);
  return {grid, std::move(values)};
}

BrownianPath suffix(const BrownianPath& w, int s_idx) {
  const TimeGrid grid = w.grid.suffix(s_idx);
  return BrownianPath{grid, std::vector<double>(w.values.begin() + s_idx, w.values.end()),
                      std::vector<double>(w.increments.begin() + s_idx, w.increments.end()),
                      w.seed, w.stream};
}

SampledProcess suffix(const SampledProcess& p, int s_idx) {
  return {p.grid.suffix(s_idx), std::vector<double>(p.values.begin() + s_idx, p.values.end())};
}

void write_csv(const SampledProcess& p, std::ostream& out) {
  out << "t,value\n";
  char buf[64];
  for (int i = 0; i < p.grid.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", p.grid.t(i), p.values[i]);
    out << buf;
  }
}

void write_csv(const SampledProcess& p, const std::string& file) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot open for writing: " + file);
  write_csv(p, out);
}

SampledProcess read_process_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "t,value") {
    throw std::runtime_error("process CSV: expected header 't,value'");
  }
  std::vector<double> t, v;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::runtime_error("process CSV: malformed row");
    t.push_back(std::stod(line.substr(0, comma)));
    v.push_back(std::stod(line.substr(comma + 1)));
  }
  return {TimeGrid::from_points(std::move(t)), std::move(v)};
}

SampledProcess read_process_csv(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open for reading: " + file);
  return read_process_csv(in);
}

}  // namespace bsfilter
