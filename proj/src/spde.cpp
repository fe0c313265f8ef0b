#include "bsfilter/spde.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "bsfilter/errors.hpp"

namespace bsfilter {

namespace {

void require_grids(const SpatialGrid& sgrid, const TimeGrid& tgrid, const SampledProcess& driver) {
  if (sgrid.m < 5) throw ConfigError("spatial grid: need at least 5 nodes");
  if (!driver.grid.aligned_with(tgrid)) {
    throw std::invalid_argument("solve_backward: driver path not sampled on the solver grid");
  }
}

double trapezoid_mass(const ScalarField& f, int t_idx) {
  const double dx = f.sgrid.dx();
  double acc = 0.5 * (f.at(t_idx, 0) + f.at(t_idx, f.sgrid.m - 1));
  for (int j = 1; j + 1 < f.sgrid.m; ++j) acc += f.at(t_idx, j);
  return acc * dx;
}

// Shared backward march. The observation factor for step i is
// exp(obs_lin[j] * dY_i + obs_quad[j] * dt_i); the noise_gradient term, when
// present, adds noise_grad[j] * D1(v)[j] * dY_i instead (flow-map equation,
// where the noise multiplies the gradient rather than the field).
struct MarchSpec {
  const std::vector<double>* obs_lin = nullptr;
  const std::vector<double>* obs_quad = nullptr;
  const std::vector<double>* noise_grad = nullptr;
  const std::vector<double>* drift = nullptr;      // first-order coefficient
  const std::vector<double>* diffusion = nullptr;  // second-order coefficient
};

ScalarField march_backward(const SpatialGrid& sgrid, const TimeGrid& tgrid,
                           const SampledProcess& driver, std::vector<double> terminal,
                           const MarchSpec& spec, SolverReport& report) {
  const int m = sgrid.m;
  const int n = tgrid.n_steps();
  const double dx = sgrid.dx();

  ScalarField field{sgrid, tgrid, std::vector<double>(static_cast<std::size_t>(n + 1) * m)};
  std::copy(terminal.begin(), terminal.end(), field.values.begin() + static_cast<std::size_t>(n) * m);

  report.m = m;
  report.n = n;
  report.dx = dx;
  report.half_width = 0.5 * (sgrid.x_max - sgrid.x_min);
  report.cfl_ratio = tgrid.max_dt() / (dx * dx);
  report.cfl_warning = report.cfl_ratio > 0.5;

  std::vector<double> work(static_cast<std::size_t>(m));
  const int j_center = (m - 1) / 2;
  double field_min = *std::min_element(field.values.begin() + static_cast<std::size_t>(n) * m,
                                       field.values.end());
  double center_min = field.at(n, j_center);

  for (int i = n - 1; i >= 0; --i) {
    const double dt = tgrid.dt(i);
    const double dy = driver.values[i + 1] - driver.values[i];
    const double* prev = field.values.data() + static_cast<std::size_t>(i + 1) * m;
    double* next = field.values.data() + static_cast<std::size_t>(i) * m;

    // (a) stochastic update at the right endpoint of [t_i, t_{i+1}]
    if (spec.obs_lin != nullptr) {
      const auto& lin = *spec.obs_lin;
      const auto& quad = *spec.obs_quad;
      for (int j = 0; j < m; ++j) work[j] = prev[j] * std::exp(lin[j] * dy + quad[j] * dt);
    } else {
      const auto& grad = *spec.noise_grad;
      for (int j = 0; j < m; ++j) {
        const double lo = prev[j > 0 ? j - 1 : 1];
        const double hi = prev[j + 1 < m ? j + 1 : m - 2];
        work[j] = prev[j] + grad[j] * (hi - lo) / (2.0 * dx) * dy;
      }
    }

    // (b) explicit deterministic step, zero-flux mirror ghosts
    const auto& drift = *spec.drift;
    const auto& diff = *spec.diffusion;
    for (int j = 0; j < m; ++j) {
      const double lo = work[j > 0 ? j - 1 : 1];
      const double hi = work[j + 1 < m ? j + 1 : m - 2];
      const double d2 = (hi - 2.0 * work[j] + lo) / (dx * dx);
      const double d1 = (hi - lo) / (2.0 * dx);
      next[j] = work[j] + dt * (diff[j] * d2 + drift[j] * d1);
    }

    for (int j = 0; j < m; ++j) {
      if (!std::isfinite(next[j])) {
        std::ostringstream os;
        os << "backward solve produced a non-finite value at time index " << i << " (t="
           << tgrid.t(i) << "), node " << j << " (x=" << sgrid.x(j) << ")";
        throw NumericError(os.str());
      }
      field_min = std::min(field_min, next[j]);
    }
    center_min = std::min(center_min, next[j_center]);
  }

  report.field_min = field_min;
  report.center_min = center_min;
  report.mass_final = trapezoid_mass(field, 0);
  report.mass_initial = trapezoid_mass(field, n);
  report.mass_change_rel =
      (report.mass_final - report.mass_initial) / std::max(1e-300, std::abs(report.mass_initial));
  return field;
}

}  // namespace

SpatialGrid make_centered_grid(double center, double half_width, int m) {
  if (m < 5) throw ConfigError("spatial grid: need at least 5 nodes");
  if (!(half_width > 0.0)) throw ConfigError("spatial grid: half width must be positive");
  return SpatialGrid{center - half_width, center + half_width, m};
}

double auto_half_width(const SystemModel& model) {
  const SupNorms f_norms = model.f.sup_norms();
  if (!std::isfinite(f_norms.value[0])) {
    throw ConfigError(
        "auto half-width needs a bounded drift; give grids.half_width explicitly for linear "
        "models");
  }
  return 8.0 * std::sqrt(model.T) + f_norms.value[0] * model.T;
}

std::pair<ScalarField, SolverReport> solve_backward(const SystemModel& model,
                                                    const SpatialGrid& sgrid,
                                                    const TimeGrid& tgrid,
                                                    const SampledProcess& y,
                                                    TerminalData terminal) {
  std::vector<double> data(static_cast<std::size_t>(sgrid.m));
  for (int j = 0; j < sgrid.m; ++j) {
    data[j] = terminal == TerminalData::One ? 1.0 : model.g.eval(sgrid.x(j));
  }
  return solve_backward_terminal(model, sgrid, tgrid, y, std::move(data));
}

std::pair<ScalarField, SolverReport> solve_backward_terminal(const SystemModel& model,
                                                             const SpatialGrid& sgrid,
                                                             const TimeGrid& tgrid,
                                                             const SampledProcess& y,
                                                             std::vector<double> terminal) {
  require_grids(sgrid, tgrid, y);
  if (terminal.size() != static_cast<std::size_t>(sgrid.m)) {
    throw std::invalid_argument("solve_backward: terminal data does not match the grid");
  }

  const int m = sgrid.m;
  std::vector<double> h(m), h_quad(m), f(m), diff(m);
  for (int j = 0; j < m; ++j) {
    const double xj = sgrid.x(j);
    h[j] = model.h.eval(xj);
    h_quad[j] = -0.5 * h[j] * h[j];
    f[j] = model.f.eval(xj);
    diff[j] = 0.5;
  }

  const double terminal_min = *std::min_element(terminal.begin(), terminal.end());

  SolverReport report;
  report.assumption_violation = model.assumption_violation();
  MarchSpec spec;
  spec.obs_lin = &h;
  spec.obs_quad = &h_quad;
  spec.drift = &f;
  spec.diffusion = &diff;
  ScalarField field = march_backward(sgrid, tgrid, y, std::move(terminal), spec, report);

  // Explicit-step positivity: strictly positive terminal data must stay
  // positive at the evaluation column when the CFL ratio is honored.
  if (terminal_min > 0.0 && !report.cfl_warning && report.center_min <= 0.0) {
    throw NumericError("backward solve lost positivity at the center node despite CFL <= 0.5");
  }
  return {std::move(field), report};
}

double evaluate_field(const ScalarField& field, int t_idx, double x) {
  const SpatialGrid& g = field.sgrid;
  if (t_idx < 0 || t_idx >= field.tgrid.size()) {
    throw std::out_of_range("evaluate_field: time index out of range");
  }
  if (!g.contains(x)) throw std::out_of_range("evaluate_field: x outside the spatial grid");
  const double pos = (x - g.x_min) / g.dx();
  int j = std::min(static_cast<int>(pos), g.m - 2);
  const double w = pos - j;
  return (1.0 - w) * field.at(t_idx, j) + w * field.at(t_idx, j + 1);
}

ScalarField solve_backward_flow_expectation(const FlowModel& model, const SpatialGrid& sgrid,
                                            const TimeGrid& tgrid, const SampledProcess& w) {
  model.validate();
  if (model.d != 1 || model.d1 != 1) {
    throw std::invalid_argument("solve_backward_flow_expectation: scalar flow models only");
  }
  require_grids(sgrid, tgrid, w);

  const int m = sgrid.m;
  std::vector<double> terminal(m), b(m), diff(m), grad(m);
  for (int j = 0; j < m; ++j) {
    const double zj = sgrid.x(j);
    terminal[j] = zj;
    b[j] = model.b[0].eval(&zj);
    grad[j] = model.sigma[0].eval(&zj);
    diff[j] = 0.5 * grad[j] * grad[j];
  }

  SolverReport report;
  report.assumption_violation = model.assumption_violation();
  MarchSpec spec;
  spec.noise_grad = &grad;
  spec.drift = &b;
  spec.diffusion = &diff;
  return march_backward(sgrid, tgrid, w, std::move(terminal), spec, report);
}

void write_field_csv(const ScalarField& field, std::ostream& out) {
  out << "t,x,value\n";
  char buf[96];
  for (int i = 0; i < field.tgrid.size(); ++i) {
    for (int j = 0; j < field.sgrid.m; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", field.tgrid.t(i), field.sgrid.x(j),
                    field.at(i, j));
      out << buf;
    }
  }
}

void write_field_csv(const ScalarField& field, const std::string& file) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot open for writing: " + file);
  write_field_csv(field, out);
}

}  // namespace bsfilter
