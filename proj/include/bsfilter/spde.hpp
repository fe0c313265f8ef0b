#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "bsfilter/coefficients.hpp"
#include "bsfilter/flow_model.hpp"
#include "bsfilter/paths.hpp"

namespace bsfilter {

// Uniform spatial grid on [x_min, x_max] with m nodes.
struct SpatialGrid {
  double x_min = -1.0;
  double x_max = 1.0;
  int m = 5;

  double dx() const { return (x_max - x_min) / (m - 1); }
  double x(int j) const { return x_min + j * dx(); }
  bool contains(double x) const { return x >= x_min && x <= x_max; }
  // The evaluation point must sit well inside the truncated domain.
  bool well_inside(double x) const {
    return x >= x_min + 5 * dx() && x <= x_max - 5 * dx();
  }
};

SpatialGrid make_centered_grid(double center, double half_width, int m);

// Truncation radius for the whole-line problem: diffusive spread plus the
// farthest the bounded drift can transport mass over [0,T].
double auto_half_width(const SystemModel& model);

// v(t,x) on the space-time grid, row-major [time][space].
struct ScalarField {
  SpatialGrid sgrid;
  TimeGrid tgrid;
  std::vector<double> values;

  double at(int t_idx, int j) const {
    return values[static_cast<std::size_t>(t_idx) * sgrid.m + j];
  }
  double& at(int t_idx, int j) {
    return values[static_cast<std::size_t>(t_idx) * sgrid.m + j];
  }
};

struct SolverReport {
  std::string scheme = "exp-observation-split/explicit-central";
  std::string boundary = "neumann-zero-flux";
  int m = 0;
  int n = 0;
  double dx = 0.0;
  double half_width = 0.0;
  double cfl_ratio = 0.0;  // max_i dt_i / dx^2
  bool cfl_warning = false;
  double field_min = 0.0;   // over every retained node
  double center_min = 0.0;  // over the evaluation column
  double mass_initial = 0.0;
  double mass_final = 0.0;
  double mass_change_rel = 0.0;
  bool assumption_violation = false;
};

enum class TerminalData { TestFunctionG, One };

// Backward SPDE solve against a recorded observation path, marching from T
// down to 0. Per step (i+1 -> i):
//   (a) multiplicative observation update v~ = v * exp(h dY - h^2 dt / 2),
//   (b) explicit deterministic step v += dt [ v~_xx / 2 + f v~_x ].
// CFL violations warn in the report; non-finite values are fatal.
std::pair<ScalarField, SolverReport> solve_backward(const SystemModel& model,
                                                    const SpatialGrid& sgrid,
                                                    const TimeGrid& tgrid,
                                                    const SampledProcess& y,
                                                    TerminalData terminal);

// Same recursion with caller-supplied terminal node values (linearity tests,
// custom readouts).
std::pair<ScalarField, SolverReport> solve_backward_terminal(const SystemModel& model,
                                                             const SpatialGrid& sgrid,
                                                             const TimeGrid& tgrid,
                                                             const SampledProcess& y,
                                                             std::vector<double> terminal);

// Linear interpolation inside the grid; throws outside.
double evaluate_field(const ScalarField& field, int t_idx, double x);

// Backward SPDE of the scalar flow map u(t,z) = Z^{t,z}_T with terminal data
// u(T,z) = z. The noise multiplies the gradient, not the field, so the
// stochastic term is an additive increment sigma(z) u_z dw.
ScalarField solve_backward_flow_expectation(const FlowModel& model, const SpatialGrid& sgrid,
                                            const TimeGrid& tgrid, const SampledProcess& w);

// CSV with header `t,x,value`, one node per row.
void write_field_csv(const ScalarField& field, std::ostream& out);
void write_field_csv(const ScalarField& field, const std::string& file);

}  // namespace bsfilter
