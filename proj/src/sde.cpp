#include "bsfilter/sde.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace bsfilter {

namespace {

constexpr int kMaxDim = 4;

void require_noise(const FlowModel& model, const TimeGrid& grid,
                   std::span<const BrownianPath> noise) {
  if (noise.size() != static_cast<std::size_t>(model.d1)) {
    throw std::invalid_argument("simulate_flow: need one noise path per driving dimension");
  }
  for (const auto& w : noise) {
    if (!w.grid.aligned_with(grid)) {
      throw std::invalid_argument("simulate_flow: noise grid misaligned with the time grid");
    }
  }
}

// One Euler (or exact exponential, where flagged) step of the flow.
void flow_step(const FlowModel& model, const double* z, const double* dw, double dt,
               double* z_next) {
  for (int i = 0; i < model.d; ++i) {
    if (!model.exponential.empty() && model.exponential[i]) {
      double log_inc = 0.0;
      for (int j = 0; j < model.d1; ++j) {
        const auto& c = model.sig(i, j);
        if (c.is_zero()) continue;
        const double factor = c.fn.eval(z[c.arg]);
        log_inc += factor * dw[j] - 0.5 * factor * factor * dt;
      }
      z_next[i] = z[i] * std::exp(log_inc);
    } else {
      double v = z[i] + model.b[i].eval(z) * dt;
      for (int j = 0; j < model.d1; ++j) v += model.sig(i, j).eval(z) * dw[j];
      z_next[i] = v;
    }
  }
}

// Advance one start point from s_idx to the horizon, recording nothing.
void advance_to_horizon(const FlowModel& model, const TimeGrid& grid, int s_idx,
                        std::span<const BrownianPath> noise, double* z) {
  double dw[kMaxDim];
  double z_next[kMaxDim];
  const int n = grid.n_steps();
  for (int i = s_idx; i < n; ++i) {
    for (int j = 0; j < model.d1; ++j) dw[j] = noise[j].increments[i];
    flow_step(model, z, dw, grid.dt(i), z_next);
    for (int k = 0; k < model.d; ++k) z[k] = z_next[k];
  }
}

}  // namespace

SystemPaths simulate_system(const SystemModel& model, const TimeGrid& grid, std::uint64_t seed,
                            std::uint64_t stream_w1, std::uint64_t stream_w2) {
  return simulate_system_with_noise(model, sample_brownian(grid, seed, stream_w1),
                                    sample_brownian(grid, seed, stream_w2));
}

SystemPaths simulate_system_with_noise(const SystemModel& model, BrownianPath w1,
                                       BrownianPath w2) {
  if (!w1.grid.aligned_with(w2.grid)) {
    throw std::invalid_argument("simulate_system: driving noises live on different grids");
  }
  const TimeGrid& grid = w1.grid;
  const int n = grid.n_steps();
  std::vector<double> x(static_cast<std::size_t>(n) + 1), y(static_cast<std::size_t>(n) + 1);
  x[0] = model.x0;
  y[0] = model.y0;
  for (int i = 0; i < n; ++i) {
    const double dt = grid.dt(i);
    x[i + 1] = x[i] + model.f.eval(x[i]) * dt + w1.increments[i];
    y[i + 1] = y[i] + model.h.eval(x[i]) * dt + w2.increments[i];
  }
  return SystemPaths{{grid, std::move(x)}, {grid, std::move(y)}, std::move(w1), std::move(w2)};
}

FlowMap simulate_flow(const FlowModel& model, const TimeGrid& grid, int s_idx,
                      const std::vector<std::vector<double>>& z0_lattice,
                      std::span<const BrownianPath> noise) {
  model.validate();
  if (model.d > kMaxDim) throw std::invalid_argument("simulate_flow: dimension too large");
  if (z0_lattice.empty()) throw std::invalid_argument("simulate_flow: empty start lattice");
  if (s_idx < 0 || s_idx >= grid.n_steps()) {
    throw std::invalid_argument("simulate_flow: start index out of range");
  }
  require_noise(model, grid, noise);

  const int n1 = grid.size();
  FlowMap flow{model, grid, s_idx, z0_lattice, {}};
  flow.values.resize(z0_lattice.size() * static_cast<std::size_t>(n1) * model.d);

  double z[kMaxDim];
  double dw[kMaxDim];
  double z_next[kMaxDim];
  for (std::size_t p = 0; p < z0_lattice.size(); ++p) {
    if (z0_lattice[p].size() != static_cast<std::size_t>(model.d)) {
      throw std::invalid_argument("simulate_flow: start point dimension mismatch");
    }
    double* row = flow.values.data() + p * static_cast<std::size_t>(n1) * model.d;
    for (int k = 0; k < model.d; ++k) z[k] = z0_lattice[p][k];
    for (int i = 0; i <= s_idx; ++i) {
      for (int k = 0; k < model.d; ++k) row[static_cast<std::size_t>(i) * model.d + k] = z[k];
    }
    for (int i = s_idx; i < grid.n_steps(); ++i) {
      for (int j = 0; j < model.d1; ++j) dw[j] = noise[j].increments[i];
      flow_step(model, z, dw, grid.dt(i), z_next);
      for (int k = 0; k < model.d; ++k) {
        z[k] = z_next[k];
        row[static_cast<std::size_t>(i + 1) * model.d + k] = z[k];
      }
    }
  }
  return flow;
}

FlowDerivatives flow_derivatives(const FlowMap& flow, double spacing) {
  if (flow.model.d != 1) {
    throw std::invalid_argument(
        "flow_derivatives: derivative lattices are scalar; tangent computation for d > 1 is out "
        "of scope");
  }
  const int n_points = static_cast<int>(flow.z0.size());
  if (n_points < 3) {
    throw std::invalid_argument("flow_derivatives: need at least 3 lattice points per axis");
  }
  if (!(spacing > 0.0)) throw std::invalid_argument("flow_derivatives: spacing must be positive");
  for (int p = 0; p + 1 < n_points; ++p) {
    if (std::abs(flow.z0[p + 1][0] - flow.z0[p][0] - spacing) > 1e-12 * std::max(1.0, spacing)) {
      throw std::invalid_argument("flow_derivatives: lattice spacing is not uniform");
    }
  }

  const int n1 = flow.grid.size();
  FlowDerivatives out;
  out.n_interior = n_points - 2;
  out.spacing = spacing;
  out.first.resize(static_cast<std::size_t>(out.n_interior) * n1);
  out.second.resize(static_cast<std::size_t>(out.n_interior) * n1);
  for (int p = 1; p + 1 < n_points; ++p) {
    for (int i = 0; i < n1; ++i) {
      const double lo = flow.at(p - 1, i, 0);
      const double mid = flow.at(p, i, 0);
      const double hi = flow.at(p + 1, i, 0);
      out.first[static_cast<std::size_t>(p - 1) * n1 + i] = (hi - lo) / (2.0 * spacing);
      out.second[static_cast<std::size_t>(p - 1) * n1 + i] =
          (hi - 2.0 * mid + lo) / (spacing * spacing);
    }
  }
  return out;
}

double check_evolution_identity(const FlowModel& model, const TimeGrid& grid,
                                const std::vector<std::vector<double>>& z0_lattice, int s_idx,
                                std::span<const BrownianPath> noise) {
  model.validate();
  if (model.d > kMaxDim) throw std::invalid_argument("check_evolution_identity: dimension too large");
  require_noise(model, grid, noise);
  if (s_idx < 0 || s_idx >= grid.n_steps()) {
    throw std::invalid_argument("check_evolution_identity: restart index out of range");
  }

  const FlowMap direct = simulate_flow(model, grid, 0, z0_lattice, noise);
  double worst = 0.0;
  double z[kMaxDim];
  for (std::size_t p = 0; p < z0_lattice.size(); ++p) {
    for (int k = 0; k < model.d; ++k) z[k] = direct.at(static_cast<int>(p), s_idx, k);
    advance_to_horizon(model, grid, s_idx, noise, z);
    for (int k = 0; k < model.d; ++k) {
      worst = std::max(worst, std::abs(direct.at(static_cast<int>(p), grid.n_steps(), k) - z[k]));
    }
  }
  return worst;
}

double flow_integral_residual(const FlowModel& model, const TimeGrid& grid, double z,
                       const BrownianPath& noise, int t_idx, double fd_delta) {
  model.validate();
  if (model.d != 1 || model.d1 != 1) {
    throw std::invalid_argument("flow_integral_residual: the integral-form check is scalar");
  }
  if (!noise.grid.aligned_with(grid)) {
    throw std::invalid_argument("flow_integral_residual: noise grid misaligned");
  }
  const int n = grid.n_steps();
  if (t_idx < 0 || t_idx > n) throw std::invalid_argument("flow_integral_residual: bad start index");
  if (t_idx == n) return 0.0;

  // Terminal values of the flow started at (t_s, z - delta | z | z + delta),
  // for every start time in the partition; one shared noise path.
  const int n_times = n - t_idx + 1;
  std::vector<double> u_lo(n_times), u_mid(n_times), u_hi(n_times);
  const std::span<const BrownianPath> noise_span(&noise, 1);
  for (int s = t_idx; s <= n; ++s) {
    double zs[3] = {z - fd_delta, z, z + fd_delta};
    for (double& v : zs) {
      if (s < n) {
        double state[1] = {v};
        advance_to_horizon(model, grid, s, noise_span, state);
        v = state[0];
      }
    }
    u_lo[s - t_idx] = zs[0];
    u_mid[s - t_idx] = zs[1];
    u_hi[s - t_idx] = zs[2];
  }

  const double z_point[1] = {z};
  const double sigma_z = model.sigma[0].eval(z_point);
  const double b_z = model.b[0].eval(z_point);
  double a_z;
  model.diffusion_half(z_point, &a_z);

  // Right-endpoint sums, matching the backward-integral convention.
  double stochastic = 0.0;
  double drift_trace = 0.0;
  for (int i = n - 1; i >= t_idx; --i) {
    const int k = i + 1 - t_idx;
    const double grad = (u_hi[k] - u_lo[k]) / (2.0 * fd_delta);
    const double hess = (u_hi[k] - 2.0 * u_mid[k] + u_lo[k]) / (fd_delta * fd_delta);
    stochastic += grad * sigma_z * noise.increments[i];
    drift_trace += (grad * b_z + hess * a_z) * grid.dt(i);
  }

  const double lhs = u_mid[0] - z;
  return std::abs(lhs - (stochastic + drift_trace));
}

void write_flow_csv(const FlowMap& flow, std::ostream& out) {
  out << "point,t";
  for (int k = 0; k < flow.model.d; ++k) out << ",Z" << (k + 1);
  out << "\n";
  char buf[40];
  for (std::size_t p = 0; p < flow.z0.size(); ++p) {
    for (int i = 0; i < flow.grid.size(); ++i) {
      out << p;
      std::snprintf(buf, sizeof(buf), ",%.17g", flow.grid.t(i));
      out << buf;
      for (int k = 0; k < flow.model.d; ++k) {
        std::snprintf(buf, sizeof(buf), ",%.17g", flow.at(static_cast<int>(p), i, k));
        out << buf;
      }
      out << "\n";
    }
  }
}

}  // namespace bsfilter
