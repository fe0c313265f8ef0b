#pragma once

#include <cstdint>
#include <vector>

#include "bsfilter/coefficients.hpp"

namespace bsfilter {

// One entry of a flow drift vector or diffusion matrix:
//   value(z) = fn(z[arg]) * (scale < 0 ? 1 : z[scale]).
// The optional linear factor admits the signal/likelihood system, whose
// weight row reads h(z_0) * z_1.
struct FlowCoefficient {
  CoefficientFn fn;
  int arg = 0;
  int scale = -1;

  double eval(const double* z) const {
    const double v = fn.eval(z[arg]);
    return scale < 0 ? v : v * z[scale];
  }
  bool bounded() const { return fn.bounded() && scale < 0; }
  bool is_zero() const { return fn.is_zero(); }
};

// d-dimensional SDE dZ = b(Z) dt + sigma(Z) dw with d1 driving noises.
// Components flagged `exponential` are scalar geometric rows
// dZ_i = Z_i * sum_j c_ij(Z) dw_j; the simulator advances them with the exact
// log-normal update instead of an Euler step.
struct FlowModel {
  int d = 1;
  int d1 = 1;
  std::vector<FlowCoefficient> b;      // size d
  std::vector<FlowCoefficient> sigma;  // row-major d x d1
  std::vector<std::uint8_t> exponential;
  double T = 1.0;

  const FlowCoefficient& sig(int i, int j) const { return sigma[static_cast<std::size_t>(i) * d1 + j]; }

  // a = sigma sigma^T / 2 at z; `a_out` is row-major d x d.
  void diffusion_half(const double* z, double* a_out) const;

  bool assumption_violation() const;

  // Structural checks: sizes, and that exponential rows really are geometric
  // (zero drift, every nonzero diffusion entry scaled by the own coordinate).
  void validate() const;
};

FlowModel scalar_flow(CoefficientFn drift, CoefficientFn diffusion, double T);

// The (X, rho^{-1}) system driven by (w^1, w-tilde): row 0 is the signal, row
// 1 the likelihood weight with the exact exponential update.
FlowModel likelihood_flow(const SystemModel& m);

}  // namespace bsfilter
