#include "bsfilter/flow_model.hpp"

#include <stdexcept>

namespace bsfilter {

void FlowModel::diffusion_half(const double* z, double* a_out) const {
  for (int i = 0; i < d; ++i) {
    for (int k = 0; k < d; ++k) {
      double acc = 0.0;
      for (int j = 0; j < d1; ++j) acc += sig(i, j).eval(z) * sig(k, j).eval(z);
      a_out[static_cast<std::size_t>(i) * d + k] = 0.5 * acc;
    }
  }
}

bool FlowModel::assumption_violation() const {
  for (const auto& c : b) {
    if (!c.bounded() && !c.is_zero()) return true;
  }
  for (const auto& c : sigma) {
    if (!c.bounded() && !c.is_zero()) return true;
  }
  return false;
}

void FlowModel::validate() const {
  if (d < 1 || d1 < 1) throw std::invalid_argument("FlowModel: dimensions must be >= 1");
  if (b.size() != static_cast<std::size_t>(d)) {
    throw std::invalid_argument("FlowModel: drift size must equal d");
  }
  if (sigma.size() != static_cast<std::size_t>(d) * d1) {
    throw std::invalid_argument("FlowModel: diffusion must be d x d1");
  }
  if (!exponential.empty() && exponential.size() != static_cast<std::size_t>(d)) {
    throw std::invalid_argument("FlowModel: exponential flags must cover every component");
  }
  if (!(T > 0.0)) throw std::invalid_argument("FlowModel: horizon must be positive");
  for (const auto& c : b) {
    if (c.arg < 0 || c.arg >= d || c.scale >= d) {
      throw std::invalid_argument("FlowModel: coefficient indices out of range");
    }
  }
  for (const auto& c : sigma) {
    if (c.arg < 0 || c.arg >= d || c.scale >= d) {
      throw std::invalid_argument("FlowModel: coefficient indices out of range");
    }
  }
  for (int i = 0; i < d; ++i) {
    if (exponential.empty() || !exponential[i]) continue;
    if (!b[i].is_zero()) {
      throw std::invalid_argument("FlowModel: exponential component must have zero drift");
    }
    for (int j = 0; j < d1; ++j) {
      const auto& c = sig(i, j);
      if (c.is_zero()) continue;
      if (c.scale != i || c.arg == i) {
        throw std::invalid_argument(
            "FlowModel: exponential component needs sigma_ij = c(z_other) * z_i");
      }
    }
  }
}

FlowModel scalar_flow(CoefficientFn drift, CoefficientFn diffusion, double T) {
  FlowModel m;
  m.d = 1;
  m.d1 = 1;
  m.b = {FlowCoefficient{std::move(drift), 0, -1}};
  m.sigma = {FlowCoefficient{std::move(diffusion), 0, -1}};
  m.T = T;
  m.validate();
  return m;
}

FlowModel likelihood_flow(const SystemModel& sys) {
  FlowModel m;
  m.d = 2;
  m.d1 = 2;
  m.b = {FlowCoefficient{sys.f, 0, -1}, FlowCoefficient{CoefficientFn::constant(0.0), 0, -1}};
  m.sigma = {
      FlowCoefficient{CoefficientFn::constant(1.0), 0, -1},  // dX ... + dw^1
      FlowCoefficient{CoefficientFn::constant(0.0), 0, -1},
      FlowCoefficient{CoefficientFn::constant(0.0), 0, -1},
      FlowCoefficient{sys.h, 0, 1},  // d rho^-1 = h(X) rho^-1 dw~
  };
  m.exponential = {0, 1};
  m.T = sys.T;
  m.validate();
  return m;
}

}  // namespace bsfilter
