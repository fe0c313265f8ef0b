#include "bsfilter/coefficients.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "bsfilter/errors.hpp"

namespace bsfilter {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// max over t in [-1,1] of |t - t^3|, attained at t = 1/sqrt(3)
const double kTanhD2Peak = 2.0 / (3.0 * std::sqrt(3.0));

// max over u of |(3u - u^3) e^{-u^2/2}|, attained at u^2 = 3 - sqrt(6)
double gauss_d3_peak() {
  const double u = std::sqrt(3.0 - std::sqrt(6.0));
  return std::abs((3.0 * u - u * u * u) * std::exp(-0.5 * u * u));
}

std::size_t expected_params(CoefficientKind kind) {
  switch (kind) {
    case CoefficientKind::Constant:
    case CoefficientKind::Linear:
    case CoefficientKind::Quadratic:
      return 1;
    case CoefficientKind::Tanh:
    case CoefficientKind::SineBounded:
      return 2;
    case CoefficientKind::GaussianBump:
      return 3;
  }
  return 0;
}

}  // namespace

CoefficientFn::CoefficientFn(CoefficientKind kind, std::vector<double> params)
    : kind_(kind), params_(std::move(params)) {
  if (params_.size() != expected_params(kind_)) {
    throw std::invalid_argument("CoefficientFn: wrong parameter count");
  }
  if (kind_ == CoefficientKind::GaussianBump && !(params_[2] > 0.0)) {
    throw std::invalid_argument("CoefficientFn: gaussian bump width must be positive");
  }
}

CoefficientFn::CoefficientFn() : CoefficientFn(CoefficientKind::Constant, {0.0}) {}

CoefficientFn CoefficientFn::constant(double c) { return {CoefficientKind::Constant, {c}}; }
CoefficientFn CoefficientFn::linear(double slope) { return {CoefficientKind::Linear, {slope}}; }
CoefficientFn CoefficientFn::quadratic(double a) { return {CoefficientKind::Quadratic, {a}}; }
CoefficientFn CoefficientFn::tanh(double amplitude, double rate) {
  return {CoefficientKind::Tanh, {amplitude, rate}};
}
CoefficientFn CoefficientFn::sine(double amplitude, double frequency) {
  return {CoefficientKind::SineBounded, {amplitude, frequency}};
}
CoefficientFn CoefficientFn::gaussian_bump(double amplitude, double center, double width) {
  return {CoefficientKind::GaussianBump, {amplitude, center, width}};
}

double CoefficientFn::eval(double x) const {
  switch (kind_) {
    case CoefficientKind::Constant:
      return params_[0];
    case CoefficientKind::Linear:
      return params_[0] * x;
    case CoefficientKind::Quadratic:
      return params_[0] * x * x;
    case CoefficientKind::Tanh:
      return params_[0] * std::tanh(params_[1] * x);
    case CoefficientKind::SineBounded:
      return params_[0] * std::sin(params_[1] * x);
    case CoefficientKind::GaussianBump: {
      const double u = (x - params_[1]) / params_[2];
      return params_[0] * std::exp(-0.5 * u * u);
    }
  }
  return 0.0;
}

double CoefficientFn::d1(double x) const {
  switch (kind_) {
    case CoefficientKind::Constant:
      return 0.0;
    case CoefficientKind::Linear:
      return params_[0];
    case CoefficientKind::Quadratic:
      return 2.0 * params_[0] * x;
    case CoefficientKind::Tanh: {
      const double t = std::tanh(params_[1] * x);
      return params_[0] * params_[1] * (1.0 - t * t);
    }
    case CoefficientKind::SineBounded:
      return params_[0] * params_[1] * std::cos(params_[1] * x);
    case CoefficientKind::GaussianBump: {
      const double s = params_[2];
      const double u = (x - params_[1]) / s;
      return -params_[0] / s * u * std::exp(-0.5 * u * u);
    }
  }
  return 0.0;
}

double CoefficientFn::d2(double x) const {
  switch (kind_) {
    case CoefficientKind::Constant:
    case CoefficientKind::Linear:
      return 0.0;
    case CoefficientKind::Quadratic:
      return 2.0 * params_[0];
    case CoefficientKind::Tanh: {
      const double b = params_[1];
      const double t = std::tanh(b * x);
      return -2.0 * params_[0] * b * b * t * (1.0 - t * t);
    }
    case CoefficientKind::SineBounded: {
      const double k = params_[1];
      return -params_[0] * k * k * std::sin(k * x);
    }
    case CoefficientKind::GaussianBump: {
      const double s = params_[2];
      const double u = (x - params_[1]) / s;
      return params_[0] / (s * s) * (u * u - 1.0) * std::exp(-0.5 * u * u);
    }
  }
  return 0.0;
}

double CoefficientFn::d3(double x) const {
  switch (kind_) {
    case CoefficientKind::Constant:
    case CoefficientKind::Linear:
    case CoefficientKind::Quadratic:
      return 0.0;
    case CoefficientKind::Tanh: {
      const double b = params_[1];
      const double t = std::tanh(b * x);
      return -2.0 * params_[0] * b * b * b * (1.0 - 3.0 * t * t) * (1.0 - t * t);
    }
    case CoefficientKind::SineBounded: {
      const double k = params_[1];
      return -params_[0] * k * k * k * std::cos(k * x);
    }
    case CoefficientKind::GaussianBump: {
      const double s = params_[2];
      const double u = (x - params_[1]) / s;
      return params_[0] / (s * s * s) * (3.0 * u - u * u * u) * std::exp(-0.5 * u * u);
    }
  }
  return 0.0;
}

SupNorms CoefficientFn::sup_norms() const {
  switch (kind_) {
    case CoefficientKind::Constant:
      return {{std::abs(params_[0]), 0.0, 0.0, 0.0}, true};
    case CoefficientKind::Linear:
      return {{kInf, std::abs(params_[0]), 0.0, 0.0}, false};
    case CoefficientKind::Quadratic:
      return {{kInf, kInf, 2.0 * std::abs(params_[0]), 0.0}, false};
    case CoefficientKind::Tanh: {
      const double a = std::abs(params_[0]);
      const double b = std::abs(params_[1]);
      return {{a, a * b, 2.0 * a * b * b * kTanhD2Peak, 2.0 * a * b * b * b}, true};
    }
    case CoefficientKind::SineBounded: {
      const double a = std::abs(params_[0]);
      const double k = std::abs(params_[1]);
      return {{a, a * k, a * k * k, a * k * k * k}, true};
    }
    case CoefficientKind::GaussianBump: {
      const double a = std::abs(params_[0]);
      const double s = params_[2];
      static const double d3peak = gauss_d3_peak();
      return {{a, a / s * std::exp(-0.5), a / (s * s), a / (s * s * s) * d3peak}, true};
    }
  }
  return {{0.0, 0.0, 0.0, 0.0}, true};
}

bool CoefficientFn::is_zero() const {
  switch (kind_) {
    case CoefficientKind::Constant:
    case CoefficientKind::Linear:
    case CoefficientKind::Quadratic:
      return params_[0] == 0.0;
    case CoefficientKind::Tanh:
    case CoefficientKind::SineBounded:
    case CoefficientKind::GaussianBump:
      return params_[0] == 0.0;
  }
  return false;
}

std::string CoefficientFn::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case CoefficientKind::Constant:
      os << "constant";
      break;
    case CoefficientKind::Linear:
      os << "linear";
      break;
    case CoefficientKind::Quadratic:
      os << "quadratic";
      break;
    case CoefficientKind::Tanh:
      os << "tanh";
      break;
    case CoefficientKind::SineBounded:
      os << "sine";
      break;
    case CoefficientKind::GaussianBump:
      os << "gauss";
      break;
  }
  os << "(";
  for (std::size_t i = 0; i < params_.size(); ++i) os << (i ? "," : "") << params_[i];
  os << ")";
  return os.str();
}

bool SystemModel::assumption_violation() const {
  return !f.bounded() || !h.bounded() || !g.bounded();
}

SystemModel make_system_model(CoefficientFn f, CoefficientFn h, CoefficientFn g, double x0,
                              double y0, double T, bool allow_unbounded) {
  if (!(T > 0.0)) throw ConfigError("model: horizon T must be positive");
  if (!allow_unbounded && (!f.bounded() || !h.bounded() || !g.bounded())) {
    throw ConfigError(
        "model: unbounded coefficient kinds require allow_unbounded "
        "(analytic-oracle test cases only)");
  }
  return SystemModel{std::move(f), std::move(h), std::move(g), x0, y0, T};
}

}  // namespace bsfilter
