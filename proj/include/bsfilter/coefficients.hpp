#pragma once

#include <array>
#include <string>
#include <vector>

namespace bsfilter {

// Closed catalog of coefficient functions. Everything the solvers need from a
// coefficient -- values, exact first/second/third derivatives, sup-norm bounds
// for the function and three derivatives -- is available in closed form.
enum class CoefficientKind {
  Constant,      // c
  Linear,        // a*x            (unbounded; Kalman-Bucy oracle only)
  Quadratic,     // a*x^2          (unbounded; heat-moment oracle only)
  Tanh,          // a*tanh(b*x)
  SineBounded,   // a*sin(k*x)
  GaussianBump,  // a*exp(-(x-c)^2/(2 s^2))
};

// Sup norms of (fn, fn', fn'', fn'''); entries are +inf where the bound does
// not exist. `bounded` is true only when all four are finite (the C^3_b class
// the ratio representation assumes).
struct SupNorms {
  std::array<double, 4> value;
  bool bounded;
};

class CoefficientFn {
 public:
  CoefficientFn();  // Constant(0)

  static CoefficientFn constant(double c);
  static CoefficientFn linear(double slope);
  static CoefficientFn quadratic(double a);
  static CoefficientFn tanh(double amplitude, double rate);
  static CoefficientFn sine(double amplitude, double frequency);
  static CoefficientFn gaussian_bump(double amplitude, double center, double width);

  double eval(double x) const;
  double d1(double x) const;
  double d2(double x) const;
  double d3(double x) const;

  SupNorms sup_norms() const;
  bool bounded() const { return sup_norms().bounded; }
  bool is_zero() const;

  CoefficientKind kind() const { return kind_; }
  const std::vector<double>& params() const { return params_; }
  std::string describe() const;

 private:
  CoefficientFn(CoefficientKind kind, std::vector<double> params);

  CoefficientKind kind_;
  std::vector<double> params_;
};

// The filtering system: signal drift f, observation function h, readout g,
// deterministic initial data and a fixed horizon.
struct SystemModel {
  CoefficientFn f;
  CoefficientFn h;
  CoefficientFn g;
  double x0 = 0.0;
  double y0 = 0.0;
  double T = 1.0;

  // True when some coefficient leaves C^3_b (Linear/Quadratic kinds). Every
  // result produced from such a model carries this flag in its metadata.
  bool assumption_violation() const;
};

// Validating constructor. Unbounded coefficients are admitted only when the
// caller opts in (analytic-oracle test cases).
SystemModel make_system_model(CoefficientFn f, CoefficientFn h, CoefficientFn g, double x0,
                              double y0, double T, bool allow_unbounded = false);

}  // namespace bsfilter
