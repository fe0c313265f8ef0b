#pragma once

#include <vector>

namespace bsfilter {

// Time partition t_0 < t_1 < ... < t_N = T. t_0 is usually 0 but suffix grids
// (flows restarted at an interior time) keep their original offset.
class TimeGrid {
 public:
  static TimeGrid uniform(double horizon, int n_steps, double t_start = 0.0);
  static TimeGrid from_points(std::vector<double> points);

  int n_steps() const { return static_cast<int>(t_.size()) - 1; }
  int size() const { return static_cast<int>(t_.size()); }
  double t(int i) const { return t_[i]; }
  double dt(int i) const { return dt_[i]; }
  double t_start() const { return t_.front(); }
  double horizon() const { return t_.back(); }
  double duration() const { return t_.back() - t_.front(); }
  double max_dt() const;
  bool uniform_spacing() const { return uniform_; }
  const std::vector<double>& points() const { return t_; }

  // Identical partition, bit for bit. Integrals and solvers require this.
  bool aligned_with(const TimeGrid& other) const { return t_ == other.t_; }

  // Sub-grid [t_s, T].
  TimeGrid suffix(int s_idx) const;

  // Keep every `factor`-th point (n_steps must divide evenly).
  TimeGrid coarsen(int factor) const;

  // Grid of the time-reversed path: same step sizes in reverse order,
  // anchored at 0.
  TimeGrid reversed() const;

 private:
  TimeGrid(std::vector<double> t, bool uniform);

  std::vector<double> t_;
  std::vector<double> dt_;
  bool uniform_;
};

}  // namespace bsfilter
