#include "bsfilter/time_grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bsfilter {

namespace {

bool looks_uniform(const std::vector<double>& dt, double duration) {
  const double target = duration / static_cast<double>(dt.size());
  for (double d : dt) {
    if (std::abs(d - target) > 1e-12 * std::max(duration, 1.0)) return false;
  }
  return true;
}

}  // namespace

TimeGrid::TimeGrid(std::vector<double> t, bool uniform) : t_(std::move(t)), uniform_(uniform) {
  dt_.resize(t_.size() - 1);
  for (std::size_t i = 0; i + 1 < t_.size(); ++i) dt_[i] = t_[i + 1] - t_[i];
}

TimeGrid TimeGrid::uniform(double horizon, int n_steps, double t_start) {
  if (n_steps < 1) throw std::invalid_argument("TimeGrid: need at least one step");
  if (!(horizon > t_start)) throw std::invalid_argument("TimeGrid: horizon must exceed start");
  std::vector<double> t(static_cast<std::size_t>(n_steps) + 1);
  const double span = horizon - t_start;
  for (int i = 0; i <= n_steps; ++i) {
    t[i] = t_start + span * (static_cast<double>(i) / n_steps);
  }
  t[n_steps] = horizon;
  return TimeGrid(std::move(t), true);
}

TimeGrid TimeGrid::from_points(std::vector<double> points) {
  if (points.size() < 2) throw std::invalid_argument("TimeGrid: need at least two points");
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    if (!(points[i] < points[i + 1])) {
      throw std::invalid_argument("TimeGrid: points must be strictly increasing");
    }
  }
  std::vector<double> dt(points.size() - 1);
  for (std::size_t i = 0; i + 1 < points.size(); ++i) dt[i] = points[i + 1] - points[i];
  const bool uniform = looks_uniform(dt, points.back() - points.front());
  return TimeGrid(std::move(points), uniform);
}

double TimeGrid::max_dt() const { return *std::max_element(dt_.begin(), dt_.end()); }

TimeGrid TimeGrid::suffix(int s_idx) const {
  if (s_idx < 0 || s_idx >= n_steps()) {
    throw std::invalid_argument("TimeGrid::suffix: index out of range");
  }
  return TimeGrid(std::vector<double>(t_.begin() + s_idx, t_.end()), uniform_);
}

TimeGrid TimeGrid::coarsen(int factor) const {
  if (factor < 1 || n_steps() % factor != 0) {
    throw std::invalid_argument("TimeGrid::coarsen: factor must divide the step count");
  }
  std::vector<double> t;
  t.reserve(static_cast<std::size_t>(n_steps() / factor) + 1);
  for (int i = 0; i <= n_steps(); i += factor) t.push_back(t_[i]);
  return TimeGrid(std::move(t), uniform_);
}

TimeGrid TimeGrid::reversed() const {
  std::vector<double> t(t_.size());
  t[0] = 0.0;
  for (std::size_t i = 0; i < dt_.size(); ++i) t[i + 1] = t[i] + dt_[dt_.size() - 1 - i];
  return TimeGrid(std::move(t), uniform_);
}

}  // namespace bsfilter
