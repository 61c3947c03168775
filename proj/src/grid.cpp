#include "qbuffer/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace qbuffer {

TimeGrid make_grid(int n_points, double t_start, double t_end) {
  if (n_points < 2)
    throw std::invalid_argument("make_grid: n_points must be >= 2");
  if (!(t_end > t_start))
    throw std::invalid_argument("make_grid: t_end must exceed t_start");
  if (!std::isfinite(t_start) || !std::isfinite(t_end))
    throw std::invalid_argument("make_grid: bounds must be finite");
  return TimeGrid{n_points, t_start, t_end};
}

Eigen::VectorXd TimeGrid::points() const {
  Eigen::VectorXd p(n_points);
  const double h = dt();
  for (int i = 0; i < n_points; ++i) p[i] = t_start + i * h;
  return p;
}

Eigen::VectorXd TimeGrid::quadrature() const {
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n_points, dt());
  w[0] *= 0.5;
  w[n_points - 1] *= 0.5;
  return w;
}

double frequency_step(const TimeGrid& grid) {
  return 2.0 * M_PI / (grid.n_points * grid.dt());
}

Eigen::VectorXd frequency_axis(const TimeGrid& grid) {
  const int n = grid.n_points;
  const double dw = frequency_step(grid);
  Eigen::VectorXd w(n);
  for (int j = 0; j < n; ++j) w[j] = (j - n / 2) * dw;
  return w;
}

Eigen::VectorXd frequency_quadrature(const TimeGrid& grid) {
  const int n = grid.n_points;
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, frequency_step(grid));
  w[0] *= 0.5;
  w[n - 1] *= 0.5;
  return w;
}

}  // namespace qbuffer
