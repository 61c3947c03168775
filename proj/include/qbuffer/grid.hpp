#ifndef QBUFFER_GRID_HPP
#define QBUFFER_GRID_HPP

#include <Eigen/Dense>

namespace qbuffer {

// Uniform time axis in nanoseconds. Also serves as the reference axis for
// the conjugate frequency grid (rad/ns) of the same state.
struct TimeGrid {
  int n_points = 0;
  double t_start = 0.0;
  double t_end = 0.0;

  double dt() const { return (t_end - t_start) / (n_points - 1); }
  double point(int i) const { return t_start + i * dt(); }
  double span() const { return t_end - t_start; }

  Eigen::VectorXd points() const;

  // Trapezoidal quadrature weights; folded into every inner product so
  // continuum normalization is grid independent.
  Eigen::VectorXd quadrature() const;

  bool operator==(const TimeGrid& other) const = default;
};

TimeGrid make_grid(int n_points, double t_start, double t_end);

// Conjugate frequency axis, centered on zero: omega_j = (j - n/2) * domega
// with domega = 2*pi / (n * dt).
double frequency_step(const TimeGrid& grid);
Eigen::VectorXd frequency_axis(const TimeGrid& grid);
Eigen::VectorXd frequency_quadrature(const TimeGrid& grid);

}  // namespace qbuffer

#endif
