#ifndef QBUFFER_MODE_STATE_HPP
#define QBUFFER_MODE_STATE_HPP

#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qbuffer/grid.hpp"

namespace qbuffer {

using Complex = std::complex<double>;
using MatrixXcd = Eigen::MatrixXcd;
using VectorXcd = Eigen::VectorXcd;
using VectorXd = Eigen::VectorXd;

enum class Domain { time, frequency };

// Single-photon temporal-spectral density matrix on a discrete axis.
// Hermitian, positive semidefinite, unit trace under the trapezoidal
// quadrature of the active axis. Immutable once constructed.
class ModeState {
 public:
  // Validates Hermiticity, positivity and unit trace; throws on violation.
  ModeState(MatrixXcd rho, TimeGrid grid, Domain domain);

  const MatrixXcd& rho() const { return rho_; }
  const TimeGrid& grid() const { return grid_; }
  Domain domain() const { return domain_; }
  int size() const { return grid_.n_points; }

  // Active axis (time in ns or angular frequency in rad/ns) and its
  // trapezoidal quadrature weights.
  VectorXd axis() const;
  VectorXd quadrature() const;

  bool same_layout(const ModeState& other) const {
    return grid_ == other.grid_ && domain_ == other.domain_;
  }

 private:
  TimeGrid grid_;
  Domain domain_ = Domain::time;
  MatrixXcd rho_;
};

// Eigendecomposition of a state: descending weights alpha_k summing to one,
// modes orthonormal under the grid quadrature, global phase fixed by making
// each mode's largest-magnitude component real positive.
struct ModeDecomposition {
  VectorXd weights;   // descending, >= 0, sum 1
  MatrixXcd modes;    // column k is psi_k

  // Schmidt number 1 / sum(alpha^2).
  double schmidt_number() const;
};

ModeDecomposition eigendecompose(const ModeState& state);

// Purity Tr[rho^2] under the quadrature; the HOM visibility of successive
// photons from one source.
double self_indistinguishability(const ModeState& state);

// Tr[rho_a rho_b]; the HOM visibility of photons from two sources. The
// overlap is not corrected for unequal source brightness.
double inter_indistinguishability(const ModeState& a, const ModeState& b);

// Unitary change of representation between the time axis and its conjugate
// frequency axis. Trace and purity are preserved exactly; round trips
// reproduce the input.
ModeState to_frequency(const ModeState& state);
ModeState to_time(const ModeState& state);

// Repairs a raw matrix into a valid state: symmetrizes, clips negative
// eigenvalues, renormalizes the trace. Identity on already-valid states.
ModeState project_physical(const MatrixXcd& raw, const TimeGrid& grid,
                           Domain domain = Domain::time);

// Rank-1 state |psi><psi| from an envelope (normalized internally).
ModeState pure_state(const VectorXcd& envelope, const TimeGrid& grid,
                     Domain domain = Domain::time);

// Convex mixture of states on a common layout.
ModeState mix_states(const std::vector<std::pair<double, ModeState>>& terms);

// Versioned binary container; round-trips bit-exactly.
void save_state(const ModeState& state, const std::string& path);
ModeState load_state(const std::string& path);

namespace detail {

// Quadrature-symmetrized representation A = W^(1/2) rho W^(1/2). All
// spectral operations run on A so that continuum inner products reduce to
// plain matrix algebra.
MatrixXcd symmetrized(const MatrixXcd& rho, const VectorXd& weights);
MatrixXcd unsymmetrized(const MatrixXcd& a, const VectorXd& weights);

// Fix the global phase of each column: largest-magnitude entry real positive.
void fix_mode_phases(MatrixXcd& modes);

}  // namespace detail

}  // namespace qbuffer

#endif
