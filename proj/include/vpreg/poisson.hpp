#pragma once

#include <memory>

#include "vpreg/diffops.hpp"

namespace vpreg {

/// Pseudo-spectral inverse of the (2d+1)-point Laplacian.
///
/// DirichletZero diagonalizes the stencil on the interior voxels with a
/// type-I sine transform; boundary voxels of the result are exactly zero and
/// boundary voxels of the right-hand side are ignored. Periodic uses the
/// complex exponential basis; the mean mode is projected out of the
/// right-hand side and the solution has zero mean.
///
/// Construction serializes on the FFTW planner; a constructed solver is
/// read-only and may be shared between threads.
class PoissonSolver {
 public:
  PoissonSolver(const Domain& domain, BcMode bc = BcMode::DirichletZero);
  ~PoissonSolver();
  PoissonSolver(const PoissonSolver&) = delete;
  PoissonSolver& operator=(const PoissonSolver&) = delete;

  const Domain& domain() const { return domain_; }
  BcMode bc() const { return bc_; }

  ScalarField solve(const ScalarField& rhs) const;
  VectorField solve(const VectorField& rhs) const;

  /// Eigenvalue of the discrete Laplacian for one basis mode. Dirichlet modes
  /// are 1-based sine indices, periodic modes are 0-based frequencies.
  double eigenvalue(int kx, int ky, int kz = 0) const;

 private:
  struct Plans;
  Domain domain_;
  BcMode bc_;
  std::unique_ptr<Plans> plans_;
};

/// Shorthand for PoissonSolver(rhs.domain(), bc).solve(rhs).
VectorField poisson_solve(const VectorField& rhs, BcMode bc = BcMode::DirichletZero);

/// Spectral differentiation on a periodic lattice (verification path).
/// Odd-derivative Nyquist modes are dropped, so curl(gradient) and
/// divergence(curl) vanish to rounding.
namespace spectral {
VectorField gradient(const ScalarField& s);
ScalarField divergence(const VectorField& v);
VectorField curl(const VectorField& v);
}  // namespace spectral

}  // namespace vpreg
