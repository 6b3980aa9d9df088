#pragma once

#include "vpreg/field.hpp"

namespace vpreg {

/// Boundary treatment. For first-derivative stencils, DirichletZero means
/// one-sided second-order differences on the boundary faces and Periodic
/// means wrap-around. For Poisson solves it selects the sine or exponential
/// basis.
enum class BcMode { DirichletZero, Periodic };

// Second-order central differences along one axis (voxel units).
ScalarField partial(const ScalarField& s, int axis, BcMode bc = BcMode::DirichletZero);
// Exact transpose of `partial` as a linear map on the lattice.
ScalarField partial_adjoint(const ScalarField& s, int axis, BcMode bc = BcMode::DirichletZero);

VectorField gradient(const ScalarField& s, BcMode bc = BcMode::DirichletZero);
ScalarField divergence(const VectorField& v, BcMode bc = BcMode::DirichletZero);
/// curl of a d-component field: 3 components in 3-D, the scalar
/// dv2/dx - dv1/dy (one component) in 2-D.
VectorField curl(const VectorField& v, BcMode bc = BcMode::DirichletZero);
/// The operator g -> curl g applied to a curl-type field (3-D: ordinary curl;
/// 2-D: (dg/dy, -dg/dx)). Appears as the "- curl g" term of the control
/// equation lap(phi) = grad f - curl g.
VectorField rot(const VectorField& g, BcMode bc = BcMode::DirichletZero);

// Discrete adjoints. gradient_adjoint(v) ~ -div v, curl_adjoint ~ curl,
// rot_adjoint ~ curl, each exact as matrix transposes of the stencils above.
ScalarField gradient_adjoint(const VectorField& v, BcMode bc = BcMode::DirichletZero);
VectorField curl_adjoint(const VectorField& w, BcMode bc = BcMode::DirichletZero);
VectorField rot_adjoint(const VectorField& v, BcMode bc = BcMode::DirichletZero);

/// Per-voxel Jacobian matrix of a map given by d component fields.
/// entry(i, j) = d phi_i / d x_j.
class JacobianField {
 public:
  JacobianField(const VectorField& map, BcMode bc = BcMode::DirichletZero);

  int dim() const { return d_; }
  const Domain& domain() const { return entries_.front().domain(); }
  const ScalarField& entry(int i, int j) const { return entries_[i * d_ + j]; }
  /// Row-major d*d matrix at voxel v.
  void matrix_at(std::size_t v, double* out) const;

 private:
  int d_;
  std::vector<ScalarField> entries_;
};

double det2(const double* m);
double det3(const double* m);

ScalarField jacobian_determinant(const Transform& phi);
double min_interior_jd(const Transform& phi);
/// min over interior voxels of det grad phi > 0.
bool is_diffeomorphic(const Transform& phi);

ScalarField laplacian(const ScalarField& s, BcMode bc = BcMode::DirichletZero);
VectorField laplacian(const VectorField& v, BcMode bc = BcMode::DirichletZero);

/// div phi - det grad phi - 2 + det grad u + psi(u) with psi the six-term
/// cubic tail as printed for the small-displacement argument (3-D only).
/// psi coincides with det grad u, so this does not vanish: it equals
/// det grad u - E2(grad u), where E2 is the sum of principal 2x2 minors.
ScalarField small_displacement_residual(const Transform& phi);
/// div phi - det grad phi - (d - 1) + E2(grad u) + det grad u, which is
/// zero up to rounding for any phi since det(I + A) = 1 + tr A + E2(A) + det A.
ScalarField jacobian_expansion_residual(const Transform& phi);

}  // namespace vpreg
