#pragma once

#include "vpreg/field.hpp"

namespace vpreg {

/// Multilinear interpolation at a continuous position (voxel units).
/// Positions outside the lattice are clamped to the boundary face.
double sample(const ScalarField& img, double x, double y, double z = 0.0);

/// img sampled at phi(w) for every voxel w.
ScalarField warp(const ScalarField& img, const Transform& phi);
VectorField warp(const VectorField& v, const Transform& phi);

/// Gradient of the multilinear interpolant of img evaluated at phi(w).
/// On cell faces the one-sided slopes are averaged; along a clamped axis the
/// outside slope is zero.
VectorField warp_gradient(const ScalarField& img, const Transform& phi);

/// Transpose of `warp(., phi)` as a linear map: scatters r(w) onto the
/// interpolation nodes around phi(w) with the multilinear weights.
ScalarField warp_adjoint(const ScalarField& r, const Transform& phi);

/// result(w) = outer(inner(w)), with outer's coordinates interpolated
/// multilinearly; the boundary is re-pinned to identity.
Transform compose(const Transform& outer, const Transform& inner);

/// Per-voxel solution of phi(x) = w by damped Newton on the multilinear
/// interpolant of phi, so that compose(phi, result) is the identity wherever
/// the solve converges. Boundary voxels stay at the identity.
Transform pointwise_inverse(const Transform& phi);

}  // namespace vpreg
