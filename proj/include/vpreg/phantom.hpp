#pragma once

#include <cstdint>

#include "vpreg/vpgrid.hpp"

namespace vpreg {

/// Synthetic inputs for tests, demos and the acceptance suite. Edges are
/// smoothed over roughly `edge` voxels with a tanh profile.
namespace phantom {

/// Filled disk (2-D) or ball (3-D) of the given radius at the lattice centre.
ScalarField ball(const Domain& domain, double radius, double edge = 1.5);
/// Axis-aligned ellipsoid with semi-axes (ax, ay, az) at the lattice centre.
ScalarField ellipsoid(const Domain& domain, double ax, double ay, double az, double edge = 1.5);
/// Disk with a rectangular notch cut from its +x side (2-D "C" shape).
ScalarField c_shape(const Domain& domain, double radius, double notch_depth, double notch_width, double edge = 1.5);

/// Foreground label (1) where the intensity exceeds `level`.
LabelVolume threshold(const ScalarField& img, double level = 0.5);

/// Smooth, interior-supported map w + amp * b(w) with random per-component
/// sine-product profiles; seed-deterministic.
Transform smooth_map(const Domain& domain, double amp, std::uint32_t seed);

/// Mass-preserving radial JD target: 1 + amp * exp(-r^2 / (2 width^2)),
/// renormalized to mean 1; zero curl target.
GridTargets radial_bump_targets(const Domain& domain, double amp, double width);

/// Random smooth JD and curl targets (a few Gaussian bumps), renormalized;
/// the curl target is a scalar in 2-D and divergence free in 3-D.
GridTargets random_targets(const Domain& domain, std::uint32_t seed, double jd_amp, double curl_amp);

}  // namespace phantom
}  // namespace vpreg
