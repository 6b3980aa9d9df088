#include "doctest.h"

#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "vpreg/diffops.hpp"
#include "vpreg/resample.hpp"
#include "oracles.hpp"

using namespace vpreg;
using std::numbers::pi;

namespace {

Transform smooth_map(const Domain& d, double amp, int seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  VectorField x = identity_coords(d);
  for (int c = 0; c < d.dim(); ++c) {
    const double a = amp * u(rng), ph = u(rng);
    for (std::size_t i = 0; i < d.size(); ++i) {
      const auto p = d.coords(i);
      double b = 1;
      for (int k = 0; k < d.dim(); ++k) b *= std::sin(pi * p[k] / (d.extent(k) - 1));
      x[c][i] += a * b * std::cos(pi * p[(c + 1) % d.dim()] / (d.extent(0) - 1) + ph);
    }
  }
  return Transform(x);
}

ScalarField smooth_image(const Domain& d) {
  ScalarField s(d);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto p = d.coords(i);
    s[i] = std::sin(0.2 * p[0]) * std::cos(0.15 * p[1]) + 0.1 * p[2];
  }
  return s;
}

}  // namespace

TEST_CASE("warp by identity is exact") {
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(-5, 5);
  for (const Domain& d : {Domain{9, 10, 11}, Domain{12, 8}}) {
    ScalarField img(d);
    for (auto& v : img.values()) v = u(rng);
    const ScalarField w = warp(img, make_identity(d));
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(w[i] == img[i]);
  }
}

TEST_CASE("warp of constant and bound preservation") {
  const Domain d{16, 16, 16};
  const Transform phi = smooth_map(d, 2.0, 3);
  const ScalarField w = warp(ScalarField(d, 7.25), phi);
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(w[i] == doctest::Approx(7.25).epsilon(1e-15));
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> u(-3, 4);
  ScalarField img(d);
  for (auto& v : img.values()) v = u(rng);
  double lo = 1e9, hi = -1e9;
  for (double v : img.values()) lo = std::min(lo, v), hi = std::max(hi, v);
  const ScalarField wi = warp(img, phi);
  for (double v : wi.values()) {
    CHECK(v >= lo - 1e-12);
    CHECK(v <= hi + 1e-12);
  }
}

TEST_CASE("integer shift of a ramp") {
  const Domain d{12, 10, 9};
  ScalarField ramp(d);
  for (std::size_t i = 0; i < d.size(); ++i) ramp[i] = 3.0 * d.coords(i)[0] + d.coords(i)[1];
  VectorField x = identity_coords(d);
  for (auto& v : x[0].values()) v += 1.0;
  const Transform shift(x);
  const ScalarField w = warp(ramp, shift);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto c = d.coords(i);
    if (d.on_boundary(i) || c[0] >= 10) continue;
    CHECK(w[i] == doctest::Approx(ramp.at(c[0] + 1, c[1], c[2])));
  }
  // clamping beyond the last face
  CHECK(sample(ramp, 20.0, 2.0, 3.0) == doctest::Approx(3.0 * 11 + 2));
  CHECK(sample(ramp, -4.0, 2.0, 3.0) == doctest::Approx(2.0));
}

TEST_CASE("compose identities and translations") {
  const Domain d{16, 16};
  const Transform phi = smooth_map(d, 2.0, 5);
  const Transform id = make_identity(d);
  const Transform a = compose(id, phi), b = compose(phi, id);
  for (int c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < d.size(); ++i) {
      CHECK(a.coords()[c][i] == doctest::Approx(phi.coords()[c][i]).epsilon(1e-14));
      CHECK(b.coords()[c][i] == phi.coords()[c][i]);
    }
  VectorField t1 = identity_coords(d), t2 = identity_coords(d);
  for (auto& v : t1[0].values()) v += 0.3;
  for (auto& v : t2[1].values()) v -= 0.45;
  for (auto& v : t2[0].values()) v += 0.2;
  const Transform s = compose(Transform(t1), Transform(t2));
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto c = d.coords(i);
    if (c[0] < 2 || c[0] > 12 || c[1] < 2 || c[1] > 12) continue;
    CHECK(s.coords()[0][i] == doctest::Approx(c[0] + 0.5));
    CHECK(s.coords()[1][i] == doctest::Approx(c[1] - 0.45));
  }
}

TEST_CASE("double resample agrees with composed resample") {
  const Domain d{32, 32, 16};
  const ScalarField img = smooth_image(d);
  const Transform outer = smooth_map(d, 1.5, 7), inner = smooth_map(d, 1.5, 8);
  const ScalarField twice = warp(warp(img, outer), inner);
  const ScalarField once = warp(img, compose(outer, inner));
  const ScalarField single = warp(img, outer);
  // reference interpolation error: analytic image at outer positions
  double e_ref = 0, e = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double x = outer.coords()[0][i], y = outer.coords()[1][i], z = outer.coords()[2][i];
    e_ref = std::max(e_ref, std::abs(single[i] - (std::sin(0.2 * x) * std::cos(0.15 * y) + 0.1 * z)));
    e = std::max(e, std::abs(twice[i] - once[i]));
  }
  CHECK(e <= 2.0 * e_ref + 1e-12);
}

TEST_CASE("jacobian multiplicativity under composition") {
  const Domain d{48, 48};
  const Transform a = smooth_map(d, 2.0, 11), b = smooth_map(d, 2.0, 12);
  const ScalarField jab = jacobian_determinant(compose(a, b));
  const ScalarField ja = warp(jacobian_determinant(a), b);
  const ScalarField jb = jacobian_determinant(b);
  double err = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto c = d.coords(i);
    if (c[0] < 3 || c[1] < 3 || c[0] > 44 || c[1] > 44) continue;
    err = std::max(err, std::abs(jab[i] - ja[i] * jb[i]));
  }
  CHECK(err < 2e-2);
}

TEST_CASE("interpolant gradient matches finite differences of sampling") {
  const Domain d{12, 11, 10};
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  ScalarField img(d);
  for (auto& v : img.values()) v = u(rng);
  const Transform phi = smooth_map(d, 1.7, 9);
  const VectorField g = warp_gradient(img, phi);
  const double h = 1e-6;
  for (std::size_t i = 0; i < d.size(); i += 7) {
    if (d.on_boundary(i)) continue;
    const double p[3] = {phi.coords()[0][i], phi.coords()[1][i], phi.coords()[2][i]};
    for (int a = 0; a < 3; ++a) {
      double pp[3] = {p[0], p[1], p[2]}, pm[3] = {p[0], p[1], p[2]};
      pp[a] += h;
      pm[a] -= h;
      const double fd = (sample(img, pp[0], pp[1], pp[2]) - sample(img, pm[0], pm[1], pm[2])) / (2 * h);
      CHECK(g[a][i] == doctest::Approx(fd).scale(1.0).epsilon(1e-6));
    }
  }
  // on lattice nodes the slopes of the two adjacent cells are averaged
  const VectorField gi = warp_gradient(img, make_identity(d));
  const VectorField cd = gradient(img);
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.on_boundary(i)) continue;
    for (int a = 0; a < 3; ++a) CHECK(gi[a][i] == doctest::Approx(cd[a][i]).epsilon(1e-14));
  }
}

TEST_CASE("warp_adjoint is the transpose of warp") {
  const Domain d{10, 9};
  std::mt19937 rng(6);
  std::uniform_real_distribution<double> u(-1, 1);
  ScalarField a(d), r(d);
  for (auto& v : a.values()) v = u(rng);
  for (auto& v : r.values()) v = u(rng);
  const Transform phi = smooth_map(d, 2.5, 1);
  const ScalarField wa = warp(a, phi), ar = warp_adjoint(r, phi);
  double lhs = 0, rhs = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    lhs += wa[i] * r[i];
    rhs += a[i] * ar[i];
  }
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-13));
}

TEST_CASE("pointwise inverse solves phi(x) = w") {
  for (const Domain& d : {Domain{24, 24}, Domain{16, 16, 16}}) {
    const Transform phi = smooth_map(d, 2.0, 11);
    const Transform inv = pointwise_inverse(phi);
    double worst = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const auto w = d.coords(i);
      std::array<double, 3> x{0, 0, 0};
      for (int a = 0; a < d.dim(); ++a) x[a] = inv.coords()[a][i];
      for (int a = 0; a < d.dim(); ++a) worst = std::max(worst, std::abs(oracle::interp(phi.coords()[a], x) - w[a]));
    }
    CHECK(worst < 1e-9);
    CHECK(min_interior_jd(inv) > 0);
  }
  const Domain d{16, 16};
  VectorField t = identity_coords(d);
  for (auto& v : t[0].values()) v += 0.3;
  const Transform inv = pointwise_inverse(Transform(t));
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto c = d.coords(i);
    if (c[0] < 2 || c[0] > 13 || c[1] < 1 || c[1] > 14) continue;
    CHECK(inv.coords()[0][i] == doctest::Approx(c[0] - 0.3));
    CHECK(inv.coords()[1][i] == doctest::Approx(c[1]));
  }
}
