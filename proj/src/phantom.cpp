#include "vpreg/phantom.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace vpreg::phantom {
namespace {

using std::numbers::pi;

std::array<double, 3> centre(const Domain& d) {
  return {0.5 * (d.extent(0) - 1), 0.5 * (d.extent(1) - 1), d.dim() == 3 ? 0.5 * (d.extent(2) - 1) : 0.0};
}

// Smooth indicator of {sd < 0} for a signed distance sd.
double soft(double sd, double edge) { return 0.5 * (1.0 - std::tanh(sd / edge)); }

double sine_window(const Domain& d, const std::array<int, 3>& c) {
  double b = 1;
  for (int a = 0; a < d.dim(); ++a) b *= std::sin(pi * c[a] / (d.extent(a) - 1));
  return b;
}

}  // namespace

ScalarField ball(const Domain& domain, double radius, double edge) {
  return ellipsoid(domain, radius, radius, radius, edge);
}

ScalarField ellipsoid(const Domain& domain, double ax, double ay, double az, double edge) {
  const auto o = centre(domain);
  const double axes[3] = {ax, ay, az};
  ScalarField s(domain);
  for (std::size_t i = 0; i < domain.size(); ++i) {
    const auto c = domain.coords(i);
    double q = 0;
    for (int a = 0; a < domain.dim(); ++a) q += std::pow((c[a] - o[a]) / axes[a], 2);
    // approximate signed distance: scaled by the mean semi-axis
    const double mean_axis = domain.dim() == 3 ? (ax + ay + az) / 3 : (ax + ay) / 2;
    s[i] = soft((std::sqrt(q) - 1.0) * mean_axis, edge);
  }
  return s;
}

ScalarField c_shape(const Domain& domain, double radius, double notch_depth, double notch_width, double edge) {
  const auto o = centre(domain);
  ScalarField s(domain);
  for (std::size_t i = 0; i < domain.size(); ++i) {
    const auto c = domain.coords(i);
    const double dx = c[0] - o[0], dy = c[1] - o[1];
    const double sd_disk = std::hypot(dx, dy) - radius;
    // notch: box x > radius - depth, |y| < width / 2
    const double sd_box = std::max(radius - notch_depth - dx, std::abs(dy) - 0.5 * notch_width);
    s[i] = soft(std::max(sd_disk, -sd_box), edge);
  }
  return s;
}

LabelVolume threshold(const ScalarField& img, double level) {
  std::vector<std::int32_t> l(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) l[i] = img[i] > level ? 1 : 0;
  return LabelVolume(img.domain(), std::move(l));
}

Transform smooth_map(const Domain& domain, double amp, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  VectorField x = identity_coords(domain);
  const int d = domain.dim();
  for (int comp = 0; comp < d; ++comp) {
    const double a = amp * u(rng), ph = pi * u(rng);
    const int k = 1 + static_cast<int>(2 * std::abs(u(rng)));
    for (std::size_t i = 0; i < domain.size(); ++i) {
      const auto c = domain.coords(i);
      const double along = pi * k * c[(comp + 1) % d] / (domain.extent((comp + 1) % d) - 1);
      x[comp][i] += a * sine_window(domain, c) * std::cos(along + ph);
    }
  }
  return Transform(std::move(x));
}

GridTargets radial_bump_targets(const Domain& domain, double amp, double width) {
  const auto o = centre(domain);
  GridTargets t = identity_targets(domain);
  for (std::size_t i = 0; i < domain.size(); ++i) {
    const auto c = domain.coords(i);
    double r2 = 0;
    for (int a = 0; a < domain.dim(); ++a) r2 += (c[a] - o[a]) * (c[a] - o[a]);
    t.f_t[i] = 1.0 + amp * std::exp(-r2 / (2 * width * width));
  }
  return renormalize(std::move(t));
}

GridTargets random_targets(const Domain& domain, std::uint32_t seed, double jd_amp, double curl_amp) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  const int d = domain.dim();
  auto bumps = [&](double amp, int count) {
    ScalarField s(domain);
    for (int b = 0; b < count; ++b) {
      double ctr[3] = {0, 0, 0};
      for (int a = 0; a < d; ++a) ctr[a] = (0.25 + 0.5 * u(rng)) * (domain.extent(a) - 1);
      const double w = (0.08 + 0.06 * u(rng)) * domain.extent(0);
      const double sign = u(rng) < 0.5 ? -1.0 : 1.0;
      for (std::size_t i = 0; i < domain.size(); ++i) {
        const auto c = domain.coords(i);
        double r2 = 0;
        for (int a = 0; a < d; ++a) r2 += (c[a] - ctr[a]) * (c[a] - ctr[a]);
        s[i] += sign * amp * std::exp(-r2 / (2 * w * w)) * sine_window(domain, c);
      }
    }
    return s;
  };
  GridTargets t = identity_targets(domain);
  t.f_t += bumps(jd_amp, 3);
  if (d == 2) {
    t.g_t[0] = bumps(curl_amp, 3);
  } else {
    // curl of a smooth potential is discretely divergence free
    const VectorField pot({bumps(curl_amp, 2), bumps(curl_amp, 2), bumps(curl_amp, 2)});
    t.g_t = curl(pot);
  }
  return renormalize(std::move(t));
}

}  // namespace vpreg::phantom
