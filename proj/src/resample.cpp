#include "vpreg/resample.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace vpreg {
namespace {

struct AxisPos {
  int i0 = 0;      // left node of the cell
  double t = 0.0;  // fraction inside the cell
  bool clamped = false;
};

AxisPos locate(double p, int n) {
  AxisPos a;
  if (n == 1) return a;
  if (!(p > 0.0)) {
    a.clamped = p < 0.0;
    return a;
  }
  if (p >= n - 1) {
    a.clamped = p > n - 1;
    a.i0 = n - 2;
    a.t = 1.0;
    return a;
  }
  a.i0 = static_cast<int>(std::floor(p));
  if (a.i0 > n - 2) a.i0 = n - 2;
  a.t = p - a.i0;
  return a;
}

// Cell corner enumeration over the active axes.
struct Cell {
  const Domain& dom;
  AxisPos ax[3];

  Cell(const Domain& d, double x, double y, double z) : dom(d) {
    ax[0] = locate(x, d.extent(0));
    ax[1] = locate(y, d.extent(1));
    ax[2] = locate(z, d.extent(2));
  }

  int corners() const { return dom.dim() == 3 ? 8 : 4; }

  // Index and weight of corner c; bit a of c selects i0 or i0 + 1 on axis a.
  // `shift_axis`/`left` substitute a different cell along one axis.
  std::size_t node(int c, int shift_axis = -1, int left = 0) const {
    int idx[3] = {0, 0, 0};
    for (int a = 0; a < dom.dim(); ++a) idx[a] = (a == shift_axis ? left : ax[a].i0) + ((c >> a) & 1);
    return dom.index(idx[0], idx[1], idx[2]);
  }
  double weight(int c) const {
    double w = 1.0;
    for (int a = 0; a < dom.dim(); ++a) w *= ((c >> a) & 1) ? ax[a].t : 1.0 - ax[a].t;
    return w;
  }

  double value(std::span<const double> v) const {
    double s = 0;
    for (int c = 0; c < corners(); ++c) {
      const double w = weight(c);
      if (w != 0.0) s += w * v[node(c)];
    }
    return s;
  }

  // Slope along `axis` of the cell whose left node is `left`, interpolated
  // over the remaining axes.
  double slope(std::span<const double> v, int axis, int left) const {
    double s = 0;
    for (int c = 0; c < corners(); ++c) {
      double w = 1.0;
      for (int a = 0; a < dom.dim(); ++a) {
        if (a == axis) continue;
        w *= ((c >> a) & 1) ? ax[a].t : 1.0 - ax[a].t;
      }
      if (w == 0.0) continue;
      s += ((c >> axis) & 1 ? w : -w) * v[node(c, axis, left)];
    }
    return s;
  }

  double derivative(std::span<const double> v, int axis) const {
    const AxisPos& p = ax[axis];
    const int n = dom.extent(axis);
    if (p.clamped) return 0.0;
    if (p.t == 0.0) {
      const double right = slope(v, axis, p.i0);
      const double left = p.i0 > 0 ? slope(v, axis, p.i0 - 1) : 0.0;
      return 0.5 * (left + right);
    }
    if (p.t == 1.0 && p.i0 == n - 2) return 0.5 * slope(v, axis, p.i0);
    return slope(v, axis, p.i0);
  }
};

double coord(const Transform& phi, int axis, std::size_t i) {
  return axis < phi.dim() ? phi.coords()[axis][i] : 0.0;
}

}  // namespace

double sample(const ScalarField& img, double x, double y, double z) {
  return Cell(img.domain(), x, y, z).value(img.values());
}

ScalarField warp(const ScalarField& img, const Transform& phi) {
  require_same_domain(img.domain(), phi.domain(), "warp");
  const Domain& dom = img.domain();
  ScalarField out(dom);
  auto v = img.values();
  for (std::size_t i = 0; i < dom.size(); ++i) {
    out[i] = Cell(dom, coord(phi, 0, i), coord(phi, 1, i), coord(phi, 2, i)).value(v);
  }
  return out;
}

VectorField warp(const VectorField& v, const Transform& phi) {
  std::vector<ScalarField> comps;
  for (int c = 0; c < v.components(); ++c) comps.push_back(warp(v[c], phi));
  return VectorField(std::move(comps));
}

VectorField warp_gradient(const ScalarField& img, const Transform& phi) {
  require_same_domain(img.domain(), phi.domain(), "warp_gradient");
  const Domain& dom = img.domain();
  VectorField out(dom, dom.dim());
  auto v = img.values();
  for (std::size_t i = 0; i < dom.size(); ++i) {
    const Cell cell(dom, coord(phi, 0, i), coord(phi, 1, i), coord(phi, 2, i));
    for (int a = 0; a < dom.dim(); ++a) out[a][i] = cell.derivative(v, a);
  }
  return out;
}

ScalarField warp_adjoint(const ScalarField& r, const Transform& phi) {
  require_same_domain(r.domain(), phi.domain(), "warp_adjoint");
  const Domain& dom = r.domain();
  ScalarField out(dom);
  for (std::size_t i = 0; i < dom.size(); ++i) {
    const Cell cell(dom, coord(phi, 0, i), coord(phi, 1, i), coord(phi, 2, i));
    for (int c = 0; c < cell.corners(); ++c) {
      const double w = cell.weight(c);
      if (w != 0.0) out[cell.node(c)] += w * r[i];
    }
  }
  return out;
}

Transform compose(const Transform& outer, const Transform& inner) {
  require_same_domain(outer.domain(), inner.domain(), "compose");
  return Transform(warp(outer.coords(), inner));
}

namespace {

// phi(x) - w and the interpolant Jacobian of phi at x
struct Eval {
  std::array<double, 3> r{0, 0, 0};
  double jac[3][3] = {};
  double norm2 = 0;
};

Eval evaluate(const Transform& phi, const std::array<double, 3>& x, const std::array<double, 3>& w) {
  const Domain& dom = phi.domain();
  const Cell cell(dom, x[0], x[1], x[2]);
  Eval e;
  for (int c = 0; c < dom.dim(); ++c) {
    auto v = phi.coords()[c].values();
    e.r[c] = cell.value(v) - w[c];
    e.norm2 += e.r[c] * e.r[c];
    for (int a = 0; a < dom.dim(); ++a) e.jac[c][a] = cell.derivative(v, a);
  }
  return e;
}

// Newton direction -J^{-1} r; false for a singular Jacobian
bool newton_step(const Eval& e, int d, std::array<double, 3>& dx) {
  if (d == 2) {
    const double det = e.jac[0][0] * e.jac[1][1] - e.jac[0][1] * e.jac[1][0];
    if (!(std::abs(det) > 1e-14)) return false;
    dx[0] = -(e.jac[1][1] * e.r[0] - e.jac[0][1] * e.r[1]) / det;
    dx[1] = -(-e.jac[1][0] * e.r[0] + e.jac[0][0] * e.r[1]) / det;
    dx[2] = 0;
    return true;
  }
  const auto& m = e.jac;
  const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                     m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                     m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  if (!(std::abs(det) > 1e-14)) return false;
  double inv[3][3];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const int i1 = (j + 1) % 3, i2 = (j + 2) % 3, j1 = (i + 1) % 3, j2 = (i + 2) % 3;
      inv[i][j] = (m[i1][j1] * m[i2][j2] - m[i1][j2] * m[i2][j1]) / det;
    }
  for (int i = 0; i < 3; ++i) dx[i] = -(inv[i][0] * e.r[0] + inv[i][1] * e.r[1] + inv[i][2] * e.r[2]);
  return true;
}

}  // namespace

Transform pointwise_inverse(const Transform& phi) {
  const Domain& dom = phi.domain();
  const int d = dom.dim();
  VectorField out = identity_coords(dom);
  std::array<double, 3> prev{0, 0, 0};
  bool have_prev = false;
  for (std::size_t i = 0; i < dom.size(); ++i) {
    if (dom.on_boundary(i)) {
      have_prev = false;
      continue;
    }
    const auto p = dom.coords(i);
    const std::array<double, 3> w{double(p[0]), double(p[1]), double(p[2])};
    // start from the better of w, w - u(w) and the previous voxel's solution
    std::array<double, 3> x = w;
    Eval best = evaluate(phi, x, w);
    std::array<double, 3> guess = w;
    for (int a = 0; a < d; ++a) guess[a] = 2 * w[a] - phi.coords()[a][i];
    auto consider = [&](std::array<double, 3> g) {
      for (int a = 0; a < d; ++a) g[a] = std::clamp(g[a], 0.0, double(dom.extent(a) - 1));
      const Eval e = evaluate(phi, g, w);
      if (e.norm2 < best.norm2) best = e, x = g;
    };
    consider(guess);
    if (have_prev) {
      std::array<double, 3> g = prev;
      g[0] += 1.0;
      consider(prev);
      consider(g);
    }
    for (int it = 0; it < 100 && best.norm2 > 1e-24; ++it) {
      std::array<double, 3> dx;
      if (!newton_step(best, d, dx)) break;
      bool moved = false;
      for (double lam = 1.0; lam > 1e-6; lam *= 0.5) {
        std::array<double, 3> y = x;
        for (int a = 0; a < d; ++a) y[a] = std::clamp(x[a] + lam * dx[a], 0.0, double(dom.extent(a) - 1));
        const Eval e = evaluate(phi, y, w);
        if (e.norm2 < best.norm2) {
          best = e;
          x = y;
          moved = true;
          break;
        }
      }
      if (!moved) break;
    }
    for (int a = 0; a < d; ++a) out[a][i] = x[a];
    prev = x;
    have_prev = true;
  }
  return Transform(std::move(out));
}

}  // namespace vpreg
