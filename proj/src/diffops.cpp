#include "vpreg/diffops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace vpreg {
namespace {

// Calls fn(first, stride, n) for every lattice line along `axis`.
template <class Fn>
void for_each_line(const Domain& dom, int axis, Fn&& fn) {
  const auto& n = dom.extents();
  const std::size_t stride = dom.stride(axis);
  const int len = n[axis];
  int other[2];
  int k = 0;
  for (int a = 0; a < 3; ++a)
    if (a != axis) other[k++] = a;
  std::array<int, 3> c{0, 0, 0};
  for (int j = 0; j < n[other[1]]; ++j) {
    for (int i = 0; i < n[other[0]]; ++i) {
      c[other[0]] = i;
      c[other[1]] = j;
      c[axis] = 0;
      fn(dom.index(c[0], c[1], c[2]), stride, len);
    }
  }
}

void check_axis(const Domain& dom, int axis) {
  if (axis < 0 || axis >= dom.dim()) throw Error(ErrorCode::InvalidArgument, "axis out of range");
}

}  // namespace

ScalarField partial(const ScalarField& s, int axis, BcMode bc) {
  const Domain& dom = s.domain();
  check_axis(dom, axis);
  ScalarField out(dom);
  auto in = s.values();
  auto o = out.values();
  for_each_line(dom, axis, [&](std::size_t p0, std::size_t st, int n) {
    auto at = [&](int k) { return in[p0 + st * k]; };
    for (int k = 1; k < n - 1; ++k) o[p0 + st * k] = 0.5 * (at(k + 1) - at(k - 1));
    if (bc == BcMode::Periodic) {
      o[p0] = 0.5 * (at(1) - at(n - 1));
      o[p0 + st * (n - 1)] = 0.5 * (at(0) - at(n - 2));
    } else {
      o[p0] = 0.5 * (-3.0 * at(0) + 4.0 * at(1) - at(2));
      o[p0 + st * (n - 1)] = 0.5 * (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3));
    }
  });
  return out;
}

ScalarField partial_adjoint(const ScalarField& s, int axis, BcMode bc) {
  const Domain& dom = s.domain();
  check_axis(dom, axis);
  ScalarField out(dom);
  auto in = s.values();
  auto o = out.values();
  for_each_line(dom, axis, [&](std::size_t p0, std::size_t st, int n) {
    auto add = [&](int k, double v) { o[p0 + st * k] += v; };
    for (int k = 1; k < n - 1; ++k) {
      const double r = in[p0 + st * k];
      add(k + 1, 0.5 * r);
      add(k - 1, -0.5 * r);
    }
    const double r0 = in[p0];
    const double rn = in[p0 + st * (n - 1)];
    if (bc == BcMode::Periodic) {
      add(1, 0.5 * r0);
      add(n - 1, -0.5 * r0);
      add(0, 0.5 * rn);
      add(n - 2, -0.5 * rn);
    } else {
      add(0, -1.5 * r0);
      add(1, 2.0 * r0);
      add(2, -0.5 * r0);
      add(n - 1, 1.5 * rn);
      add(n - 2, -2.0 * rn);
      add(n - 3, 0.5 * rn);
    }
  });
  return out;
}

VectorField gradient(const ScalarField& s, BcMode bc) {
  const int d = s.domain().dim();
  std::vector<ScalarField> comps;
  for (int a = 0; a < d; ++a) comps.push_back(partial(s, a, bc));
  return VectorField(std::move(comps));
}

ScalarField divergence(const VectorField& v, BcMode bc) {
  const int d = v.domain().dim();
  if (v.components() != d) throw Error(ErrorCode::InvalidArgument, "divergence needs d components");
  ScalarField out = partial(v[0], 0, bc);
  for (int a = 1; a < d; ++a) out += partial(v[a], a, bc);
  return out;
}

VectorField curl(const VectorField& v, BcMode bc) {
  const int d = v.domain().dim();
  if (v.components() != d) throw Error(ErrorCode::InvalidArgument, "curl needs d components");
  if (d == 2) {
    return VectorField({partial(v[1], 0, bc) - partial(v[0], 1, bc)});
  }
  return VectorField({partial(v[2], 1, bc) - partial(v[1], 2, bc),
                      partial(v[0], 2, bc) - partial(v[2], 0, bc),
                      partial(v[1], 0, bc) - partial(v[0], 1, bc)});
}

VectorField rot(const VectorField& g, BcMode bc) {
  const int d = g.domain().dim();
  if (g.components() != curl_components(d)) {
    throw Error(ErrorCode::InvalidArgument, "rot needs a curl-type field");
  }
  if (d == 2) {
    ScalarField gx = partial(g[0], 0, bc);
    gx *= -1.0;
    return VectorField({partial(g[0], 1, bc), std::move(gx)});
  }
  return curl(g, bc);
}

ScalarField gradient_adjoint(const VectorField& v, BcMode bc) {
  const int d = v.domain().dim();
  if (v.components() != d) throw Error(ErrorCode::InvalidArgument, "gradient_adjoint needs d components");
  ScalarField out = partial_adjoint(v[0], 0, bc);
  for (int a = 1; a < d; ++a) out += partial_adjoint(v[a], a, bc);
  return out;
}

VectorField curl_adjoint(const VectorField& w, BcMode bc) {
  const int d = w.domain().dim();
  if (w.components() != curl_components(d)) {
    throw Error(ErrorCode::InvalidArgument, "curl_adjoint needs a curl-type field");
  }
  if (d == 2) {
    // curl v = D_x v2 - D_y v1
    ScalarField v1 = partial_adjoint(w[0], 1, bc);
    v1 *= -1.0;
    return VectorField({std::move(v1), partial_adjoint(w[0], 0, bc)});
  }
  // c1 = D_y v3 - D_z v2, c2 = D_z v1 - D_x v3, c3 = D_x v2 - D_y v1
  ScalarField v1 = partial_adjoint(w[1], 2, bc) - partial_adjoint(w[2], 1, bc);
  ScalarField v2 = partial_adjoint(w[2], 0, bc) - partial_adjoint(w[0], 2, bc);
  ScalarField v3 = partial_adjoint(w[0], 1, bc) - partial_adjoint(w[1], 0, bc);
  return VectorField({std::move(v1), std::move(v2), std::move(v3)});
}

VectorField rot_adjoint(const VectorField& v, BcMode bc) {
  const int d = v.domain().dim();
  if (v.components() != d) throw Error(ErrorCode::InvalidArgument, "rot_adjoint needs d components");
  if (d == 2) {
    // rot g = (D_y g, -D_x g)
    return VectorField({partial_adjoint(v[0], 1, bc) - partial_adjoint(v[1], 0, bc)});
  }
  return curl_adjoint(v, bc);
}

// ---------------------------------------------------------------------------

JacobianField::JacobianField(const VectorField& map, BcMode bc) : d_(map.domain().dim()) {
  if (map.components() != d_) throw Error(ErrorCode::InvalidArgument, "jacobian needs d components");
  entries_.reserve(d_ * d_);
  for (int i = 0; i < d_; ++i)
    for (int j = 0; j < d_; ++j) entries_.push_back(partial(map[i], j, bc));
}

void JacobianField::matrix_at(std::size_t v, double* out) const {
  for (int k = 0; k < d_ * d_; ++k) out[k] = entries_[k][v];
}

double det2(const double* m) { return m[0] * m[3] - m[1] * m[2]; }

double det3(const double* m) {
  return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
         m[2] * (m[3] * m[7] - m[4] * m[6]);
}

ScalarField jacobian_determinant(const Transform& phi) {
  const JacobianField jac(phi.coords());
  const int d = jac.dim();
  ScalarField out(phi.domain());
  double m[9];
  for (std::size_t v = 0; v < out.size(); ++v) {
    jac.matrix_at(v, m);
    out[v] = d == 2 ? det2(m) : det3(m);
  }
  return out;
}

double min_interior_jd(const Transform& phi) {
  const ScalarField jd = jacobian_determinant(phi);
  const Domain& dom = phi.domain();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t v = 0; v < jd.size(); ++v) {
    if (!dom.on_boundary(v)) best = std::min(best, jd[v]);
  }
  return best;
}

bool is_diffeomorphic(const Transform& phi) { return min_interior_jd(phi) > 0.0; }

ScalarField laplacian(const ScalarField& s, BcMode bc) {
  const Domain& dom = s.domain();
  ScalarField out(dom);
  auto in = s.values();
  auto o = out.values();
  for (int axis = 0; axis < dom.dim(); ++axis) {
    for_each_line(dom, axis, [&](std::size_t p0, std::size_t st, int n) {
      auto at = [&](int k) { return in[p0 + st * k]; };
      for (int k = 1; k < n - 1; ++k) o[p0 + st * k] += at(k + 1) - 2.0 * at(k) + at(k - 1);
      if (bc == BcMode::Periodic) {
        o[p0] += at(1) - 2.0 * at(0) + at(n - 1);
        o[p0 + st * (n - 1)] += at(0) - 2.0 * at(n - 1) + at(n - 2);
      }
    });
  }
  if (bc == BcMode::DirichletZero) {
    for (std::size_t v = 0; v < out.size(); ++v)
      if (dom.on_boundary(v)) o[v] = 0.0;
  }
  return out;
}

VectorField laplacian(const VectorField& v, BcMode bc) {
  std::vector<ScalarField> comps;
  for (int c = 0; c < v.components(); ++c) comps.push_back(laplacian(v[c], bc));
  return VectorField(std::move(comps));
}

namespace {

// Elementary symmetric polynomials e2, e3 of the eigenvalues of A (row-major).
double principal_minor_sum(const double* a, int d) {
  if (d == 2) return a[0] * a[3] - a[1] * a[2];
  return (a[0] * a[4] - a[1] * a[3]) + (a[0] * a[8] - a[2] * a[6]) + (a[4] * a[8] - a[5] * a[7]);
}

}  // namespace

ScalarField small_displacement_residual(const Transform& phi) {
  if (phi.dim() != 3) throw Error(ErrorCode::InvalidArgument, "small_displacement_residual is 3-D only");
  const JacobianField jac(phi.coords());
  const ScalarField div = divergence(phi.coords());
  ScalarField out(phi.domain());
  double m[9], a[9];
  for (std::size_t v = 0; v < out.size(); ++v) {
    jac.matrix_at(v, m);
    for (int k = 0; k < 9; ++k) a[k] = m[k] - (k % 4 == 0 ? 1.0 : 0.0);
    // a[3*i + j] = d u_{i+1} / d x_j with x_0 = x, x_1 = y, x_2 = z
    const double u1x = a[0], u1y = a[1], u1z = a[2];
    const double u2x = a[3], u2y = a[4], u2z = a[5];
    const double u3x = a[6], u3y = a[7], u3z = a[8];
    const double psi = u1x * u2y * u3z + u1z * u2x * u3y + u1y * u2z * u3x - u1x * u2z * u3y -
                       u1y * u2x * u3z - u1z * u2y * u3x;
    out[v] = div[v] - det3(m) - 2.0 + det3(a) + psi;
  }
  return out;
}

ScalarField jacobian_expansion_residual(const Transform& phi) {
  const int d = phi.dim();
  const JacobianField jac(phi.coords());
  const ScalarField div = divergence(phi.coords());
  ScalarField out(phi.domain());
  double m[9], a[9];
  for (std::size_t v = 0; v < out.size(); ++v) {
    jac.matrix_at(v, m);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) a[i * d + j] = m[i * d + j] - (i == j ? 1.0 : 0.0);
    const double higher = d == 2 ? principal_minor_sum(a, 2) : principal_minor_sum(a, 3) + det3(a);
    out[v] = div[v] - (d == 2 ? det2(m) : det3(m)) - (d - 1) + higher;
  }
  return out;
}

}  // namespace vpreg
