#include "vpreg/vpgrid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "vpreg/resample.hpp"

namespace vpreg {
namespace {

// Cofactor matrix (row-major), cof[i*d+k] = d det / d m[i*d+k].
void cofactor(const double* m, int d, double* cof) {
  if (d == 2) {
    cof[0] = m[3];
    cof[1] = -m[2];
    cof[2] = -m[1];
    cof[3] = m[0];
    return;
  }
  cof[0] = m[4] * m[8] - m[5] * m[7];
  cof[1] = m[5] * m[6] - m[3] * m[8];
  cof[2] = m[3] * m[7] - m[4] * m[6];
  cof[3] = m[2] * m[7] - m[1] * m[8];
  cof[4] = m[0] * m[8] - m[2] * m[6];
  cof[5] = m[1] * m[6] - m[0] * m[7];
  cof[6] = m[1] * m[5] - m[2] * m[4];
  cof[7] = m[2] * m[3] - m[0] * m[5];
  cof[8] = m[0] * m[4] - m[1] * m[3];
}

void matmul(const double* a, const double* b, int d, double* out) {
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double s = 0;
      for (int k = 0; k < d; ++k) s += a[i * d + k] * b[k * d + j];
      out[i * d + j] = s;
    }
}

// curl of a Jacobian matrix J (J[i][j] = d phi_i / d x_j)
void matrix_curl(const double* j, int d, double* c) {
  if (d == 2) {
    c[0] = j[2] - j[1];
    return;
  }
  c[0] = j[7] - j[5];
  c[1] = j[2] - j[6];
  c[2] = j[3] - j[1];
}

void zero_boundary(ScalarField& s) {
  const Domain& dom = s.domain();
  for (std::size_t i = 0; i < s.size(); ++i)
    if (dom.on_boundary(i)) s[i] = 0.0;
}

void zero_boundary(VectorField& v) {
  for (int c = 0; c < v.components(); ++c) zero_boundary(v[c]);
}

double interior_sum_sq(const ScalarField& s) {
  double sum = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (!s.domain().on_boundary(i)) sum += s[i] * s[i];
  return sum;
}

// Stagnation bookkeeping shared by the descent loops.
struct Stagnation {
  int patience;
  double rel_tol;
  int count = 0;
  bool update(double before, double after) {
    const double rel = before > 0 ? (before - after) / before : 0.0;
    count = rel < rel_tol ? count + 1 : 0;
    return count >= patience;
  }
};

}  // namespace

GridTargets identity_targets(const Domain& domain) {
  return {ScalarField(domain, 1.0), VectorField(domain, curl_components(domain.dim()))};
}

void validate_targets(const GridTargets& t) {
  const Domain& dom = t.f_t.domain();
  require_same_domain(dom, t.g_t.domain(), "grid targets");
  if (t.g_t.components() != curl_components(dom.dim())) {
    throw Error(ErrorCode::InvalidArgument, "g_t must be a curl-type field");
  }
  if (!t.f_t.all_finite() || !t.g_t.all_finite()) throw Error(ErrorCode::NonFiniteData, "targets not finite");
  double sum = 0;
  for (std::size_t i = 0; i < dom.size(); ++i) {
    if (!(t.f_t[i] > 0.0)) {
      std::ostringstream msg;
      msg << "f_t must be positive, found " << t.f_t[i] << " at voxel " << i;
      throw Error(ErrorCode::NonPositiveJD, msg.str());
    }
    sum += t.f_t[i];
  }
  const double mean = sum / static_cast<double>(dom.size());
  if (std::abs(mean - 1.0) > 1e-8) {
    std::ostringstream msg;
    msg << "mean of f_t is " << mean << ", expected 1 (use renormalization)";
    throw Error(ErrorCode::MassMismatch, msg.str());
  }
  if (dom.dim() == 3) {
    const double gmax = t.g_t.max_norm();
    const ScalarField div = divergence(t.g_t);
    double dmax = 0;
    for (std::size_t i = 0; i < dom.size(); ++i) {
      const auto c = dom.coords(i);
      bool deep = true;
      for (int a = 0; a < 3; ++a) deep = deep && c[a] >= 2 && c[a] <= dom.extent(a) - 3;
      if (deep) dmax = std::max(dmax, std::abs(div[i]));
    }
    if (dmax > 1e-2 * gmax && dmax > 1e-12) {
      std::ostringstream msg;
      msg << "g_t is not divergence free (max |div g_t| = " << dmax << ")";
      throw Error(ErrorCode::NonSolenoidalCurl, msg.str());
    }
  }
}

GridTargets renormalize(GridTargets t) {
  double sum = 0;
  for (double v : t.f_t.values()) sum += v;
  if (!(sum > 0)) throw Error(ErrorCode::NonPositiveJD, "f_t has non-positive mass");
  t.f_t *= static_cast<double>(t.f_t.size()) / sum;
  return t;
}

void GridGenOptions::validate() const {
  if (!(growth > 1.0) || !(shrink > 0.0 && shrink < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "step schedule needs growth > 1 > shrink > 0");
  }
  if (!(t0 > 0) || !(min_step > 0) || max_iters < 0 || patience < 1) {
    throw Error(ErrorCode::InvalidArgument, "invalid grid generation options");
  }
  if (reg_weight < 0 || !(reg_decay >= 0 && reg_decay < 1) || !(fit_tolerance > 0) || !(accept_tolerance > 0) || !(step_voxels > 0)) {
    throw Error(ErrorCode::InvalidArgument, "invalid grid generation weights");
  }
}

// ---------------------------------------------------------------------------

VectorField vp_kernel(const JacobianField& jm, const JacobianField& jo, const ScalarField& lam_f,
                      const VectorField& lam_g, BcMode bc) {
  const int d = jm.dim();
  const Domain& dom = jm.domain();
  std::vector<ScalarField> a(d * d, ScalarField(dom));
  double m[9], o[9], cof[9];
  for (std::size_t v = 0; v < dom.size(); ++v) {
    jm.matrix_at(v, m);
    jo.matrix_at(v, o);
    cofactor(m, d, cof);
    const double s = lam_f[v] * (d == 2 ? det2(o) : det3(o));
    for (int k = 0; k < d * d; ++k) a[k][v] = s * cof[k];
    if (d == 2) {
      const double l = lam_g[0][v];
      for (int k = 0; k < 2; ++k) {
        a[0 * 2 + k][v] -= l * o[k * 2 + 1];
        a[1 * 2 + k][v] += l * o[k * 2 + 0];
      }
    } else {
      const double l1 = lam_g[0][v], l2 = lam_g[1][v], l3 = lam_g[2][v];
      for (int k = 0; k < 3; ++k) {
        const double ox = o[k * 3 + 0], oy = o[k * 3 + 1], oz = o[k * 3 + 2];
        a[0 * 3 + k][v] += l2 * oz - l3 * oy;
        a[1 * 3 + k][v] += -l1 * oz + l3 * ox;
        a[2 * 3 + k][v] += l1 * oy - l2 * ox;
      }
    }
  }
  std::vector<ScalarField> out;
  for (int i = 0; i < d; ++i) {
    ScalarField s = partial_adjoint(a[i * d], 0, bc);
    for (int k = 1; k < d; ++k) s += partial_adjoint(a[i * d + k], k, bc);
    out.push_back(std::move(s));
  }
  return VectorField(std::move(out));
}

void product_jacobian_terms(const JacobianField& jm, const JacobianField& jo, ScalarField& det, VectorField& curl) {
  const int d = jm.dim();
  const Domain& dom = jm.domain();
  det = ScalarField(dom);
  curl = VectorField(dom, curl_components(d));
  double m[9], o[9], j[9], c[3];
  for (std::size_t v = 0; v < dom.size(); ++v) {
    jm.matrix_at(v, m);
    jo.matrix_at(v, o);
    matmul(m, o, d, j);
    det[v] = d == 2 ? det2(j) : det3(j);
    matrix_curl(j, d, c);
    for (int k = 0; k < curl.components(); ++k) curl[k][v] = c[k];
  }
}

// ---------------------------------------------------------------------------

Transform control_map(const ScalarField& f, const VectorField& g, const PoissonSolver& solver) {
  const BcMode bc = solver.bc();
  VectorField rhs = gradient(f, bc);
  rhs -= rot(g, bc);
  return from_displacement(solver.solve(rhs));
}

double vp_objective(const Transform& phi, const GridTargets& t) {
  ScalarField jd = jacobian_determinant(phi);
  jd -= t.f_t;
  VectorField c = curl(phi.coords());
  c -= t.g_t;
  double e = interior_sum_sq(jd);
  for (int k = 0; k < c.components(); ++k) e += interior_sum_sq(c[k]);
  return 0.5 * e;
}

ControlGradient vp_control_gradient(const ScalarField& f, const VectorField& g, const Transform& phi_o,
                                    const GridTargets& t, const PoissonSolver& solver) {
  const BcMode bc = solver.bc();
  const Transform phi_m = control_map(f, g, solver);
  const Transform phi = compose(phi_m, phi_o);
  ScalarField lam_f = jacobian_determinant(phi);
  lam_f -= t.f_t;
  VectorField lam_g = curl(phi.coords());
  lam_g -= t.g_t;
  zero_boundary(lam_f);
  zero_boundary(lam_g);
  const VectorField grad_u = vp_kernel(JacobianField(phi_m.coords()), JacobianField(phi_o.coords()), lam_f, lam_g);
  ControlGradient out;
  out.b = solver.solve(grad_u);
  out.df = gradient_adjoint(out.b, bc);
  out.dg = rot_adjoint(out.b, bc);
  out.dg *= -1.0;
  return out;
}

GridGenResult vp_generate(const Transform& phi_o, const GridTargets& t, const GridGenOptions& opts) {
  opts.validate();
  require_same_domain(phi_o.domain(), t.f_t.domain(), "vp_generate");
  validate_targets(t);
  const double jd0 = min_interior_jd(phi_o);
  if (!(jd0 > 0)) {
    std::ostringstream msg;
    msg << "initial map is not diffeomorphic (min JD " << jd0 << ")";
    throw Error(ErrorCode::NonPositiveJD, msg.str());
  }
  const Domain& dom = phi_o.domain();
  const PoissonSolver solver(dom, opts.bc);

  GridGenResult res;
  res.f = ScalarField(dom, 1.0);
  res.g = VectorField(dom, curl_components(dom.dim()));
  res.phi_m = make_identity(dom);
  res.phi = compose(res.phi_m, phi_o);
  res.objective = vp_objective(res.phi, t);
  res.trace.push_back({0, res.objective, 0.0, min_interior_jd(res.phi), true});

  double step = opts.t0;
  double scale = 0;
  bool need_grad = true;
  bool any_accepted = false;
  Stagnation stag{opts.patience, opts.rel_tol};
  ControlGradient grad;
  for (int iter = 1; iter <= opts.max_iters && res.objective > 0; ++iter) {
    if (need_grad) {
      grad = vp_control_gradient(res.f, res.g, phi_o, t, solver);
      if (scale == 0) {
        const double bmax = grad.b.max_norm();
        if (!(bmax > 0)) break;
        scale = opts.step_voxels / bmax;
      }
      need_grad = false;
    }
    ScalarField f_new = res.f;
    f_new -= (step * scale) * grad.df;
    VectorField g_new = res.g;
    g_new -= (step * scale) * grad.dg;
    Transform m_new = control_map(f_new, g_new, solver);
    Transform phi_new = compose(m_new, phi_o);
    const double e_new = vp_objective(phi_new, t);
    const double jd = min_interior_jd(phi_new);
    const bool accept = e_new < res.objective && jd > 0;
    res.trace.push_back({iter, e_new, step, jd, accept});
    if (accept) {
      const bool stalled = stag.update(res.objective, e_new);
      res.f = std::move(f_new);
      res.g = std::move(g_new);
      res.phi_m = std::move(m_new);
      res.phi = std::move(phi_new);
      res.objective = e_new;
      any_accepted = true;
      need_grad = true;
      step *= opts.growth;
      if (stalled) break;
    } else {
      step *= opts.shrink;
      if (step < opts.min_step) {
        if (!any_accepted) throw Error(ErrorCode::Stalled, "grid generation made no progress");
        break;
      }
    }
  }
  if (!is_diffeomorphic(res.phi)) throw Error(ErrorCode::FoldingDetected, "generated grid folds");
  return res;
}

GridResidual grid_residual(const Transform& phi, const GridTargets& t) {
  require_same_domain(phi.domain(), t.f_t.domain(), "grid_residual");
  const Domain& dom = phi.domain();
  const ScalarField jd = jacobian_determinant(phi);
  const VectorField c = curl(phi.coords());
  double num = 0, den = 0, num_all = 0, den_all = 0, curl_sq = 0;
  GridResidual r;
  r.min_jd = std::numeric_limits<double>::infinity();
  r.max_jd = -r.min_jd;
  for (std::size_t i = 0; i < dom.size(); ++i) {
    const double e = jd[i] - t.f_t[i];
    num_all += e * e;
    den_all += t.f_t[i] * t.f_t[i];
    if (dom.on_boundary(i)) continue;
    num += e * e;
    den += t.f_t[i] * t.f_t[i];
    for (int k = 0; k < c.components(); ++k) curl_sq += std::pow(c[k][i] - t.g_t[k][i], 2);
    r.min_jd = std::min(r.min_jd, jd[i]);
    r.max_jd = std::max(r.max_jd, jd[i]);
  }
  r.jd_rel_l2 = std::sqrt(num / den);
  r.jd_rel_l2_all = std::sqrt(num_all / den_all);
  r.curl_l2 = std::sqrt(curl_sq);
  return r;
}

// ---------------------------------------------------------------------------

namespace {

VectorField residual_field(const Transform& phi_m, const Transform& phi_o, const Transform& phi_t) {
  VectorField r = compose(phi_m, phi_o).coords();
  r -= phi_t.coords();
  return r;
}

double half_sum_sq(const VectorField& v) {
  double s = 0;
  for (int c = 0; c < v.components(); ++c)
    for (double x : v[c].values()) s += x * x;
  return 0.5 * s;
}

void residual_norms(const VectorField& r, double& mean, double& max) {
  const std::size_t n = r.domain().size();
  double sum = 0;
  max = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (int c = 0; c < r.components(); ++c) s += r[c][i] * r[c][i];
    s = std::sqrt(s);
    sum += s;
    max = std::max(max, s);
  }
  mean = sum / static_cast<double>(n);
}

}  // namespace

double lm_fit(const Transform& phi_m, const Transform& phi_o, const Transform& phi_t) {
  require_same_domain(phi_m.domain(), phi_o.domain(), "lm_fit");
  require_same_domain(phi_m.domain(), phi_t.domain(), "lm_fit");
  return half_sum_sq(residual_field(phi_m, phi_o, phi_t));
}

double lm_objective(const Transform& phi_m, const Transform& phi_o, const Transform& phi_t, double reg_weight) {
  double e = lm_fit(phi_m, phi_o, phi_t);
  ScalarField det;
  VectorField c;
  product_jacobian_terms(JacobianField(phi_m.coords()), JacobianField(phi_o.coords()), det, c);
  double reg = interior_sum_sq(det);
  for (int k = 0; k < c.components(); ++k) reg += interior_sum_sq(c[k]);
  return e + 0.5 * reg_weight * reg;
}

VectorField lm_gradient(const Transform& phi_m, const Transform& phi_o, const Transform& phi_t, double reg_weight,
                        FitResidual residual, BcMode bc) {
  require_same_domain(phi_m.domain(), phi_o.domain(), "lm_gradient");
  require_same_domain(phi_m.domain(), phi_t.domain(), "lm_gradient");
  VectorField grad = residual_field(phi_m, phi_o, phi_t);
  if (residual == FitResidual::Exact) {
    for (int c = 0; c < grad.components(); ++c) grad[c] = warp_adjoint(grad[c], phi_o);
  }
  if (reg_weight > 0) {
    const JacobianField jm(phi_m.coords(), bc), jo(phi_o.coords(), bc);
    ScalarField det;
    VectorField c;
    product_jacobian_terms(jm, jo, det, c);
    zero_boundary(det);
    zero_boundary(c);
    VectorField reg = vp_kernel(jm, jo, det, c, bc);
    reg *= reg_weight;
    grad += reg;
  }
  zero_boundary(grad);
  return grad;
}

LmResult lm_target_grid(const Transform& phi_o, const Transform& phi_t, const GridGenOptions& opts,
                        const Transform* initial) {
  opts.validate();
  require_same_domain(phi_o.domain(), phi_t.domain(), "lm_target_grid");
  const Domain& dom = phi_o.domain();

  LmResult res;
  if (initial) require_same_domain(initial->domain(), dom, "lm_target_grid");
  res.phi_m = initial ? *initial : make_identity(dom);
  res.phi = compose(res.phi_m, phi_o);
  VectorField r = res.phi.coords();
  r -= phi_t.coords();
  res.fit = half_sum_sq(r);
  residual_norms(r, res.mean_residual, res.max_residual);
  res.trace.push_back({0, res.fit, 0.0, 1.0, true});

  // inverse of the total sampling weight each node receives from phi_o
  ScalarField precond(dom, 1.0);
  if (opts.precondition && opts.residual == FitResidual::Exact) {
    const ScalarField cover = warp_adjoint(ScalarField(dom, 1.0), phi_o);
    for (std::size_t i = 0; i < dom.size(); ++i) precond[i] = 1.0 / std::max(cover[i], 0.25);
  }

  double alpha = opts.reg_weight;
  double step = opts.t0;
  bool need_grad = true;
  Stagnation stag{opts.patience, opts.rel_tol};
  VectorField grad;
  // Lowers the regularizer weight; returns false once it is exhausted.
  auto relax = [&]() {
    if (!opts.continuation || alpha <= opts.min_reg_weight) return false;
    alpha = alpha * opts.reg_decay < opts.min_reg_weight ? 0.0 : alpha * opts.reg_decay;
    step = opts.t0;
    stag.count = 0;
    need_grad = true;
    return true;
  };
  for (int iter = 1; iter <= opts.max_iters; ++iter) {
    if (res.mean_residual <= opts.fit_tolerance) break;
    if (need_grad) {
      grad = lm_gradient(res.phi_m, phi_o, phi_t, alpha, opts.residual, opts.bc);
      if (opts.precondition) {
        for (int c = 0; c < grad.components(); ++c)
          for (std::size_t i = 0; i < dom.size(); ++i) grad[c][i] *= precond[i];
      }
      need_grad = false;
    }
    VectorField x = res.phi_m.coords();
    for (int c = 0; c < x.components(); ++c) {
      auto xv = x[c].values();
      auto gv = grad[c].values();
      for (std::size_t i = 0; i < xv.size(); ++i) xv[i] -= step * gv[i];
    }
    Transform m_new(std::move(x));
    Transform phi_new = compose(m_new, phi_o);
    VectorField r_new = phi_new.coords();
    r_new -= phi_t.coords();
    const double fit_new = half_sum_sq(r_new);
    const double jd = min_interior_jd(m_new);
    const bool accept = fit_new < res.fit && jd > 0;
    res.trace.push_back({iter, fit_new, step, jd, accept});
    if (accept) {
      const bool stalled = stag.update(res.fit, fit_new);
      res.phi_m = std::move(m_new);
      res.phi = std::move(phi_new);
      res.fit = fit_new;
      residual_norms(r_new, res.mean_residual, res.max_residual);
      need_grad = true;
      step *= opts.growth;
      if (stalled && !relax()) break;
    } else {
      step *= opts.shrink;
      if (step < opts.min_step && !relax()) break;
    }
  }
  res.final_reg_weight = alpha;
  return res;
}

LmResult invert_detailed(const Transform& phi, const GridGenOptions& opts) {
  const double jd = min_interior_jd(phi);
  if (!(jd > 0)) {
    std::ostringstream msg;
    msg << "map is not diffeomorphic (min JD " << jd << ")";
    throw Error(ErrorCode::NonPositiveJD, msg.str());
  }
  const Transform start = pointwise_inverse(phi);
  LmResult res = lm_target_grid(phi, make_identity(phi.domain()), opts, is_diffeomorphic(start) ? &start : nullptr);
  const double tol = std::max(opts.fit_tolerance, opts.accept_tolerance);
  if (res.mean_residual > tol) {
    std::ostringstream msg;
    msg << "inverse stalled at mean residual " << res.mean_residual << " (tolerance " << tol << ")";
    throw Error(ErrorCode::Stalled, msg.str());
  }
  if (!is_diffeomorphic(res.phi_m)) throw Error(ErrorCode::FoldingDetected, "inverse map folds");
  return res;
}

Transform invert(const Transform& phi, const GridGenOptions& opts) { return invert_detailed(phi, opts).phi_m; }

Deviation map_deviation(const Transform& a, const Transform& b) {
  require_same_domain(a.domain(), b.domain(), "map_deviation");
  VectorField r = a.coords();
  r -= b.coords();
  Deviation d;
  residual_norms(r, d.mean, d.max);
  return d;
}

ConsistencyReport consistency_report(const Transform& phi_ab, const Transform& phi_ba, const Transform& phi_ac,
                                     const Transform& phi_cb) {
  const Transform id = make_identity(phi_ab.domain());
  ConsistencyReport rep;
  rep.ba_after_ab = map_deviation(compose(phi_ba, phi_ab), id);
  rep.ab_after_ba = map_deviation(compose(phi_ab, phi_ba), id);
  rep.transitivity = map_deviation(compose(phi_cb, phi_ac), phi_ab);
  return rep;
}

}  // namespace vpreg
