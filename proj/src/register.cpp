#include "vpreg/register.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "vpreg/resample.hpp"

namespace vpreg {
namespace {

void zero_boundary(VectorField& v) {
  const Domain& dom = v.domain();
  for (std::size_t i = 0; i < dom.size(); ++i)
    if (dom.on_boundary(i))
      for (int c = 0; c < v.components(); ++c) v[c][i] = 0.0;
}

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

class Tracer {
 public:
  Tracer(int stage, const RegOptions& opts, std::vector<RegTraceEntry>& out) : stage_(stage), opts_(opts), out_(out) {}
  void operator()(int iter, double e, double step, double jd, long solves, bool accepted) {
    out_.push_back({stage_, iter, e, step, jd, solves, accepted});
    if (opts_.progress) opts_.progress(out_.back());
  }

 private:
  int stage_;
  const RegOptions& opts_;
  std::vector<RegTraceEntry>& out_;
};

}  // namespace

ScalarField zscore(const ScalarField& img, StdEstimator estimator) {
  const FieldStats st = field_stats(img, estimator);
  ScalarField out(img.domain());
  if (st.std < 1e-12) return out;
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = (img[i] - st.mean) / st.std;
  return out;
}

double mse(const ScalarField& moving, const ScalarField& fixed, const Transform& phi) {
  require_same_domain(moving.domain(), fixed.domain(), "mse");
  require_same_domain(moving.domain(), phi.domain(), "mse");
  const ScalarField w = warp(moving, phi);
  double sum = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double r = w[i] - fixed[i];
    sum += r * r;
  }
  return sum / (2.0 * static_cast<double>(w.size()));
}

VectorField mse_gradient(const ScalarField& moving, const ScalarField& fixed, const Transform& phi) {
  VectorField g = force_term(moving, fixed, phi, ForceGradient::Interpolant);
  g *= 1.0 / static_cast<double>(moving.size());
  zero_boundary(g);
  return g;
}

VectorField force_term(const ScalarField& moving, const ScalarField& fixed, const Transform& phi, ForceGradient grad) {
  require_same_domain(moving.domain(), fixed.domain(), "force_term");
  require_same_domain(moving.domain(), phi.domain(), "force_term");
  const ScalarField w = warp(moving, phi);
  VectorField g = grad == ForceGradient::WarpedImage ? gradient(w) : warp_gradient(moving, phi);
  for (int c = 0; c < g.components(); ++c)
    for (std::size_t i = 0; i < w.size(); ++i) g[c][i] *= w[i] - fixed[i];
  return g;
}

VectorField adjoint_b(const ScalarField& moving, const ScalarField& fixed, const Transform& phi,
                      const PoissonSolver& solver, ForceGradient grad) {
  return solver.solve(force_term(moving, fixed, phi, grad));
}

std::pair<ScalarField, VectorField> grad_fg(const VectorField& b, BcMode bc) {
  VectorField dg = rot_adjoint(b, bc);
  dg *= -1.0;
  return {gradient_adjoint(b, bc), std::move(dg)};
}

void RegOptions::validate() const {
  auto bad = [](const char* what) { throw Error(ErrorCode::InvalidArgument, what); };
  if (!(stage1.tau0 > 0 && stage1.tau0 <= 1)) bad("stage1 tau0 must lie in (0, 1]");
  if (!(stage1.tau_cap > 0 && stage1.tau_cap <= 1)) bad("stage1 tau cap must lie in (0, 1]");
  if (!(stage1.tau_growth >= 1)) bad("stage1 tau growth must be >= 1");
  if (!(stage1.force_voxels > 0) || !(stage1.step_voxels > 0)) bad("stage1 step scales must be positive");
  if (!(stage1.growth >= 1) || !(stage1.shrink > 0 && stage1.shrink < 1)) bad("stage1 step schedule is invalid");
  if (!(stage2.step_voxels > 0) || !(stage2.t0 > 0)) bad("stage2 step scale must be positive");
  if (!(stage2.growth >= 1) || !(stage2.shrink > 0 && stage2.shrink < 1)) bad("stage2 step schedule is invalid");
  if (stage1.max_iters < 0 || stage2.max_iters < 0) bad("iteration limits must be non-negative");
  if (stage1.patience < 1 || stage2.patience < 1) bad("patience must be >= 1");
  if (bins < 2) bad("bins must be >= 2");
  inverse.validate();
}

// ---------------------------------------------------------------------------

StageResult stage1_global(const ScalarField& moving, const ScalarField& fixed, const RegOptions& opts) {
  require_same_domain(moving.domain(), fixed.domain(), "stage1_global");
  const Domain& dom = moving.domain();
  const Stage1Options& o = opts.stage1;
  const PoissonSolver solver(dom, opts.bc);
  StageResult res;
  Tracer trace(1, opts, res.trace);
  res.phi = make_identity(dom);
  double e = mse(moving, fixed, res.phi);
  trace(0, e, 0.0, 1.0, 0, true);

  double tau = o.tau0;
  double lambda = 0;
  for (int iter = 1; iter <= o.max_iters && e > 0; ++iter) {
    const VectorField force = force_term(moving, fixed, res.phi, opts.force);
    VectorField u_new;
    if (lambda == 0) {
      // starts from the identity, where D f - rot g vanishes
      u_new = solver.solve(force);
      ++res.solves;
      const double vmax = u_new.max_norm();
      if (!(vmax > 0)) break;
      lambda = o.force_voxels / vmax;
      u_new *= lambda;
    } else {
      const ScalarField f = jacobian_determinant(res.phi);
      const VectorField g = curl(res.phi.coords(), opts.bc);
      VectorField rhs = lambda * force;
      rhs += gradient(f, opts.bc);
      rhs -= rot(g, opts.bc);
      u_new = solver.solve(rhs);
      ++res.solves;
    }
    Transform trial = blend(res.phi, from_displacement(u_new), tau);
    const double e_new = mse(moving, fixed, trial);
    const double jd = min_interior_jd(trial);
    const bool accept = e_new < e && jd > 0;
    trace(iter, e_new, tau, jd, res.solves, accept);
    if (!accept) break;
    res.phi = std::move(trial);
    e = e_new;
    tau = std::min(o.tau_cap, tau * o.tau_growth);
  }
  return res;
}

StageResult stage1_control(const ScalarField& moving, const ScalarField& fixed, const RegOptions& opts) {
  require_same_domain(moving.domain(), fixed.domain(), "stage1_control");
  const Domain& dom = moving.domain();
  const Stage1Options& o = opts.stage1;
  const PoissonSolver solver(dom, opts.bc);
  StageResult res;
  Tracer trace(1, opts, res.trace);
  res.phi = make_identity(dom);
  double e = mse(moving, fixed, res.phi);
  trace(0, e, 0.0, 1.0, 0, true);

  VectorField c(dom, dom.dim());
  VectorField b;
  double t = o.t0;
  double scale = 0;
  bool better = true;
  Stagnation stag{o.patience, o.rel_tol};
  for (int iter = 1; iter <= o.max_iters && e > 0; ++iter) {
    if (better) {
      b = adjoint_b(moving, fixed, res.phi, solver, opts.force);
      ++res.solves;
      better = false;
    }
    VectorField c_new = c;
    VectorField u;
    if (scale == 0) {
      // first trial: c is zero, so the unit step fixes the scale by linearity
      c_new -= b;
      u = solver.solve(c_new);
      ++res.solves;
      const double umax = u.max_norm();
      if (!(umax > 0)) break;
      scale = o.step_voxels / umax;
      c_new *= scale * t;
      u *= scale * t;
    } else {
      c_new -= (t * scale) * b;
      u = solver.solve(c_new);
      ++res.solves;
    }
    Transform trial = compose(from_displacement(u), res.phi);
    const double e_new = mse(moving, fixed, trial);
    const double jd = min_interior_jd(trial);
    const bool accept = e_new < e && jd > 0;
    trace(iter, e_new, t, jd, res.solves, accept);
    if (accept) {
      const bool stalled = stag.update(e, e_new);
      res.phi = std::move(trial);
      e = e_new;
      if (o.update == ControlUpdate::Accumulate) c = std::move(c_new);
      better = true;
      t *= o.growth;
      if (stalled) break;
    } else {
      t *= o.shrink;
      if (t < o.min_step) break;
    }
  }
  return res;
}

StageResult stage2_local(const ScalarField& moving_stage, const ScalarField& fixed, const RegOptions& opts,
                         long solves_before) {
  require_same_domain(moving_stage.domain(), fixed.domain(), "stage2_local");
  const Domain& dom = moving_stage.domain();
  const Stage2Options& o = opts.stage2;
  const PoissonSolver solver(dom, opts.bc);
  StageResult res;
  Tracer trace(2, opts, res.trace);
  res.phi = make_identity(dom);
  double e = mse(moving_stage, fixed, res.phi);
  trace(0, e, 0.0, 1.0, solves_before, true);

  const ScalarField f_id(dom, 1.0);
  const VectorField g_id(dom, curl_components(dom.dim()));
  ScalarField f = f_id;
  VectorField g = g_id;
  ScalarField df;
  VectorField dg;
  double t = o.t0;
  double scale = 0;
  bool better = true;
  Stagnation stag{o.patience, o.rel_tol};
  for (int iter = 1; iter <= o.max_iters && e > 0; ++iter) {
    if (better) {
      const VectorField b = adjoint_b(moving_stage, fixed, res.phi, solver, opts.force);
      ++res.solves;
      if (scale == 0) {
        const double bmax = b.max_norm();
        if (!(bmax > 0)) break;
        // the map update is approximately t * scale * b
        scale = o.step_voxels / bmax;
      }
      std::tie(df, dg) = grad_fg(b, opts.bc);
      better = false;
    }
    ScalarField f_new = f;
    f_new -= (t * scale) * df;
    VectorField g_new = g;
    g_new -= (t * scale) * dg;
    VectorField rhs = gradient(f_new, opts.bc);
    rhs -= rot(g_new, opts.bc);
    const VectorField u = solver.solve(rhs);
    ++res.solves;
    Transform trial = compose(from_displacement(u), res.phi);
    const double e_new = mse(moving_stage, fixed, trial);
    const double jd = min_interior_jd(trial);
    const bool accept = e_new < e && jd > 0;
    trace(iter, e_new, t, jd, solves_before + res.solves, accept);
    if (accept) {
      const bool stalled = stag.update(e, e_new);
      res.phi = std::move(trial);
      e = e_new;
      if (o.update == ControlUpdate::Accumulate) {
        f = std::move(f_new);
        g = std::move(g_new);
      }
      better = true;
      t *= o.growth;
      if (stalled) break;
    } else {
      t *= o.shrink;
      if (t < o.min_step) break;
    }
  }
  return res;
}

EngineResult register_pair(const ScalarField& moving, const ScalarField& fixed, const RegOptions& opts) {
  opts.validate();
  require_same_domain(moving.domain(), fixed.domain(), "register");
  if (!moving.all_finite() || !fixed.all_finite())
    throw Error(ErrorCode::NonFiniteData, "registration inputs contain non-finite values");
  EngineResult out;
  StageResult s1 = opts.engine == Engine::Penalty ? stage1_global(moving, fixed, opts)
                                                  : stage1_control(moving, fixed, opts);
  out.phi_global = std::move(s1.phi);
  out.trace = std::move(s1.trace);
  out.solves = s1.solves;
  if (opts.run_stage2) {
    const ScalarField m_global = warp(moving, out.phi_global);
    StageResult s2 = stage2_local(m_global, fixed, opts, out.solves);
    out.phi_local = std::move(s2.phi);
    out.trace.insert(out.trace.end(), s2.trace.begin(), s2.trace.end());
    out.solves += s2.solves;
  } else {
    out.phi_local = make_identity(moving.domain());
  }
  out.phi = compose(out.phi_global, out.phi_local);
  if (!is_diffeomorphic(out.phi)) throw Error(ErrorCode::FoldingDetected, "registration map folds");
  return out;
}

long solves_to_reach(const std::vector<RegTraceEntry>& trace, double threshold) {
  for (const auto& e : trace)
    if (e.accepted && e.mse <= threshold) return e.solves;
  return -1;
}

RegResult vpreg_pipeline(const ScalarField& moving, const ScalarField& fixed, const RegOptions& opts,
                         const LabelVolume* labels_moving, const LabelVolume* labels_fixed) {
  require_same_domain(moving.domain(), fixed.domain(), "vpreg_pipeline");
  const ScalarField mz = zscore(moving, opts.std_estimator);
  const ScalarField fz = zscore(fixed, opts.std_estimator);
  EngineResult eng = register_pair(mz, fz, opts);
  RegResult res;
  res.phi = std::move(eng.phi);
  res.trace = std::move(eng.trace);
  res.solves = eng.solves;
  res.warped_moving = warp(moving, res.phi);
  res.phi_inv = invert(res.phi, opts.inverse);
  res.warped_fixed = warp(fixed, res.phi_inv);
  MetricInputs in;
  in.moving = &moving;
  in.fixed = &fixed;
  in.phi = &res.phi;
  in.phi_inv = &res.phi_inv;
  in.labels_moving = labels_moving;
  in.labels_fixed = labels_fixed;
  in.bins = opts.bins;
  res.metrics = compute_metrics(in);
  return res;
}

}  // namespace vpreg
