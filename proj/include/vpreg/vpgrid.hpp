#pragma once

#include <vector>

#include "vpreg/diffops.hpp"
#include "vpreg/poisson.hpp"

namespace vpreg {

/// Prescribed Jacobian determinant and curl.
struct GridTargets {
  ScalarField f_t;
  VectorField g_t;  ///< curl-type field (3 components in 3-D, 1 in 2-D)
};

GridTargets identity_targets(const Domain& domain);

/// Throws NonPositiveJD, MassMismatch (|mean f_t - 1| > 1e-8) or, in 3-D,
/// NonSolenoidalCurl (max interior |div g_t| > 1e-2 max |g_t|).
void validate_targets(const GridTargets& t);
/// Scales f_t so that its mean is exactly 1.
GridTargets renormalize(GridTargets t);

enum class FitResidual {
  Pullback,  ///< phi_m o phi_o - phi_t taken at w, as in the optimality system
  Exact      ///< transpose of the sampling at phi_o (exact discrete gradient)
};

struct GridGenOptions {
  int max_iters = 500;
  double t0 = 1.0;
  double growth = 1.2;
  double shrink = 0.5;
  double min_step = 1e-8;
  double rel_tol = 1e-6;  ///< relative objective decrease counted as stagnation
  int patience = 10;      ///< consecutive stagnating accepts before stopping
  BcMode bc = BcMode::DirichletZero;
  /// vp_generate: largest displacement change of the first trial at t = 1.
  double step_voxels = 1.0;
  /// lm_target_grid: weight of the det/curl regularizer.
  double reg_weight = 1.0;
  /// lm_target_grid: scale reg_weight by reg_decay on stagnation, down to
  /// min_reg_weight, then drop it.
  bool continuation = true;
  double reg_decay = 0.1;
  double min_reg_weight = 1e-6;
  FitResidual residual = FitResidual::Exact;
  /// lm_target_grid: scale the Exact descent direction per node by the
  /// inverse of the sampling weight it receives from phi_o.
  bool precondition = true;
  /// lm_target_grid stops once the mean residual norm drops below this.
  double fit_tolerance = 1e-3;
  /// invert raises Stalled when the mean residual ends above
  /// max(fit_tolerance, accept_tolerance).
  double accept_tolerance = 1e-2;

  void validate() const;
};

struct GridTraceEntry {
  int iter = 0;
  double objective = 0;
  double step = 0;
  double min_jd = 0;
  bool accepted = false;
};

/// Sum over i of D^T(v_i + w_i): the adjoint contraction shared by the grid
/// generation gradients. v_i = lam_f det(D phi_o) cof_i(D phi_m), w_i from the
/// curl of the product Jacobian D phi_m D phi_o weighted by lam_g.
VectorField vp_kernel(const JacobianField& jm, const JacobianField& jo, const ScalarField& lam_f,
                      const VectorField& lam_g, BcMode bc = BcMode::DirichletZero);

/// Determinant and curl of the product Jacobian D phi_m D phi_o per voxel.
void product_jacobian_terms(const JacobianField& jm, const JacobianField& jo, ScalarField& det,
                            VectorField& curl);

// --- VP grid generation -----------------------------------------------------

/// phi_m = id + L^{-1}(D f - rot g).
Transform control_map(const ScalarField& f, const VectorField& g, const PoissonSolver& solver);

/// 1/2 sum (det grad phi - f_t)^2 + 1/2 sum |curl phi - g_t|^2 over interior voxels.
double vp_objective(const Transform& phi, const GridTargets& t);

struct ControlGradient {
  ScalarField df;
  VectorField dg;
  VectorField b;  ///< L^{-1} of the gradient with respect to the displacement
};

/// Gradient of vp_objective(compose(control_map(f, g), phi_o)) with respect
/// to the controls; exact when phi_o is the identity.
ControlGradient vp_control_gradient(const ScalarField& f, const VectorField& g, const Transform& phi_o,
                                    const GridTargets& t, const PoissonSolver& solver);

struct GridGenResult {
  Transform phi;    ///< phi_m o phi_o
  Transform phi_m;
  ScalarField f;
  VectorField g;
  double objective = 0;
  std::vector<GridTraceEntry> trace;
};

/// Descends on (f, g); every trial solves the control equation once.
/// Throws NonPositiveJD for a folded phi_o, Stalled when no trial step is
/// ever accepted, FoldingDetected if the result is not diffeomorphic.
GridGenResult vp_generate(const Transform& phi_o, const GridTargets& t, const GridGenOptions& opts = {});

struct GridResidual {
  double jd_rel_l2 = 0;      ///< ||det grad phi - f_t|| / ||f_t|| over interior voxels
  double jd_rel_l2_all = 0;  ///< same over all voxels
  double curl_l2 = 0;        ///< ||curl phi - g_t|| over interior voxels
  double min_jd = 0, max_jd = 0;
};

/// Achieved-vs-target residual norms of a generated grid.
GridResidual grid_residual(const Transform& phi, const GridTargets& t);

// --- Lagrangian target grid ---------------------------------------------------

/// 1/2 sum ||phi_m o phi_o - phi_t||^2 over all voxels.
double lm_fit(const Transform& phi_m, const Transform& phi_o, const Transform& phi_t);
/// lm_fit plus reg_weight/2 * sum (det J)^2 + |curl J|^2 with J = D phi_m D phi_o.
double lm_objective(const Transform& phi_m, const Transform& phi_o, const Transform& phi_t, double reg_weight);
/// Gradient of lm_objective with respect to the interior coordinates of phi_m
/// (boundary entries are zero).
VectorField lm_gradient(const Transform& phi_m, const Transform& phi_o, const Transform& phi_t, double reg_weight,
                        FitResidual residual = FitResidual::Pullback, BcMode bc = BcMode::DirichletZero);

struct LmResult {
  Transform phi_m;
  Transform phi;  ///< phi_m o phi_o
  double fit = 0;
  double mean_residual = 0;  ///< mean ||phi - phi_t|| over voxels
  double max_residual = 0;
  double final_reg_weight = 0;
  std::vector<GridTraceEntry> trace;
};

/// Starts from `initial` when given, otherwise from the identity.
LmResult lm_target_grid(const Transform& phi_o, const Transform& phi_t, const GridGenOptions& opts = {},
                        const Transform* initial = nullptr);

/// lm_target_grid(phi, id) started from pointwise_inverse(phi) when that is
/// diffeomorphic. Throws NonPositiveJD for a folded input and
/// Stalled when the mean residual stays above the accepted tolerance.
LmResult invert_detailed(const Transform& phi, const GridGenOptions& opts = {});
Transform invert(const Transform& phi, const GridGenOptions& opts = {});

struct Deviation {
  double mean = 0, max = 0;
};

/// Per-voxel Euclidean distance between two maps.
Deviation map_deviation(const Transform& a, const Transform& b);

struct ConsistencyReport {
  Deviation ba_after_ab;  ///< phi_ba o phi_ab vs id
  Deviation ab_after_ba;  ///< phi_ab o phi_ba vs id
  Deviation transitivity;  ///< phi_cb o phi_ac vs phi_ab
};

ConsistencyReport consistency_report(const Transform& phi_ab, const Transform& phi_ba, const Transform& phi_ac,
                                     const Transform& phi_cb);

}  // namespace vpreg
