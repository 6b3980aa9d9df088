#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "vpreg/metrics.hpp"
#include "vpreg/poisson.hpp"
#include "vpreg/vpgrid.hpp"

namespace vpreg {

/// (img - mean) / std, or the zero field when std < 1e-12.
ScalarField zscore(const ScalarField& img, StdEstimator estimator = StdEstimator::Sample);

/// 1/(2N) sum (M o phi - F)^2.
double mse(const ScalarField& moving, const ScalarField& fixed, const Transform& phi);

/// Derivative of mse with respect to the coordinates of phi, using the
/// gradient of the multilinear interpolant. Boundary entries are zero.
VectorField mse_gradient(const ScalarField& moving, const ScalarField& fixed, const Transform& phi);

/// How grad M(phi) is evaluated in the force term.
enum class ForceGradient {
  WarpedImage,  ///< gradient(warp(M, phi)), central differences on the warped image
  Interpolant   ///< derivative of the interpolant at phi; N * mse_gradient
};

/// (M o phi - F) grad M(phi).
VectorField force_term(const ScalarField& moving, const ScalarField& fixed, const Transform& phi,
                       ForceGradient grad = ForceGradient::WarpedImage);

/// b with Lap b = force_term(M, F, phi).
VectorField adjoint_b(const ScalarField& moving, const ScalarField& fixed, const Transform& phi,
                      const PoissonSolver& solver, ForceGradient grad = ForceGradient::WarpedImage);

/// Control gradients from b: df = D^T b, dg = -rot^T b (the exact discrete
/// adjoints). With the Interpolant force these times 1/N are the gradients of
/// mse through phi = id + Lap^{-1}(D f - rot g).
std::pair<ScalarField, VectorField> grad_fg(const VectorField& b, BcMode bc = BcMode::DirichletZero);

enum class Engine { Penalty, Control };

/// Whether stage-2 controls keep accumulating after each accepted
/// composition (the literal scheme) or restart from (1, 0).
enum class ControlUpdate { Accumulate, Reset };

struct Stage1Options {
  double tau0 = 0.2;
  double tau_growth = 1.1;
  double tau_cap = 1.0;
  int max_iters = 200;
  /// Penalty: the force weight is set so that its first displacement
  /// contribution peaks at this many voxels.
  double force_voxels = 2.0;
  /// Control: largest displacement of the first trial at t = 1.
  double step_voxels = 1.0;
  /// Control: descent schedule.
  double t0 = 1.0, growth = 1.2, shrink = 0.5, min_step = 1e-6;
  int patience = 10;
  double rel_tol = 1e-6;
  ControlUpdate update = ControlUpdate::Accumulate;
};

struct Stage2Options {
  double t0 = 1.0;
  double growth = 1.2;
  double shrink = 0.5;
  double min_step = 1e-6;
  int max_iters = 300;
  int patience = 10;
  double rel_tol = 1e-6;
  /// Largest displacement of the first trial at t = 1.
  double step_voxels = 0.5;
  ControlUpdate update = ControlUpdate::Accumulate;
};

struct RegTraceEntry {
  int stage = 0;
  int iter = 0;
  double mse = 0;
  double step = 0;  ///< tau in penalty stage 1, t otherwise
  double min_jd = 1;
  long solves = 0;  ///< cumulative Poisson solves
  bool accepted = false;
};

struct RegOptions {
  Stage1Options stage1;
  Stage2Options stage2;
  Engine engine = Engine::Penalty;
  BcMode bc = BcMode::DirichletZero;
  ForceGradient force = ForceGradient::WarpedImage;
  bool run_stage2 = true;
  StdEstimator std_estimator = StdEstimator::Sample;
  GridGenOptions inverse;
  int bins = 64;
  /// Called for every trial, accepted or not.
  std::function<void(const RegTraceEntry&)> progress;

  void validate() const;
};

/// Best accepted map plus the trace of one stage.
struct StageResult {
  Transform phi;
  std::vector<RegTraceEntry> trace;
  long solves = 0;
};

StageResult stage1_global(const ScalarField& moving, const ScalarField& fixed, const RegOptions& opts);
StageResult stage1_control(const ScalarField& moving, const ScalarField& fixed, const RegOptions& opts);
StageResult stage2_local(const ScalarField& moving_stage, const ScalarField& fixed, const RegOptions& opts,
                         long solves_before = 0);

struct EngineResult {
  Transform phi;  ///< phi_global o phi_local
  Transform phi_global;
  Transform phi_local;
  std::vector<RegTraceEntry> trace;
  long solves = 0;
};

/// Runs the selected engine on images as given (no normalization).
EngineResult register_pair(const ScalarField& moving, const ScalarField& fixed, const RegOptions& opts = {});

/// Cumulative solves at the first accepted trace entry with mse <= threshold,
/// or -1 if never reached.
long solves_to_reach(const std::vector<RegTraceEntry>& trace, double threshold);

struct RegResult {
  Transform phi;
  Transform phi_inv;
  ScalarField warped_moving;  ///< M o phi
  ScalarField warped_fixed;   ///< F o phi_inv
  std::vector<RegTraceEntry> trace;
  long solves = 0;
  MetricRecord metrics;
};

/// z-score, register, invert, warp both originals and evaluate. Labels, when
/// given, add DICE of the warped moving labels against the fixed labels.
RegResult vpreg_pipeline(const ScalarField& moving, const ScalarField& fixed, const RegOptions& opts = {},
                         const LabelVolume* labels_moving = nullptr, const LabelVolume* labels_fixed = nullptr);

}  // namespace vpreg
