#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vpreg/field.hpp"

namespace vpreg {

/// 2|A_l & B_l| / (|A_l| + |B_l|); 1 when the label is absent from both.
double dice(const LabelVolume& a, const LabelVolume& b, std::int32_t label);

/// Nearest-neighbour label lookup at phi(w), clamped to the lattice.
LabelVolume warp_labels(const LabelVolume& labels, const Transform& phi);

/// mse(M, F, phi) / mse(M, F, id); 1 when the denominator is zero.
double mse_ratio(const ScalarField& moving, const ScalarField& fixed, const Transform& phi);

/// Histogram mutual information (natural log) with `bins` equal-width bins
/// over each image's own [min, max]. A constant image gives 0.
double mutual_information(const ScalarField& a, const ScalarField& b, int bins = 64);

/// (MI(M o phi, F) - MI(M, F)) / MI(M, F) as a fraction. Throws ZeroBaselineMI.
double mi_increment(const ScalarField& moving, const ScalarField& fixed, const Transform& phi, int bins = 64);

struct JdStats {
  double min = 1, max = 1;
  double neg_fraction = 0;  ///< share of interior voxels with det <= 0
};

/// Jacobian determinant statistics over interior voxels.
JdStats jd_stats(const Transform& phi);

/// Deviation of a composed map psi from the identity.
struct CompositionError {
  double max_det = 0;  ///< max |det grad psi - 1|
  double sum_det = 0;
  double sum_det_per_voxel = 0;
  double max_norm = 0;  ///< max ||psi - id||, voxels
  double sum_norm = 0;
  double sum_norm_per_voxel = 0;
};

CompositionError composition_error(const Transform& psi);

struct InverseConsistency {
  CompositionError inv_after_fwd;  ///< psi = phi_inv o phi
  CompositionError fwd_after_inv;  ///< psi = phi o phi_inv
};

InverseConsistency inverse_consistency(const Transform& phi, const Transform& phi_inv);

struct MetricRecord {
  std::vector<std::pair<std::int32_t, double>> dice;  ///< per foreground label, ascending
  std::optional<double> mse_ratio;
  std::optional<double> mi_incr;  ///< fraction; reports show percent
  double jd_min = 1, jd_max = 1, jd_neg_fraction = 0;
  std::optional<InverseConsistency> inverse;

  /// Mean dice over labels, empty if no labels were evaluated.
  std::optional<double> dice_mean() const;
  /// Flat numeric view in the stable report column order.
  std::vector<std::pair<std::string, std::optional<double>>> columns() const;
};

struct MetricInputs {
  const ScalarField* moving = nullptr;
  const ScalarField* fixed = nullptr;
  const Transform* phi = nullptr;
  const Transform* phi_inv = nullptr;
  const LabelVolume* labels_moving = nullptr;
  const LabelVolume* labels_fixed = nullptr;
  int bins = 64;
};

/// Fills every metric whose inputs are present. DICE compares labels_fixed
/// with labels_moving warped by phi for each nonzero label in either volume.
MetricRecord compute_metrics(const MetricInputs& in);

struct SummaryStats {
  double min = 0, q25 = 0, median = 0, q75 = 0, max = 0, mean = 0, std = 0;
  std::size_t count = 0;
};

/// Order statistics with linear interpolation between closest ranks,
/// mean, and sample standard deviation (0 for a single value).
SummaryStats summarize(std::vector<double> values);

struct CohortSummary {
  std::vector<std::pair<std::string, SummaryStats>> metrics;  ///< report column order
};

/// Throws EmptyCohort for an empty list. Missing values are skipped per metric.
CohortSummary cohort_summary(const std::vector<MetricRecord>& records);

}  // namespace vpreg
