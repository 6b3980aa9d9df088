#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "vpreg/field.hpp"
#include "vpreg/metrics.hpp"
#include "vpreg/register.hpp"

namespace vpreg {

// --- native volume format ------------------------------------------------------
//
// A volume is a JSON header "<name>.vpv.json" next to a little-endian payload
// "<name>.vpv.raw" (x fastest, component major). See docs/formats.md.

enum class VolumeKind { Scalar, Vector, Label, Transform };
enum class Dtype { F32, F64, I32 };

const char* to_string(VolumeKind k);
const char* to_string(Dtype t);
std::size_t dtype_size(Dtype t);

struct VolumeHeader {
  std::vector<int> dims;
  VolumeKind kind = VolumeKind::Scalar;
  int components = 1;
  Dtype dtype = Dtype::F32;
  std::optional<std::array<double, 3>> spacing;  ///< recorded, not used
  std::string byte_order = "little";
  std::string payload;  ///< payload file name, relative to the header

  int dim() const { return static_cast<int>(dims.size()); }
  std::size_t voxels() const;
  std::size_t payload_bytes() const { return voxels() * components * dtype_size(dtype); }
};

using Volume = std::variant<ScalarField, VectorField, Transform, LabelVolume>;

/// Accepts "<name>.vpv.json", "<name>.vpv.raw" or "<name>" and returns the
/// header and payload paths.
std::pair<std::string, std::string> volume_paths(const std::string& path);

/// Throws MissingHeader, UnknownKind, InvalidArgument for inconsistent fields.
VolumeHeader read_header(const std::string& path);

/// Throws MissingHeader, SizeMismatch, UnknownKind, NonFiniteData. Transforms
/// whose boundary deviates from the identity are re-pinned and reported
/// through `warnings` when given.
Volume read_volume(const std::string& path, std::vector<std::string>* warnings = nullptr);

ScalarField read_scalar(const std::string& path);
Transform read_transform(const std::string& path, std::vector<std::string>* warnings = nullptr);
LabelVolume read_labels(const std::string& path);

/// Fields default to f32; labels are always i32. Output bytes depend only on
/// the value and dtype.
void write_volume(const Volume& value, const std::string& path, Dtype dtype = Dtype::F32);

// --- NIfTI-1 ingestion -----------------------------------------------------------

struct NiftiInfo {
  std::vector<int> dims;
  int datatype = 0;
  std::array<double, 3> pixdim{1, 1, 1};
  double scl_slope = 0, scl_inter = 0;
  int qform_code = 0, sform_code = 0;
  std::array<std::array<double, 4>, 3> srow{};  ///< recorded, not applied
};

/// Single-file NIfTI-1, plain or gzip-compressed. Throws BadMagic,
/// UnsupportedDatatype, DimOverflow, SizeMismatch.
NiftiInfo read_nifti_info(const std::string& path);
/// Intensities widened to double with scl_slope / scl_inter applied.
ScalarField read_nifti(const std::string& path, NiftiInfo* info = nullptr);
/// Integer datatypes only, at most 4096 distinct non-negative values.
LabelVolume read_nifti_labels(const std::string& path, NiftiInfo* info = nullptr);

bool is_nifti_path(const std::string& path);
/// Dispatches on the extension: NIfTI or native.
ScalarField load_image(const std::string& path);
LabelVolume load_labels(const std::string& path);

// --- reports -----------------------------------------------------------------------

enum class ReportFormat { Csv, Json };

/// Column names for a set of records: fixed metric columns followed by
/// dice_<label> for every label seen in any record.
std::vector<std::string> record_header(const std::vector<MetricRecord>& records);

/// One row per record; the first column holds the id when ids are given.
std::string records_csv(const std::vector<MetricRecord>& records, const std::vector<std::string>& ids = {});
std::string record_json(const MetricRecord& record);
MetricRecord record_from_json(const std::string& text);

std::string summary_csv(const CohortSummary& summary);
std::string summary_json(const CohortSummary& summary);

std::string trace_csv(const std::vector<RegTraceEntry>& trace);

void write_report(const MetricRecord& record, const std::string& path, ReportFormat format);
/// Writes cohort_summary(records); throws EmptyCohort before touching the file
/// when records is empty.
void write_report(const std::vector<MetricRecord>& records, const std::string& path, ReportFormat format);
void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

/// Shortest text that parses back to the same double.
std::string format_number(double v);

}  // namespace vpreg
