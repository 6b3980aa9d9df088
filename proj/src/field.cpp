#include "vpreg/field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

namespace vpreg {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DomainMismatch: return "DomainMismatch";
    case ErrorCode::DegenerateDomain: return "DegenerateDomain";
    case ErrorCode::NonFiniteData: return "NonFiniteData";
    case ErrorCode::NonPositiveJD: return "NonPositiveJD";
    case ErrorCode::MassMismatch: return "MassMismatch";
    case ErrorCode::NonSolenoidalCurl: return "NonSolenoidalCurl";
    case ErrorCode::FoldingDetected: return "FoldingDetected";
    case ErrorCode::Stalled: return "Stalled";
    case ErrorCode::MissingHeader: return "MissingHeader";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::UnknownKind: return "UnknownKind";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedDatatype: return "UnsupportedDatatype";
    case ErrorCode::DimOverflow: return "DimOverflow";
    case ErrorCode::EmptyCohort: return "EmptyCohort";
    case ErrorCode::ZeroBaselineMI: return "ZeroBaselineMI";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

bool is_numerical_failure(ErrorCode code) {
  return code == ErrorCode::FoldingDetected || code == ErrorCode::Stalled;
}

// ---------------------------------------------------------------------------
// Domain

Domain::Domain(std::span<const int> dims) {
  if (dims.size() < 2 || dims.size() > 3) {
    throw Error(ErrorCode::InvalidArgument, "domain dimensionality must be 2 or 3");
  }
  d_ = static_cast<int>(dims.size());
  size_ = 1;
  for (int a = 0; a < d_; ++a) {
    if (dims[a] < kMinExtent) {
      throw Error(ErrorCode::InvalidArgument,
                  "axis " + std::to_string(a) + " extent " + std::to_string(dims[a]) +
                      " is below the minimum of " + std::to_string(kMinExtent));
    }
    n_[a] = dims[a];
    size_ *= static_cast<std::size_t>(dims[a]);
  }
}

Domain::Domain(std::initializer_list<int> dims)
    : Domain(std::span<const int>(dims.begin(), dims.size())) {}

bool Domain::on_boundary(int x, int y, int z) const {
  if (x == 0 || x == n_[0] - 1 || y == 0 || y == n_[1] - 1) return true;
  return d_ == 3 && (z == 0 || z == n_[2] - 1);
}

void require_same_domain(const Domain& a, const Domain& b, const char* what) {
  if (!(a == b)) throw Error(ErrorCode::DomainMismatch, what);
}

// ---------------------------------------------------------------------------
// ScalarField

ScalarField::ScalarField(const Domain& domain, std::vector<double> values)
    : domain_(domain), values_(std::move(values)) {
  if (values_.size() != domain_.size()) {
    throw Error(ErrorCode::SizeMismatch, "scalar field value count does not match domain");
  }
}

bool ScalarField::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

ScalarField& ScalarField::operator+=(const ScalarField& o) {
  require_same_domain(domain_, o.domain_, "scalar +=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
  return *this;
}

ScalarField& ScalarField::operator-=(const ScalarField& o) {
  require_same_domain(domain_, o.domain_, "scalar -=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
  return *this;
}

ScalarField& ScalarField::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
ScalarField operator*(double s, ScalarField a) { return a *= s; }

// ---------------------------------------------------------------------------
// VectorField

VectorField::VectorField(const Domain& domain, int components, double fill) : domain_(domain) {
  comps_.reserve(components);
  for (int c = 0; c < components; ++c) comps_.emplace_back(domain, fill);
}

VectorField::VectorField(std::vector<ScalarField> components) : comps_(std::move(components)) {
  if (comps_.empty()) throw Error(ErrorCode::InvalidArgument, "vector field needs components");
  domain_ = comps_.front().domain();
  for (const auto& c : comps_) require_same_domain(domain_, c.domain(), "vector components");
}

bool VectorField::all_finite() const {
  return std::all_of(comps_.begin(), comps_.end(), [](const ScalarField& c) { return c.all_finite(); });
}

double VectorField::max_norm() const {
  double best = 0;
  for (std::size_t i = 0; i < domain_.size(); ++i) {
    double s = 0;
    for (const auto& c : comps_) s += c[i] * c[i];
    best = std::max(best, s);
  }
  return std::sqrt(best);
}

VectorField& VectorField::operator+=(const VectorField& o) {
  if (o.components() != components()) throw Error(ErrorCode::DomainMismatch, "vector +=");
  for (int c = 0; c < components(); ++c) comps_[c] += o.comps_[c];
  return *this;
}

VectorField& VectorField::operator-=(const VectorField& o) {
  if (o.components() != components()) throw Error(ErrorCode::DomainMismatch, "vector -=");
  for (int c = 0; c < components(); ++c) comps_[c] -= o.comps_[c];
  return *this;
}

VectorField& VectorField::operator*=(double s) {
  for (auto& c : comps_) c *= s;
  return *this;
}

VectorField operator+(VectorField a, const VectorField& b) { return a += b; }
VectorField operator-(VectorField a, const VectorField& b) { return a -= b; }
VectorField operator*(double s, VectorField a) { return a *= s; }

// ---------------------------------------------------------------------------
// Transform

Transform::Transform(VectorField coords) : coords_(std::move(coords)) {
  const Domain& dom = coords_.domain();
  if (coords_.components() != dom.dim()) {
    throw Error(ErrorCode::InvalidArgument, "transform needs one coordinate per axis");
  }
  for (std::size_t i = 0; i < dom.size(); ++i) {
    const auto c = dom.coords(i);
    if (!dom.on_boundary(c[0], c[1], c[2])) continue;
    for (int a = 0; a < dom.dim(); ++a) coords_[a][i] = c[a];
  }
}

double Transform::boundary_deviation(const VectorField& coords) {
  const Domain& dom = coords.domain();
  double dev = 0;
  for (std::size_t i = 0; i < dom.size(); ++i) {
    const auto c = dom.coords(i);
    if (!dom.on_boundary(c[0], c[1], c[2])) continue;
    for (int a = 0; a < coords.components(); ++a) dev = std::max(dev, std::abs(coords[a][i] - c[a]));
  }
  return dev;
}

VectorField identity_coords(const Domain& domain) {
  VectorField id(domain, domain.dim());
  for (std::size_t i = 0; i < domain.size(); ++i) {
    const auto c = domain.coords(i);
    for (int a = 0; a < domain.dim(); ++a) id[a][i] = c[a];
  }
  return id;
}

Transform make_identity(const Domain& domain) { return Transform(identity_coords(domain)); }

VectorField displacement(const Transform& phi) {
  VectorField u = phi.coords();
  const Domain& dom = phi.domain();
  for (std::size_t i = 0; i < dom.size(); ++i) {
    const auto c = dom.coords(i);
    for (int a = 0; a < dom.dim(); ++a) u[a][i] -= c[a];
  }
  return u;
}

Transform from_displacement(const VectorField& u) {
  VectorField x = u;
  const Domain& dom = u.domain();
  for (std::size_t i = 0; i < dom.size(); ++i) {
    const auto c = dom.coords(i);
    for (int a = 0; a < dom.dim(); ++a) x[a][i] += c[a];
  }
  return Transform(std::move(x));
}

Transform blend(const Transform& a, const Transform& b, double tau) {
  require_same_domain(a.domain(), b.domain(), "blend");
  VectorField x = a.coords();
  for (int c = 0; c < x.components(); ++c) {
    auto out = x[c].values();
    auto bv = b.coords()[c].values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - tau) * out[i] + tau * bv[i];
  }
  return Transform(std::move(x));
}

// ---------------------------------------------------------------------------
// LabelVolume

LabelVolume::LabelVolume(const Domain& domain, std::vector<std::int32_t> labels)
    : domain_(domain), labels_(std::move(labels)) {
  if (labels_.size() != domain_.size()) {
    throw Error(ErrorCode::SizeMismatch, "label count does not match domain");
  }
  if (std::any_of(labels_.begin(), labels_.end(), [](std::int32_t l) { return l < 0; })) {
    throw Error(ErrorCode::InvalidArgument, "labels must be non-negative");
  }
}

std::vector<std::int32_t> LabelVolume::label_set() const {
  std::set<std::int32_t> s(labels_.begin(), labels_.end());
  return {s.begin(), s.end()};
}

// ---------------------------------------------------------------------------

FieldStats field_stats(const ScalarField& s, StdEstimator estimator) {
  const std::size_t n = s.size();
  if (n < 2) throw Error(ErrorCode::DegenerateDomain, "field_stats needs at least two voxels");
  FieldStats st;
  st.min = std::numeric_limits<double>::infinity();
  st.max = -st.min;
  double sum = 0;
  for (double v : s.values()) {
    sum += v;
    st.min = std::min(st.min, v);
    st.max = std::max(st.max, v);
  }
  st.mean = sum / static_cast<double>(n);
  double ss = 0;
  for (double v : s.values()) ss += (v - st.mean) * (v - st.mean);
  st.std = estimator == StdEstimator::Sample ? std::sqrt(ss / static_cast<double>(n - 1))
                                             : std::sqrt(ss) / static_cast<double>(n - 1);
  return st;
}

}  // namespace vpreg
