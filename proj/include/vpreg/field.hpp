#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "vpreg/error.hpp"

namespace vpreg {

/// Rectangular voxel lattice with unit spacing. Unused trailing axes have
/// extent 1, so 2-D fields are stored as nx*ny*1 volumes.
class Domain {
 public:
  static constexpr int kMinExtent = 8;

  Domain() = default;
  /// Throws InvalidArgument unless 2 <= dims.size() <= 3 and every extent >= 8.
  explicit Domain(std::span<const int> dims);
  Domain(std::initializer_list<int> dims);

  int dim() const { return d_; }
  int extent(int axis) const { return n_[axis]; }
  const std::array<int, 3>& extents() const { return n_; }
  std::size_t size() const { return size_; }

  std::size_t index(int x, int y, int z = 0) const {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(n_[0]) * (static_cast<std::size_t>(y) +
                                              static_cast<std::size_t>(n_[1]) * z);
  }
  std::array<int, 3> coords(std::size_t i) const {
    const int x = static_cast<int>(i % n_[0]);
    const std::size_t r = i / n_[0];
    return {x, static_cast<int>(r % n_[1]), static_cast<int>(r / n_[1])};
  }
  /// Linear-index stride along an axis.
  std::size_t stride(int axis) const {
    return axis == 0 ? 1 : axis == 1 ? static_cast<std::size_t>(n_[0])
                                     : static_cast<std::size_t>(n_[0]) * n_[1];
  }
  bool on_boundary(int x, int y, int z) const;
  bool on_boundary(std::size_t i) const {
    const auto c = coords(i);
    return on_boundary(c[0], c[1], c[2]);
  }

  friend bool operator==(const Domain& a, const Domain& b) {
    return a.d_ == b.d_ && a.n_ == b.n_;
  }

 private:
  int d_ = 0;
  std::array<int, 3> n_{1, 1, 1};
  std::size_t size_ = 0;
};

void require_same_domain(const Domain& a, const Domain& b, const char* what);

/// One double per voxel, x-fastest.
class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(const Domain& domain, double fill = 0.0)
      : domain_(domain), values_(domain.size(), fill) {}
  ScalarField(const Domain& domain, std::vector<double> values);

  const Domain& domain() const { return domain_; }
  std::size_t size() const { return values_.size(); }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& at(int x, int y, int z = 0) { return values_[domain_.index(x, y, z)]; }
  double at(int x, int y, int z = 0) const { return values_[domain_.index(x, y, z)]; }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  bool all_finite() const;

  ScalarField& operator+=(const ScalarField& o);
  ScalarField& operator-=(const ScalarField& o);
  ScalarField& operator*=(double s);

 private:
  Domain domain_;
  std::vector<double> values_;
};

ScalarField operator+(ScalarField a, const ScalarField& b);
ScalarField operator-(ScalarField a, const ScalarField& b);
ScalarField operator*(double s, ScalarField a);

/// A list of scalar components on one domain. Vector fields carry d
/// components; curl-type fields carry 3 in 3-D and 1 (the scalar curl) in 2-D.
class VectorField {
 public:
  VectorField() = default;
  VectorField(const Domain& domain, int components, double fill = 0.0);
  explicit VectorField(std::vector<ScalarField> components);

  const Domain& domain() const { return domain_; }
  int components() const { return static_cast<int>(comps_.size()); }
  ScalarField& operator[](int c) { return comps_[c]; }
  const ScalarField& operator[](int c) const { return comps_[c]; }

  bool all_finite() const;
  /// Largest Euclidean norm over voxels.
  double max_norm() const;

  VectorField& operator+=(const VectorField& o);
  VectorField& operator-=(const VectorField& o);
  VectorField& operator*=(double s);

 private:
  Domain domain_;
  std::vector<ScalarField> comps_;
};

VectorField operator+(VectorField a, const VectorField& b);
VectorField operator-(VectorField a, const VectorField& b);
VectorField operator*(double s, VectorField a);

/// Number of components of the curl of a d-dimensional field.
inline int curl_components(int d) { return d == 3 ? 3 : 1; }

/// Absolute-coordinate map phi(w) = w + u(w), in voxel units, pinned to the
/// identity on the lattice boundary.
class Transform {
 public:
  Transform() = default;
  /// Takes absolute coordinates; boundary voxels are re-pinned to identity.
  explicit Transform(VectorField coords);

  const Domain& domain() const { return coords_.domain(); }
  const VectorField& coords() const { return coords_; }
  int dim() const { return coords_.domain().dim(); }

  /// Largest deviation of boundary voxels from identity in the given coords.
  static double boundary_deviation(const VectorField& coords);

 private:
  VectorField coords_;
};

Transform make_identity(const Domain& domain);
VectorField identity_coords(const Domain& domain);
/// u = phi - id.
VectorField displacement(const Transform& phi);
/// phi = id + u.
Transform from_displacement(const VectorField& u);

/// Convex blend (1 - tau) a + tau b.
Transform blend(const Transform& a, const Transform& b, double tau);

/// Non-negative integer labels, 0 is background.
class LabelVolume {
 public:
  LabelVolume() = default;
  LabelVolume(const Domain& domain, std::vector<std::int32_t> labels);

  const Domain& domain() const { return domain_; }
  std::size_t size() const { return labels_.size(); }
  std::int32_t operator[](std::size_t i) const { return labels_[i]; }
  std::span<const std::int32_t> labels() const { return labels_; }
  /// Sorted distinct labels present, including 0 if present.
  std::vector<std::int32_t> label_set() const;

 private:
  Domain domain_;
  std::vector<std::int32_t> labels_;
};

enum class StdEstimator {
  Sample,         ///< sqrt(sum (x - mu)^2 / (N - 1))
  LiteralRootSum  ///< sqrt(sum (x - mu)^2) / (N - 1), the z-score text read literally
};

struct FieldStats {
  double mean = 0, std = 0, min = 0, max = 0;
};

FieldStats field_stats(const ScalarField& s, StdEstimator estimator = StdEstimator::Sample);

}  // namespace vpreg
