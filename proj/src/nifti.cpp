#include <zlib.h>

#include <cmath>
#include <cstring>
#include <set>

#include "vpreg/io.hpp"

namespace vpreg {
namespace {

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kMaxLabels = 4096;

struct Raw {
  NiftiInfo info;
  std::vector<double> values;
};

std::string slurp(const std::string& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw Error(ErrorCode::Io, "cannot open " + path);
  std::string out;
  char buf[1 << 16];
  int n;
  while ((n = gzread(f, buf, sizeof buf)) > 0) out.append(buf, static_cast<std::size_t>(n));
  const bool failed = n < 0;
  gzclose(f);
  if (failed) throw Error(ErrorCode::Io, "decompression failed for " + path);
  return out;
}

template <class T>
T get(const std::string& b, std::size_t off) {
  T v;
  std::memcpy(&v, b.data() + off, sizeof(T));
  return v;
}

std::size_t datatype_size(int dt) {
  switch (dt) {
    case 2: return 1;   // uint8
    case 4: return 2;   // int16
    case 8: return 4;   // int32
    case 16: return 4;  // float32
    case 64: return 8;  // float64
    default: return 0;
  }
}

NiftiInfo parse_header(const std::string& b) {
  if (b.size() < kHeaderSize) throw Error(ErrorCode::BadMagic, "file shorter than a NIfTI-1 header");
  const std::int32_t sizeof_hdr = get<std::int32_t>(b, 0);
  if (sizeof_hdr != 348) {
    if (sizeof_hdr == 0x5C010000) throw Error(ErrorCode::BadMagic, "big-endian NIfTI files are not supported");
    throw Error(ErrorCode::BadMagic, "sizeof_hdr is not 348");
  }
  if (std::memcmp(b.data() + 344, "n+1\0", 4) != 0) throw Error(ErrorCode::BadMagic, "magic is not \"n+1\"");
  NiftiInfo info;
  const int ndim = get<std::int16_t>(b, 40);
  if (ndim < 1 || ndim > 7) throw Error(ErrorCode::DimOverflow, "dim[0] out of range");
  std::vector<int> dims;
  for (int a = 1; a <= ndim; ++a) {
    const int n = get<std::int16_t>(b, 40 + 2 * a);
    if (n < 1) throw Error(ErrorCode::DimOverflow, "non-positive dimension");
    dims.push_back(n);
  }
  // trailing singleton axes are dropped; anything beyond three spatial axes is rejected
  while (dims.size() > 2 && dims.back() == 1) dims.pop_back();
  if (dims.size() > 3) throw Error(ErrorCode::DimOverflow, "more than three non-singleton axes");
  if (dims.size() < 2) throw Error(ErrorCode::DimOverflow, "fewer than two axes");
  info.dims = dims;
  info.datatype = get<std::int16_t>(b, 70);
  if (datatype_size(info.datatype) == 0)
    throw Error(ErrorCode::UnsupportedDatatype, "datatype " + std::to_string(info.datatype) + " is not supported");
  for (int a = 0; a < 3; ++a) info.pixdim[a] = get<float>(b, 80 + 4 * a);
  info.scl_slope = get<float>(b, 112);
  info.scl_inter = get<float>(b, 116);
  info.qform_code = get<std::int16_t>(b, 252);
  info.sform_code = get<std::int16_t>(b, 254);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) info.srow[r][c] = get<float>(b, 280 + 16 * r + 4 * c);
  return info;
}

Raw read_raw(const std::string& path) {
  const std::string b = slurp(path);
  Raw r;
  r.info = parse_header(b);
  const float vox_offset = get<float>(b, 108);
  const std::size_t offset = vox_offset >= kHeaderSize ? static_cast<std::size_t>(vox_offset) : 352;
  std::size_t n = 1;
  for (int e : r.info.dims) n *= static_cast<std::size_t>(e);
  const std::size_t bytes = datatype_size(r.info.datatype);
  if (b.size() < offset + n * bytes) throw Error(ErrorCode::SizeMismatch, "image data is truncated");
  r.values.resize(n);
  const char* p = b.data() + offset;
  for (std::size_t i = 0; i < n; ++i, p += bytes) {
    switch (r.info.datatype) {
      case 2: r.values[i] = static_cast<unsigned char>(*p); break;
      case 4: r.values[i] = get<std::int16_t>(b, p - b.data()); break;
      case 8: r.values[i] = get<std::int32_t>(b, p - b.data()); break;
      case 16: r.values[i] = get<float>(b, p - b.data()); break;
      case 64: r.values[i] = get<double>(b, p - b.data()); break;
    }
    if (!std::isfinite(r.values[i])) throw Error(ErrorCode::NonFiniteData, "image contains non-finite values");
  }
  return r;
}

}  // namespace

NiftiInfo read_nifti_info(const std::string& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw Error(ErrorCode::Io, "cannot open " + path);
  std::string b(kHeaderSize, '\0');
  const int n = gzread(f, b.data(), kHeaderSize);
  gzclose(f);
  b.resize(n > 0 ? static_cast<std::size_t>(n) : 0);
  return parse_header(b);
}

ScalarField read_nifti(const std::string& path, NiftiInfo* info) {
  Raw r = read_raw(path);
  const double slope = r.info.scl_slope, inter = r.info.scl_inter;
  if (slope != 0 && std::isfinite(slope) && std::isfinite(inter))
    for (double& v : r.values) v = slope * v + inter;
  if (info) *info = r.info;
  return ScalarField(Domain(std::span<const int>(r.info.dims)), std::move(r.values));
}

LabelVolume read_nifti_labels(const std::string& path, NiftiInfo* info) {
  Raw r = read_raw(path);
  if (r.info.datatype == 16 || r.info.datatype == 64)
    throw Error(ErrorCode::UnsupportedDatatype, "label volumes need an integer datatype");
  std::vector<std::int32_t> labels(r.values.size());
  std::set<std::int32_t> distinct;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    labels[i] = static_cast<std::int32_t>(r.values[i]);
    if (distinct.insert(labels[i]).second && distinct.size() > kMaxLabels)
      throw Error(ErrorCode::InvalidArgument, "more than 4096 distinct labels");
  }
  if (info) *info = r.info;
  return LabelVolume(Domain(std::span<const int>(r.info.dims)), std::move(labels));
}

}  // namespace vpreg
