#include "vpreg/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little, "payloads are written in native little-endian order");

namespace vpreg {
namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(VolumeKind k) {
  switch (k) {
    case VolumeKind::Scalar: return "scalar";
    case VolumeKind::Vector: return "vector";
    case VolumeKind::Label: return "label";
    case VolumeKind::Transform: return "transform";
  }
  return "?";
}

const char* to_string(Dtype t) {
  switch (t) {
    case Dtype::F32: return "f32";
    case Dtype::F64: return "f64";
    case Dtype::I32: return "i32";
  }
  return "?";
}

std::size_t dtype_size(Dtype t) { return t == Dtype::F64 ? 8 : 4; }

std::size_t VolumeHeader::voxels() const {
  std::size_t n = 1;
  for (int e : dims) n *= static_cast<std::size_t>(e);
  return n;
}

std::pair<std::string, std::string> volume_paths(const std::string& path) {
  auto ends_with = [&](const char* suffix) {
    const std::size_t n = std::strlen(suffix);
    return path.size() >= n && path.compare(path.size() - n, n, suffix) == 0;
  };
  std::string base = path;
  if (ends_with(".vpv.json") || ends_with(".vpv.raw")) base = path.substr(0, path.rfind(".vpv."));
  return {base + ".vpv.json", base + ".vpv.raw"};
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

namespace {

VolumeKind parse_kind(const std::string& s) {
  for (auto k : {VolumeKind::Scalar, VolumeKind::Vector, VolumeKind::Label, VolumeKind::Transform})
    if (s == to_string(k)) return k;
  throw Error(ErrorCode::UnknownKind, "unknown volume kind '" + s + "'");
}

Dtype parse_dtype(const std::string& s) {
  for (auto t : {Dtype::F32, Dtype::F64, Dtype::I32})
    if (s == to_string(t)) return t;
  throw Error(ErrorCode::InvalidArgument, "unknown dtype '" + s + "'");
}

Domain header_domain(const VolumeHeader& h) { return Domain(std::span<const int>(h.dims)); }

std::vector<double> decode(const std::vector<char>& bytes, Dtype t) {
  const std::size_t n = bytes.size() / dtype_size(t);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const char* p = bytes.data() + i * dtype_size(t);
    if (t == Dtype::F32) {
      float v;
      std::memcpy(&v, p, 4);
      out[i] = v;
    } else if (t == Dtype::F64) {
      std::memcpy(&out[i], p, 8);
    } else {
      std::int32_t v;
      std::memcpy(&v, p, 4);
      out[i] = v;
    }
  }
  return out;
}

void encode(double v, Dtype t, std::string& out) {
  char buf[8];
  if (t == Dtype::F32) {
    const float f = static_cast<float>(v);
    std::memcpy(buf, &f, 4);
  } else if (t == Dtype::F64) {
    std::memcpy(buf, &v, 8);
  } else {
    const std::int32_t i = static_cast<std::int32_t>(v);
    std::memcpy(buf, &i, 4);
  }
  out.append(buf, dtype_size(t));
}

}  // namespace

VolumeHeader read_header(const std::string& path) {
  const auto [hpath, rpath] = volume_paths(path);
  if (!fs::exists(hpath)) throw Error(ErrorCode::MissingHeader, "no header at " + hpath);
  json j;
  try {
    j = json::parse(read_text(hpath));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MissingHeader, "unreadable header " + hpath + ": " + e.what());
  }
  VolumeHeader h;
  try {
    h.dims = j.at("dims").get<std::vector<int>>();
    h.kind = parse_kind(j.at("kind").get<std::string>());
    h.dtype = parse_dtype(j.at("dtype").get<std::string>());
    h.components = j.value("components", 1);
    h.byte_order = j.value("byte_order", std::string("little"));
    h.payload = j.value("payload", fs::path(rpath).filename().string());
    if (j.contains("spacing")) {
      const auto sp = j["spacing"].get<std::vector<double>>();
      std::array<double, 3> s{1, 1, 1};
      for (std::size_t a = 0; a < sp.size() && a < 3; ++a) s[a] = sp[a];
      h.spacing = s;
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MissingHeader, "malformed header " + hpath + ": " + e.what());
  }
  if (h.byte_order != "little") throw Error(ErrorCode::InvalidArgument, "only little-endian payloads are supported");
  const int d = h.dim();
  const bool vector_like = h.kind == VolumeKind::Vector || h.kind == VolumeKind::Transform;
  if (h.components != (vector_like ? d : 1))
    throw Error(ErrorCode::InvalidArgument, "component count does not match kind");
  if ((h.kind == VolumeKind::Label) != (h.dtype == Dtype::I32))
    throw Error(ErrorCode::InvalidArgument, "labels use i32, fields use f32 or f64");
  return h;
}

Volume read_volume(const std::string& path, std::vector<std::string>* warnings) {
  const VolumeHeader h = read_header(path);
  const auto hpath = volume_paths(path).first;
  const fs::path rpath = fs::path(hpath).parent_path() / h.payload;
  if (!fs::exists(rpath)) throw Error(ErrorCode::SizeMismatch, "payload missing: " + rpath.string());
  const std::string raw = read_text(rpath.string());
  if (raw.size() != h.payload_bytes()) {
    std::ostringstream msg;
    msg << "payload has " << raw.size() << " bytes, header implies " << h.payload_bytes();
    throw Error(ErrorCode::SizeMismatch, msg.str());
  }
  const Domain dom = header_domain(h);
  const std::vector<double> v = decode(std::vector<char>(raw.begin(), raw.end()), h.dtype);
  for (double x : v)
    if (!std::isfinite(x)) throw Error(ErrorCode::NonFiniteData, "payload contains non-finite values");
  const std::size_t n = dom.size();
  auto component = [&](int c) {
    return ScalarField(dom, std::vector<double>(v.begin() + c * n, v.begin() + (c + 1) * n));
  };
  switch (h.kind) {
    case VolumeKind::Scalar: return component(0);
    case VolumeKind::Label: {
      std::vector<std::int32_t> l(n);
      for (std::size_t i = 0; i < n; ++i) l[i] = static_cast<std::int32_t>(v[i]);
      return LabelVolume(dom, std::move(l));
    }
    case VolumeKind::Vector:
    case VolumeKind::Transform: {
      std::vector<ScalarField> comps;
      for (int c = 0; c < h.components; ++c) comps.push_back(component(c));
      VectorField f(std::move(comps));
      if (h.kind == VolumeKind::Vector) return f;
      const double dev = Transform::boundary_deviation(f);
      if (dev > 0 && warnings) {
        std::ostringstream msg;
        msg << hpath << ": boundary deviates from identity by up to " << dev << " voxels; re-pinned";
        warnings->push_back(msg.str());
      }
      return Transform(std::move(f));
    }
  }
  throw Error(ErrorCode::UnknownKind, "unhandled kind");
}

namespace {
template <class T>
T expect(Volume v, VolumeKind want, const std::string& path) {
  if (auto* p = std::get_if<T>(&v)) return std::move(*p);
  throw Error(ErrorCode::InvalidArgument, path + " is not a " + to_string(want) + " volume");
}
}  // namespace

ScalarField read_scalar(const std::string& path) {
  return expect<ScalarField>(read_volume(path), VolumeKind::Scalar, path);
}
Transform read_transform(const std::string& path, std::vector<std::string>* warnings) {
  return expect<Transform>(read_volume(path, warnings), VolumeKind::Transform, path);
}
LabelVolume read_labels(const std::string& path) {
  return expect<LabelVolume>(read_volume(path), VolumeKind::Label, path);
}

void write_volume(const Volume& value, const std::string& path, Dtype dtype) {
  const auto [hpath, rpath] = volume_paths(path);
  VolumeHeader h;
  std::string payload;
  const Domain* dom = nullptr;
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        dom = &x.domain();
        if constexpr (std::is_same_v<T, LabelVolume>) {
          h.kind = VolumeKind::Label;
          h.dtype = Dtype::I32;
          for (auto l : x.labels()) encode(l, Dtype::I32, payload);
        } else {
          if (dtype == Dtype::I32) throw Error(ErrorCode::InvalidArgument, "fields are stored as f32 or f64");
          h.dtype = dtype;
          if constexpr (std::is_same_v<T, ScalarField>) {
            h.kind = VolumeKind::Scalar;
            for (double v : x.values()) encode(v, dtype, payload);
          } else {
            const VectorField& f = [&]() -> const VectorField& {
              if constexpr (std::is_same_v<T, Transform>) return x.coords();
              else return x;
            }();
            h.kind = std::is_same_v<T, Transform> ? VolumeKind::Transform : VolumeKind::Vector;
            if (f.components() != f.domain().dim())
              throw Error(ErrorCode::InvalidArgument, "vector volumes carry one component per axis");
            h.components = f.components();
            for (int c = 0; c < f.components(); ++c)
              for (double v : f[c].values()) encode(v, dtype, payload);
          }
        }
      },
      value);
  json j;
  std::vector<int> dims;
  for (int a = 0; a < dom->dim(); ++a) dims.push_back(dom->extent(a));
  j["format"] = "vpv";
  j["version"] = 1;
  j["dims"] = dims;
  j["kind"] = to_string(h.kind);
  j["components"] = h.components;
  j["dtype"] = to_string(h.dtype);
  j["byte_order"] = "little";
  j["spacing"] = std::vector<double>(dom->dim(), 1.0);
  j["payload"] = fs::path(rpath).filename().string();
  write_text(rpath, payload);
  write_text(hpath, j.dump(2) + "\n");
}

bool is_nifti_path(const std::string& path) {
  auto ends = [&](const std::string& s) {
    return path.size() >= s.size() && path.compare(path.size() - s.size(), s.size(), s) == 0;
  };
  return ends(".nii") || ends(".nii.gz");
}

ScalarField load_image(const std::string& path) {
  return is_nifti_path(path) ? read_nifti(path) : read_scalar(path);
}

LabelVolume load_labels(const std::string& path) {
  return is_nifti_path(path) ? read_nifti_labels(path) : read_labels(path);
}

}  // namespace vpreg
