#pragma once

// Test-side writers for hand-built NIfTI-1 files and scratch directories.

#include <unistd.h>
#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fixture {

struct NiftiSpec {
  std::vector<int> dims;
  int datatype = 16;
  std::vector<double> values;
  float slope = 0, inter = 0;
  std::int32_t sizeof_hdr = 348;
  const char* magic = "n+1";
  float vox_offset = 352;
  std::size_t truncate = 0;  ///< bytes dropped from the end
};

template <class T>
void put(std::string& b, std::size_t off, T v) {
  std::memcpy(b.data() + off, &v, sizeof v);
}

inline std::string nifti_bytes(const NiftiSpec& s) {
  std::string b(352, '\0');
  put<std::int32_t>(b, 0, s.sizeof_hdr);
  put<std::int16_t>(b, 40, static_cast<std::int16_t>(s.dims.size()));
  for (std::size_t a = 0; a < 7; ++a) put<std::int16_t>(b, 42 + 2 * a, a < s.dims.size() ? s.dims[a] : 1);
  put<std::int16_t>(b, 70, static_cast<std::int16_t>(s.datatype));
  const int bits = s.datatype == 2 ? 8 : s.datatype == 4 ? 16 : s.datatype == 64 ? 64 : 32;
  put<std::int16_t>(b, 72, static_cast<std::int16_t>(bits));
  for (int a = 0; a < 4; ++a) put<float>(b, 76 + 4 * a, 1.0f);
  put<float>(b, 108, s.vox_offset);
  put<float>(b, 112, s.slope);
  put<float>(b, 116, s.inter);
  put<std::int16_t>(b, 254, 1);
  for (int r = 0; r < 3; ++r) put<float>(b, 280 + 16 * r + 4 * r, 1.0f);
  std::memcpy(b.data() + 344, s.magic, std::strlen(s.magic) + 1);
  for (double v : s.values) {
    char buf[8];
    std::size_t n = 0;
    switch (s.datatype) {
      case 2: buf[0] = static_cast<char>(static_cast<std::uint8_t>(v)), n = 1; break;
      case 4: { const auto x = static_cast<std::int16_t>(v); std::memcpy(buf, &x, n = 2); break; }
      case 8: { const auto x = static_cast<std::int32_t>(v); std::memcpy(buf, &x, n = 4); break; }
      case 16: { const auto x = static_cast<float>(v); std::memcpy(buf, &x, n = 4); break; }
      default: std::memcpy(buf, &v, n = 8); break;
    }
    b.append(buf, n);
  }
  b.resize(b.size() - s.truncate);
  return b;
}

inline void write_nifti(const std::string& path, const NiftiSpec& s) {
  const std::string b = nifti_bytes(s);
  if (path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0) {
    gzFile f = gzopen(path.c_str(), "wb");
    gzwrite(f, b.data(), static_cast<unsigned>(b.size()));
    gzclose(f);
  } else {
    std::ofstream(path, std::ios::binary).write(b.data(), static_cast<std::streamsize>(b.size()));
  }
}

/// Fresh directory under the system temp path, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("vpreg_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string operator/(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace fixture
