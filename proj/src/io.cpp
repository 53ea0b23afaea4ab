#include "sdepth/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "sdepth/errors.hpp"

namespace sdepth {

namespace {

// Explicit little-endian packing so files are identical across hosts.
void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_f32(std::string& out, float f) {
  uint32_t v;
  std::memcpy(&v, &f, 4);
  put_u32(out, v);
}

class Reader {
 public:
  Reader(std::string bytes, std::string path) : bytes_(std::move(bytes)), path_(std::move(path)) {}

  void need(size_t n, const char* what) {
    if (pos_ + n > bytes_.size())
      throw TruncationError(path_ + ": truncated reading " + what + ", expected " +
                            std::to_string(pos_ + n) + " bytes, file has " +
                            std::to_string(bytes_.size()));
  }
  std::string raw(size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  uint32_t u32(const char* what) {
    need(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<uint32_t>(static_cast<uint8_t>(bytes_[pos_ + static_cast<size_t>(i)]))
           << (8 * i);
    pos_ += 4;
    return v;
  }
  uint16_t u16(const char* what) {
    need(2, what);
    uint16_t v = static_cast<uint16_t>(static_cast<uint8_t>(bytes_[pos_]) |
                                       (static_cast<uint8_t>(bytes_[pos_ + 1]) << 8));
    pos_ += 2;
    return v;
  }
  uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<uint8_t>(bytes_[pos_++]);
  }
  float f32(const char* what) {
    uint32_t v = u32(what);
    float f;
    std::memcpy(&f, &v, 4);
    return f;
  }
  bool done() const { return pos_ == bytes_.size(); }
  const std::string& path() const { return path_; }

 private:
  std::string bytes_;
  std::string path_;
  size_t pos_ = 0;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

void spit(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path);
}

void check_magic(Reader& r, const char* magic) {
  std::string got = r.raw(4, "magic");
  if (got != magic)
    throw BadMagicError(r.path() + ": bad magic, expected \"" + magic + "\", got \"" + got + "\"");
}

void check_version(Reader& r, uint32_t expected) {
  uint32_t got = r.u32("version");
  if (got != expected)
    throw VersionError(r.path() + ": unsupported version " + std::to_string(got) + ", expected " +
                       std::to_string(expected));
}

}  // namespace

void write_fdpt(const std::string& path, const DepthRaster& r) {
  r.validate();
  std::string out = "FDPT";
  put_u32(out, kFdptVersion);
  put_u32(out, static_cast<uint32_t>(r.h()));
  put_u32(out, static_cast<uint32_t>(r.w()));
  for (int i = 0; i < r.depth.numel(); ++i) {
    size_t ii = static_cast<size_t>(i);
    put_f32(out, r.mask.data[ii] ? r.depth.data[ii] : 0.0f);  // 0.0 is the invalid sentinel
  }
  spit(path, out);
}

DepthRaster read_fdpt(const std::string& path) {
  Reader r(slurp(path), path);
  check_magic(r, "FDPT");
  check_version(r, kFdptVersion);
  int h = static_cast<int>(r.u32("height"));
  int w = static_cast<int>(r.u32("width"));
  if (h <= 0 || w <= 0) throw IoError(path + ": nonpositive raster dims");
  DepthRaster out;
  out.depth = TensorF::zeros({h, w});
  out.mask = Mask::zeros({h, w});
  for (int i = 0; i < h * w; ++i) {
    float v = r.f32("pixel data");
    size_t ii = static_cast<size_t>(i);
    out.depth.data[ii] = v;
    out.mask.data[ii] = (v != 0.0f) ? 1 : 0;
  }
  out.validate();
  return out;
}

void write_fckp(const std::string& path, const std::map<std::string, TensorF>& tensors) {
  std::string out = "FCKP";
  put_u32(out, kFckpVersion);
  put_u32(out, static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (name.size() > 0xffff) throw IoError("tensor name too long: " + name);
    put_u16(out, static_cast<uint16_t>(name.size()));
    out += name;
    out.push_back(static_cast<char>(t.ndim()));
    for (int d : t.shape) put_u32(out, static_cast<uint32_t>(d));
    for (float v : t.data) put_f32(out, v);
  }
  spit(path, out);
}

std::map<std::string, TensorF> read_fckp(const std::string& path) {
  Reader r(slurp(path), path);
  check_magic(r, "FCKP");
  check_version(r, kFckpVersion);
  uint32_t count = r.u32("tensor count");
  std::map<std::string, TensorF> out;
  for (uint32_t i = 0; i < count; ++i) {
    uint16_t nlen = r.u16("name length");
    std::string name = r.raw(nlen, "tensor name");
    int nd = r.u8("ndim");
    std::vector<int> shape;
    int64_t n = 1;
    for (int d = 0; d < nd; ++d) {
      uint32_t dim = r.u32("dim");
      if (dim == 0) throw IoError(path + ": zero dimension in tensor " + name);
      shape.push_back(static_cast<int>(dim));
      n *= dim;
    }
    TensorF t;
    t.shape = shape;
    t.data.resize(static_cast<size_t>(n));
    for (int64_t k = 0; k < n; ++k) t.data[static_cast<size_t>(k)] = r.f32("tensor data");
    out.emplace(std::move(name), std::move(t));
  }
  if (!r.done()) throw IoError(path + ": trailing bytes after last tensor");
  return out;
}

void write_ppm(const std::string& path, const TensorF& image) {
  if (image.ndim() != 3 || image.size(0) != 3) throw DimensionError("write_ppm: expects (3,H,W)");
  int h = image.size(1), w = image.size(2);
  std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        float v = std::clamp(image.at(c, y, x), 0.0f, 1.0f);
        out.push_back(static_cast<char>(std::lround(v * 255.0f)));
      }
  spit(path, out);
}

TensorF read_ppm(const std::string& path) {
  std::string bytes = slurp(path);
  if (bytes.size() < 2 || bytes.compare(0, 2, "P6") != 0)
    throw BadMagicError(path + ": not a P6 PPM");
  size_t pos = 2;
  auto next_int = [&]() {
    while (pos < bytes.size() &&
           (std::isspace(static_cast<unsigned char>(bytes[pos])) || bytes[pos] == '#')) {
      if (bytes[pos] == '#')
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      else
        ++pos;
    }
    size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw IoError(path + ": malformed PPM header");
    return std::stoi(bytes.substr(start, pos - start));
  };
  int w = next_int(), h = next_int(), maxv = next_int();
  if (maxv != 255) throw IoError(path + ": only maxval 255 supported");
  ++pos;  // single whitespace after maxval
  size_t need = static_cast<size_t>(3) * static_cast<size_t>(w) * static_cast<size_t>(h);
  if (bytes.size() - pos < need)
    throw TruncationError(path + ": truncated PPM payload, expected " + std::to_string(pos + need) +
                          " bytes, file has " + std::to_string(bytes.size()));
  TensorF img = TensorF::zeros({3, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(c, y, x) = static_cast<float>(static_cast<uint8_t>(bytes[pos++])) / 255.0f;
  return img;
}

}  // namespace sdepth
