#pragma once

#include <map>
#include <string>
#include <vector>

#include "sdepth/metrics.hpp"
#include "sdepth/params.hpp"
#include "sdepth/tensor.hpp"

namespace sdepth {

// Depth raster file: magic "FDPT", version u32, height u32, width u32,
// then H*W little-endian f32 row-major. 0.0 encodes an invalid pixel.
void write_fdpt(const std::string& path, const DepthRaster& r);
DepthRaster read_fdpt(const std::string& path);

// Checkpoint: magic "FCKP", version u32, tensor count u32, then per tensor
// name length u16, UTF-8 name, ndim u8, dims u32 each, little-endian f32 data.
void write_fckp(const std::string& path, const std::map<std::string, TensorF>& tensors);
std::map<std::string, TensorF> read_fckp(const std::string& path);

// Binary PPM (P6), 8-bit. Tensors are (3,H,W) in [0,1]; values clamp on write.
void write_ppm(const std::string& path, const TensorF& image);
TensorF read_ppm(const std::string& path);

constexpr uint32_t kFdptVersion = 1;
constexpr uint32_t kFckpVersion = 1;

}  // namespace sdepth
