#pragma once

#include <array>
#include <string>
#include <utility>

#include "sdepth/config.hpp"
#include "sdepth/params.hpp"

namespace sdepth {

// Var ids of the four tapped token grids, each (Gh*Gw, embed_dim).
struct TappedFeatures {
  std::array<int, 4> taps{};
  int gh = 0;
  int gw = 0;
};

// image (3,H,W) -> tokens (Gh*Gw, E); learned projection + resized learned
// positional embedding. Throws DimensionError when sides are not divisible
// by the patch size.
int patchify(Binder& b, const ModelConfig& cfg, int image, const std::string& prefix);

TappedFeatures vit_encode(Binder& b, const ModelConfig& cfg, int tokens, int gh, int gw,
                          const std::string& prefix);

// Coarse-to-fine DPT fusion. Returns {F at (C, 4Gh, 4Gw), R1 at (C, 2Gh, 2Gw)}
// where R1 is the finest fusion stage output (the cross-attention fusion target).
std::pair<int, int> dpt_decode(Binder& b, const ModelConfig& cfg, const TappedFeatures& t,
                               const std::string& prefix);

// Split decode around the fusion point, for the hybrid path.
int dpt_decode_layer1(Binder& b, const ModelConfig& cfg, const TappedFeatures& t,
                      const std::string& prefix);
int dpt_finish(Binder& b, const ModelConfig& cfg, int r1, int gh, int gw,
               const std::string& prefix);

// F_align (C,Hf,Wf) -> strictly positive depth (out_h, out_w).
int depth_head(Binder& b, const ModelConfig& cfg, int f_align, int out_h, int out_w,
               const std::string& prefix);

// Full single-image forward without the temporal module: depth (H,W).
int backbone_forward(Binder& b, const ModelConfig& cfg, int image, const std::string& prefix);

}  // namespace sdepth
