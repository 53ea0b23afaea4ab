#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sdepth/errors.hpp"

namespace sdepth {

// Single-image backbone dimensions. Variant L is the heavier low-resolution
// stream, variant S the lightweight high-resolution stream.
struct ModelConfig {
  int patch = 14;
  int embed_dim = 128;
  int depth_layers = 8;
  std::array<int, 4> taps{2, 4, 6, 8};  // 1-indexed encoder layers
  int dec_channels = 32;
  int heads = 4;
  int pos_grid = 10;  // base grid of the learned positional embedding; resized to fit
  char variant = 'L';

  static ModelConfig large() { return ModelConfig{}; }

  static ModelConfig small() {
    ModelConfig c;
    c.embed_dim = 32;
    c.depth_layers = 4;
    c.taps = {1, 2, 3, 4};
    c.heads = 4;
    c.variant = 'S';
    return c;
  }

  void validate() const {
    if (patch < 1 || embed_dim < 1 || depth_layers < 1 || dec_channels < 1 || heads < 1)
      throw DimensionError("ModelConfig: non-positive dimension");
    if (embed_dim % heads != 0) throw DimensionError("ModelConfig: embed_dim % heads != 0");
    for (int i = 1; i < 4; ++i)
      if (taps[static_cast<size_t>(i)] <= taps[static_cast<size_t>(i - 1)])
        throw DimensionError("ModelConfig: taps must be strictly increasing");
    if (taps[0] < 1 || taps[3] != depth_layers)
      throw DimensionError("ModelConfig: taps[3] must equal depth_layers");
  }
};

struct TemporalConfig {
  int blocks = 4;
  int down_factor = 2;
  int state_dim = 16;
  int conv_kernel = 4;
  bool use_conv = true;  // depthwise causal conv path; ablatable

  void validate() const {
    if (blocks < 1 || down_factor < 1 || state_dim < 1 || conv_kernel < 2)
      throw DimensionError("TemporalConfig: bad value");
  }
};

struct HybridConfig {
  ModelConfig s_cfg = ModelConfig::small();
  ModelConfig l_cfg = ModelConfig::large();
  TemporalConfig s_temporal;
  TemporalConfig l_temporal;
  int fuse_blocks = 2;
  int fuse_heads = 4;
  int base_short_side = 140;  // fallback threshold (toy analog of the 518px rule)
};

struct BoundaryConfig {
  double t_min = 5.0;
  double t_max = 25.0;
  int n_thresholds = 10;
  bool swap_pr = false;  // swap the printed P/R denominators to the conventional ones

  std::vector<double> thresholds() const {
    std::vector<double> t(static_cast<size_t>(n_thresholds));
    for (int i = 0; i < n_thresholds; ++i)
      t[static_cast<size_t>(i)] =
          n_thresholds == 1 ? t_min : t_min + (t_max - t_min) * i / (n_thresholds - 1);
    return t;
  }
};

enum class LossSpace { Depth, InverseDepth };

struct TrainConfig {
  int stage = 1;
  int clip_len = 4;
  std::vector<int> strides{1, 2, 4, 8};
  double lr_temporal = 1e-4;
  double lr_backbone = 1e-6;
  double lr_fusion = 1e-4;
  int steps = 200;
  int batch = 1;
  uint64_t seed = 0;
  int crop = 0;  // training resolution (square crop); 0 = full frame
  LossSpace loss_space = LossSpace::Depth;
};

}  // namespace sdepth
