#pragma once

#include <functional>
#include <string>
#include <utility>

#include "sdepth/backbone.hpp"
#include "sdepth/config.hpp"
#include "sdepth/temporal.hpp"

namespace sdepth {

// All weights of the artifact. A stream store holds "backbone.*" and
// "temporal.*" names; the fusion store is flat.
struct ModelWeights {
  HybridConfig cfg;
  ParamStore s, l, fusion;
  bool has_s = false, has_l = false, has_fusion = false;
};

// Fresh fully-initialized model (random backbones, zero-init temporal output
// and fusion output projections).
ModelWeights init_full_model(uint64_t seed, const HybridConfig& cfg = HybridConfig{});

// Token grid of the temporal module's downsampled feature map for a stream
// running at (h, w).
std::pair<int, int> state_grid(const ModelConfig& mc, const TemporalConfig& tc, int h, int w);

// Single stream (S-only or L-only): backbone + temporal alignment + head.
// Returns {depth var (h,w), state'}.
std::pair<int, StateVars> stream_forward(Binder& b, const ModelConfig& mc,
                                         const TemporalConfig& tc, int frame,
                                         const StateVars& state);

// Eq-3 fusion: F_fused = F_S1 + ZeroProj(CrossAttnBlocks(Q=F_S1, KV=F_L1)).
// f_s1 (C,sh,sw) and f_l1 (C_l,lh,lw) live in the same graph; output matches
// f_s1's spatial dims.
int cross_attention_fuse(Binder& bf, const HybridConfig& cfg, int f_s1, int f_l1);

// Resolution of the downsampled L-stream input for a high-res frame;
// throws unless the result is integral and patch-divisible.
std::pair<int, int> l_stream_resolution(const HybridConfig& cfg, int h, int w);

// L stream of the hybrid path: resize to base resolution, then backbone up to
// the first fusion stage only (its temporal module is bypassed here).
TensorF l_stream_layer1(const ModelWeights& w, const TensorF& frame_high);

// S stream with fusion; `l_r1` is treated as a constant input (the L stream
// is stateless and frozen in the hybrid path). Returns {depth var, s_state'}.
std::pair<int, StateVars> hybrid_s_forward(Binder& bs, Binder& bf, const HybridConfig& cfg,
                                           int frame, const TensorF& l_r1,
                                           const StateVars& s_state);

// Whole-frame hybrid inference. With threads >= 2 the L stream runs on a
// worker; outputs are bitwise identical to sequential execution.
TensorF hybrid_forward(const ModelWeights& w, const TensorF& frame, RecurrentState& s_state,
                       int threads = 1);

}  // namespace sdepth
