#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sdepth/config.hpp"
#include "sdepth/params.hpp"

namespace sdepth {

// The only cross-frame memory: per-block SSM hidden state plus the causal
// conv ring buffer. Exclusively owned by one session.
struct RecurrentState {
  struct Block {
    TensorF h;         // (D, N)
    TensorF conv_buf;  // (K-1, D), last inputs seen by the causal conv
  };
  std::vector<Block> blocks;
  int gh = 0, gw = 0;  // token grid of Down(F); sessions are fixed-resolution
};

RecurrentState init_state(const TemporalConfig& cfg, int gh, int gw, int dim);

// Graph-side handles so state can be chained through a clip (BPTT) or bound
// fresh per frame when streaming.
struct StateVars {
  std::vector<std::pair<int, int>> blocks;  // (h, conv_buf) var ids
  int gh = 0, gw = 0;
};

StateVars bind_state(GraphF& g, const RecurrentState& s);
RecurrentState extract_state(const GraphF& g, const StateVars& sv);

// Pre-norm residual block: x + gated-SSM(LN(x)) then + MLP(LN(.)).
// tokens (T,D); returns {tokens', (h', conv_buf')}.
std::pair<int, std::pair<int, int>> mamba_block(Binder& b, const TemporalConfig& cfg, int tokens,
                                                std::pair<int, int> state,
                                                const std::string& prefix);

// F_align = F + Up(UnFlatten(MambaStack(Flatten(Down(F)), state))).
// The stack output projection is zero-initialized, so a fresh model is the
// identity here. f (C,fh,fw).
std::pair<int, StateVars> align_features(Binder& b, const TemporalConfig& cfg, int f, int fh,
                                         int fw, const StateVars& state,
                                         const std::string& prefix);

}  // namespace sdepth
