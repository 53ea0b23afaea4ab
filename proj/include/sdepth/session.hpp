#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sdepth/hybrid.hpp"

namespace sdepth {

enum class SessionMode { SOnly, LOnly, Hybrid };

const char* mode_name(SessionMode m);

// One fixed-resolution stream of frames with exclusively owned recurrent
// state. Changing resolution means opening a new session.
struct Session {
  SessionMode mode = SessionMode::Hybrid;
  int height = 0, width = 0;
  int frame_count = 0;
  const ModelWeights* weights = nullptr;
  RecurrentState state;  // S-stream state in hybrid mode
  int threads = 1;
};

// Picks L-only below base_short_side, hybrid otherwise, unless forced.
Session open_session(const ModelWeights& w, int height, int width,
                     std::optional<SessionMode> forced = std::nullopt, int threads = 1);

TensorF process_frame(Session& s, const TensorF& frame);

struct BenchReport {
  int frames = 0;  // timed frames (warmup excluded)
  double wall_seconds = 0;
  double fps = 0;
  SessionMode mode = SessionMode::Hybrid;
  int height = 0, width = 0;
  std::string to_json() const;
};

// Frames must be preloaded; frame 0 is the untimed warmup.
BenchReport bench(const ModelWeights& w, const std::vector<TensorF>& frames, SessionMode mode,
                  int threads);

}  // namespace sdepth
