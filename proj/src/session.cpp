#include "sdepth/session.hpp"

#include <chrono>
#include <sstream>

#include "sdepth/errors.hpp"

namespace sdepth {

const char* mode_name(SessionMode m) {
  switch (m) {
    case SessionMode::SOnly: return "s-only";
    case SessionMode::LOnly: return "l-only";
    case SessionMode::Hybrid: return "hybrid";
  }
  return "?";
}

namespace {

void check_divisible(int h, int w, int patch, const char* mode) {
  if (h % patch != 0 || w % patch != 0)
    throw DimensionError(std::string("open_session: ") + mode + " mode needs sides divisible by " +
                         std::to_string(patch) + ", got " + std::to_string(h) + "x" +
                         std::to_string(w));
}

// Single-stream step: S-only or L-only, temporal state carried.
TensorF single_stream_step(const ModelWeights& w, SessionMode mode, const TensorF& frame,
                           RecurrentState& state) {
  const bool is_s = mode == SessionMode::SOnly;
  const ParamStore& store = is_s ? w.s : w.l;
  const ModelConfig& mc = is_s ? w.cfg.s_cfg : w.cfg.l_cfg;
  const TemporalConfig& tc = is_s ? w.cfg.s_temporal : w.cfg.l_temporal;
  GraphF g(false);
  Binder b(g, store, false);
  int fvar = g.leaf(frame, false);
  StateVars sv = bind_state(g, state);
  auto [depth, st] = stream_forward(b, mc, tc, fvar, sv);
  state = extract_state(g, st);
  return g.val(depth);
}

}  // namespace

Session open_session(const ModelWeights& w, int height, int width,
                     std::optional<SessionMode> forced, int threads) {
  if (height < 1 || width < 1) throw DimensionError("open_session: bad resolution");
  Session s;
  s.weights = &w;
  s.height = height;
  s.width = width;
  s.threads = threads;
  int short_side = std::min(height, width);
  s.mode = forced ? *forced
                  : (short_side < w.cfg.base_short_side ? SessionMode::LOnly : SessionMode::Hybrid);

  if (s.mode == SessionMode::LOnly) {
    if (!w.has_l) throw StateError("open_session: L weights missing");
    check_divisible(height, width, w.cfg.l_cfg.patch, "l-only");
    auto [gh, gw] = state_grid(w.cfg.l_cfg, w.cfg.l_temporal, height, width);
    s.state = init_state(w.cfg.l_temporal, gh, gw, w.cfg.l_cfg.dec_channels);
  } else {
    if (!w.has_s) throw StateError("open_session: S weights missing");
    check_divisible(height, width, w.cfg.s_cfg.patch, mode_name(s.mode));
    if (s.mode == SessionMode::Hybrid) {
      if (!w.has_l || !w.has_fusion) throw StateError("open_session: hybrid needs L and fusion");
      l_stream_resolution(w.cfg, height, width);  // validate the downsample up front
    }
    auto [gh, gw] = state_grid(w.cfg.s_cfg, w.cfg.s_temporal, height, width);
    s.state = init_state(w.cfg.s_temporal, gh, gw, w.cfg.s_cfg.dec_channels);
  }
  return s;
}

TensorF process_frame(Session& s, const TensorF& frame) {
  if (frame.ndim() != 3 || frame.size(0) != 3 || frame.size(1) != s.height ||
      frame.size(2) != s.width)
    throw DimensionError("process_frame: frame " + frame.shape_str() +
                         " does not match session resolution " + std::to_string(s.height) + "x" +
                         std::to_string(s.width));
  require_finite(frame, "process_frame");
  TensorF depth;
  if (s.mode == SessionMode::Hybrid)
    depth = hybrid_forward(*s.weights, frame, s.state, s.threads);
  else
    depth = single_stream_step(*s.weights, s.mode, frame, s.state);
  ++s.frame_count;
  return depth;
}

std::string BenchReport::to_json() const {
  std::ostringstream os;
  os.precision(9);
  os << "{\"frames\":" << frames << ",\"wall_seconds\":" << wall_seconds << ",\"fps\":" << fps
     << ",\"mode\":\"" << mode_name(mode) << "\",\"height\":" << height << ",\"width\":" << width
     << "}";
  return os.str();
}

BenchReport bench(const ModelWeights& w, const std::vector<TensorF>& frames, SessionMode mode,
                  int threads) {
  if (frames.empty()) throw DimensionError("bench: empty frame list");
  Session s = open_session(w, frames[0].size(1), frames[0].size(2), mode, threads);
  process_frame(s, frames[0]);  // warmup, untimed
  auto t0 = std::chrono::steady_clock::now();
  for (size_t i = 1; i < frames.size(); ++i) process_frame(s, frames[i]);
  auto t1 = std::chrono::steady_clock::now();
  BenchReport r;
  r.frames = static_cast<int>(frames.size()) - 1;
  r.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
  r.fps = r.frames > 0 ? r.frames / r.wall_seconds : 0.0;
  r.mode = s.mode;
  r.height = s.height;
  r.width = s.width;
  return r;
}

}  // namespace sdepth
