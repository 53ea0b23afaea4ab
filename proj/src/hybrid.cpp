#include "sdepth/hybrid.hpp"

#include <thread>

namespace sdepth {

namespace {

int mlp(Binder& b, int x, const std::string& p) {
  GraphF& g = b.graph();
  return g.linear(g.gelu(g.linear(x, b(p + "fc1_w"), b(p + "fc1_b"))), b(p + "fc2_w"),
                  b(p + "fc2_b"));
}

}  // namespace

ModelWeights init_full_model(uint64_t seed, const HybridConfig& cfg) {
  ModelWeights w;
  w.cfg = cfg;
  Rng rs(Rng::mix(seed, 1));
  init_backbone_params(w.s, "backbone.", cfg.s_cfg, rs);
  init_temporal_params(w.s, "temporal.", cfg.s_temporal, cfg.s_cfg.dec_channels, rs);
  Rng rl(Rng::mix(seed, 2));
  init_backbone_params(w.l, "backbone.", cfg.l_cfg, rl);
  init_temporal_params(w.l, "temporal.", cfg.l_temporal, cfg.l_cfg.dec_channels, rl);
  Rng rf(Rng::mix(seed, 3));
  init_fusion_params(w.fusion, "", cfg.s_cfg.dec_channels, cfg.l_cfg.dec_channels,
                     cfg.fuse_blocks, rf);
  w.has_s = w.has_l = w.has_fusion = true;
  return w;
}

std::pair<int, int> state_grid(const ModelConfig& mc, const TemporalConfig& tc, int h, int w) {
  int fh = 4 * (h / mc.patch), fw = 4 * (w / mc.patch);
  return {std::max(1, fh / tc.down_factor), std::max(1, fw / tc.down_factor)};
}

std::pair<int, StateVars> stream_forward(Binder& b, const ModelConfig& mc,
                                         const TemporalConfig& tc, int frame,
                                         const StateVars& state) {
  GraphF& g = b.graph();
  const TensorF& img = g.val(frame);
  int h = img.size(1), w = img.size(2);
  int tokens = patchify(b, mc, frame, "backbone.");
  TappedFeatures t = vit_encode(b, mc, tokens, h / mc.patch, w / mc.patch, "backbone.");
  auto [f, r1] = dpt_decode(b, mc, t, "backbone.");
  (void)r1;
  auto [fa, st] = align_features(b, tc, f, 4 * t.gh, 4 * t.gw, state, "temporal.");
  int depth = depth_head(b, mc, fa, h, w, "backbone.");
  return {depth, st};
}

int cross_attention_fuse(Binder& bf, const HybridConfig& cfg, int f_s1, int f_l1) {
  GraphF& g = bf.graph();
  const TensorF&fs = g.val(f_s1), &fl = g.val(f_l1);
  if (fs.ndim() != 3 || fl.ndim() != 3) throw DimensionError("cross_attention_fuse: expects maps");
  int c = fs.size(0), sh = fs.size(1), sw = fs.size(2);
  int cl = fl.size(0);
  int m = sh * sw, n = fl.size(1) * fl.size(2);

  int q_tokens = g.transpose(g.reshape(f_s1, {c, m}));
  int kv = g.transpose(g.reshape(f_l1, {cl, n}));
  if (cl != c) kv = g.linear(kv, bf("kv_proj_w"), bf("kv_proj_b"));

  int x = q_tokens;
  for (int i = 0; i < cfg.fuse_blocks; ++i) {
    std::string bp = "block" + std::to_string(i) + ".";
    int qn = g.layer_norm(x, bf(bp + "ln_q.gamma"), bf(bp + "ln_q.beta"));
    int kn = g.layer_norm(kv, bf(bp + "ln_kv.gamma"), bf(bp + "ln_kv.beta"));
    int qv = g.linear(qn, bf(bp + "q_w"), bf(bp + "q_b"));
    int kk = g.linear(kn, bf(bp + "k_w"), bf(bp + "k_b"));
    int vv = g.linear(kn, bf(bp + "v_w"), bf(bp + "v_b"));
    int att = g.attention(qv, kk, vv, cfg.fuse_heads);
    x = g.add(x, g.linear(att, bf(bp + "proj_w"), bf(bp + "proj_b")));
    int n2 = g.layer_norm(x, bf(bp + "ln2.gamma"), bf(bp + "ln2.beta"));
    x = g.add(x, mlp(bf, n2, bp + "mlp."));
  }
  int proj = g.linear(x, bf("out_w"), bf("out_b"));  // zero-init at step 0
  int fused_tokens = g.add(q_tokens, proj);
  return g.reshape(g.transpose(fused_tokens), {c, sh, sw});
}

std::pair<int, int> l_stream_resolution(const HybridConfig& cfg, int h, int w) {
  int short_side = std::min(h, w);
  int base = cfg.base_short_side;
  if (short_side < base)
    throw DimensionError("hybrid: short side below base resolution, use the L-only fallback");
  if ((static_cast<int64_t>(h) * base) % short_side != 0 ||
      (static_cast<int64_t>(w) * base) % short_side != 0)
    throw DimensionError("hybrid: resolution does not scale integrally to base short side");
  int lh = static_cast<int>(static_cast<int64_t>(h) * base / short_side);
  int lw = static_cast<int>(static_cast<int64_t>(w) * base / short_side);
  if (lh % cfg.l_cfg.patch != 0 || lw % cfg.l_cfg.patch != 0)
    throw DimensionError("hybrid: downsampled L resolution " + std::to_string(lh) + "x" +
                         std::to_string(lw) + " not divisible by patch " +
                         std::to_string(cfg.l_cfg.patch));
  return {lh, lw};
}

TensorF l_stream_layer1(const ModelWeights& w, const TensorF& frame_high) {
  auto [lh, lw] = l_stream_resolution(w.cfg, frame_high.size(1), frame_high.size(2));
  GraphF g(false);
  Binder bl(g, w.l, false);
  int frame = g.leaf(frame_high, false);
  if (lh != frame_high.size(1) || lw != frame_high.size(2))
    frame = g.bilinear_resize(frame, lh, lw);
  int tokens = patchify(bl, w.cfg.l_cfg, frame, "backbone.");
  TappedFeatures t = vit_encode(bl, w.cfg.l_cfg, tokens, lh / w.cfg.l_cfg.patch,
                                lw / w.cfg.l_cfg.patch, "backbone.");
  int r1 = dpt_decode_layer1(bl, w.cfg.l_cfg, t, "backbone.");
  return g.val(r1);
}

std::pair<int, StateVars> hybrid_s_forward(Binder& bs, Binder& bf, const HybridConfig& cfg,
                                           int frame, const TensorF& l_r1,
                                           const StateVars& s_state) {
  GraphF& g = bs.graph();
  const TensorF& img = g.val(frame);
  int h = img.size(1), w = img.size(2);
  int tokens = patchify(bs, cfg.s_cfg, frame, "backbone.");
  TappedFeatures t = vit_encode(bs, cfg.s_cfg, tokens, h / cfg.s_cfg.patch, w / cfg.s_cfg.patch,
                                "backbone.");
  int r1_s = dpt_decode_layer1(bs, cfg.s_cfg, t, "backbone.");
  int l_var = g.leaf(l_r1, false);
  int fused = cross_attention_fuse(bf, cfg, r1_s, l_var);
  int f = dpt_finish(bs, cfg.s_cfg, fused, t.gh, t.gw, "backbone.");
  auto [fa, st] = align_features(bs, cfg.s_temporal, f, 4 * t.gh, 4 * t.gw, s_state, "temporal.");
  int depth = depth_head(bs, cfg.s_cfg, fa, h, w, "backbone.");
  return {depth, st};
}

TensorF hybrid_forward(const ModelWeights& w, const TensorF& frame, RecurrentState& s_state,
                       int threads) {
  require_finite(frame, "hybrid_forward");
  TensorF l_r1;
  GraphF g(false);
  Binder bs(g, w.s, false);
  Binder bf(g, w.fusion, false);
  int fvar = g.leaf(frame, false);

  if (threads >= 2) {
    std::thread worker([&] { l_r1 = l_stream_layer1(w, frame); });
    // S stream up to its first fusion stage runs concurrently with L.
    int tokens = patchify(bs, w.cfg.s_cfg, fvar, "backbone.");
    TappedFeatures t = vit_encode(bs, w.cfg.s_cfg, tokens, frame.size(1) / w.cfg.s_cfg.patch,
                                  frame.size(2) / w.cfg.s_cfg.patch, "backbone.");
    int r1_s = dpt_decode_layer1(bs, w.cfg.s_cfg, t, "backbone.");
    worker.join();
    int l_var = g.leaf(l_r1, false);
    int fused = cross_attention_fuse(bf, w.cfg, r1_s, l_var);
    int f = dpt_finish(bs, w.cfg.s_cfg, fused, t.gh, t.gw, "backbone.");
    StateVars sv = bind_state(g, s_state);
    auto [fa, st] = align_features(bs, w.cfg.s_temporal, f, 4 * t.gh, 4 * t.gw, sv, "temporal.");
    int depth = depth_head(bs, w.cfg.s_cfg, fa, frame.size(1), frame.size(2), "backbone.");
    s_state = extract_state(g, st);
    return g.val(depth);
  }

  l_r1 = l_stream_layer1(w, frame);
  StateVars sv = bind_state(g, s_state);
  auto [depth, st] = hybrid_s_forward(bs, bf, w.cfg, fvar, l_r1, sv);
  s_state = extract_state(g, st);
  return g.val(depth);
}

}  // namespace sdepth
