#include "sdepth/backbone.hpp"

#include <algorithm>

namespace sdepth {

namespace {

// tokens (S,C) -> image (C,gh,gw)
int tokens_to_map(GraphF& g, int tokens, int c, int gh, int gw) {
  return g.reshape(g.transpose(tokens), {c, gh, gw});
}

// image (C,h,w) -> tokens (h*w,C)
int map_to_tokens(GraphF& g, int map, int c, int h, int w) {
  return g.transpose(g.reshape(map, {c, h * w}));
}

int mlp(Binder& b, int x, const std::string& p) {
  GraphF& g = b.graph();
  return g.linear(g.gelu(g.linear(x, b(p + "fc1_w"), b(p + "fc1_b"))), b(p + "fc2_w"),
                  b(p + "fc2_b"));
}

// 3x3 same-size conv with edge-replicated borders, so spatially constant
// inputs stay constant through the decoder.
int conv3(Binder& b, int x, const std::string& w, const std::string& bias) {
  GraphF& g = b.graph();
  return g.conv2d(g.replicate_pad(x, 1), b(w), b(bias), 1, 0);
}

int rcu(Binder& b, int x, const std::string& p) {
  GraphF& g = b.graph();
  int h = conv3(b, g.gelu(x), p + "rcu1_w", p + "rcu1_b");
  h = conv3(b, g.gelu(h), p + "rcu2_w", p + "rcu2_b");
  return g.add(x, h);
}

int reassemble(Binder& b, const ModelConfig& cfg, int tokens, int gh, int gw, int th, int tw,
               const std::string& p) {
  GraphF& g = b.graph();
  int proj = g.linear(tokens, b(p + "proj_w"), b(p + "proj_b"));
  int map = tokens_to_map(g, proj, cfg.dec_channels, gh, gw);
  if (th != gh || tw != gw) map = g.bilinear_resize(map, th, tw);
  return conv3(b, map, p + "conv_w", p + "conv_b");
}

}  // namespace

int patchify(Binder& b, const ModelConfig& cfg, int image, const std::string& prefix) {
  GraphF& g = b.graph();
  const TensorF& img = g.val(image);
  if (img.ndim() != 3 || img.size(0) != 3) throw DimensionError("patchify: expects (3,H,W)");
  int gh = 0, gw = 0;
  if (img.size(1) % cfg.patch != 0 || img.size(2) % cfg.patch != 0)
    throw DimensionError("patchify: image " + img.shape_str() + " not divisible by patch " +
                         std::to_string(cfg.patch));
  gh = img.size(1) / cfg.patch;
  gw = img.size(2) / cfg.patch;

  int flat = g.patch_gather(image, cfg.patch);
  int tokens = g.linear(flat, b(prefix + "patch_embed.w"), b(prefix + "patch_embed.b"));

  int pos = b(prefix + "pos_embed");
  if (gh != cfg.pos_grid || gw != cfg.pos_grid) {
    int pm = tokens_to_map(g, pos, cfg.embed_dim, cfg.pos_grid, cfg.pos_grid);
    pos = map_to_tokens(g, g.bilinear_resize(pm, gh, gw), cfg.embed_dim, gh, gw);
  }
  return g.add(tokens, pos);
}

TappedFeatures vit_encode(Binder& b, const ModelConfig& cfg, int tokens, int gh, int gw,
                          const std::string& prefix) {
  GraphF& g = b.graph();
  if (g.val(tokens).size(0) != gh * gw)
    throw DimensionError("vit_encode: token count does not match grid");
  int E = cfg.embed_dim;
  TappedFeatures out;
  out.gh = gh;
  out.gw = gw;
  int x = tokens;
  int next_tap = 0;
  for (int l = 0; l < cfg.depth_layers; ++l) {
    std::string lp = prefix + "layer" + std::to_string(l) + ".";
    int h = g.layer_norm(x, b(lp + "ln1.gamma"), b(lp + "ln1.beta"));
    int qkv = g.linear(h, b(lp + "attn.qkv_w"), b(lp + "attn.qkv_b"));
    int q = g.slice_cols(qkv, 0, E);
    int k = g.slice_cols(qkv, E, 2 * E);
    int v = g.slice_cols(qkv, 2 * E, 3 * E);
    int a = g.attention(q, k, v, cfg.heads);
    x = g.add(x, g.linear(a, b(lp + "attn.proj_w"), b(lp + "attn.proj_b")));
    int h2 = g.layer_norm(x, b(lp + "ln2.gamma"), b(lp + "ln2.beta"));
    x = g.add(x, mlp(b, h2, lp + "mlp."));
    if (next_tap < 4 && cfg.taps[static_cast<size_t>(next_tap)] == l + 1)
      out.taps[static_cast<size_t>(next_tap++)] = x;
  }
  if (next_tap != 4) throw DimensionError("vit_encode: taps out of range");
  return out;
}

int dpt_decode_layer1(Binder& b, const ModelConfig& cfg, const TappedFeatures& t,
                      const std::string& prefix) {
  GraphF& g = b.graph();
  int gh = t.gh, gw = t.gw;
  // Reassembly scales {2,1,1/2,1/4}x of the token grid for taps 0..3.
  std::array<std::pair<int, int>, 4> sizes = {
      std::pair<int, int>{2 * gh, 2 * gw},
      {gh, gw},
      {std::max(1, gh / 2), std::max(1, gw / 2)},
      {std::max(1, gh / 4), std::max(1, gw / 4)}};
  std::array<int, 4> proj{};
  for (int i = 0; i < 4; ++i)
    proj[static_cast<size_t>(i)] =
        reassemble(b, cfg, t.taps[static_cast<size_t>(i)], gh, gw, sizes[static_cast<size_t>(i)].first,
                   sizes[static_cast<size_t>(i)].second, prefix + "dpt.reasm" + std::to_string(i) + ".");

  int r = rcu(b, proj[3], prefix + "dpt.fuse3.");
  for (int i = 2; i >= 0; --i) {
    int up = g.bilinear_resize(r, sizes[static_cast<size_t>(i)].first, sizes[static_cast<size_t>(i)].second);
    r = rcu(b, g.add(proj[static_cast<size_t>(i)], up), prefix + "dpt.fuse" + std::to_string(i) + ".");
  }
  return r;  // (C, 2gh, 2gw)
}

int dpt_finish(Binder& b, const ModelConfig&, int r1, int gh, int gw, const std::string& prefix) {
  GraphF& g = b.graph();
  int up = g.bilinear_resize(r1, 4 * gh, 4 * gw);
  return conv3(b, up, prefix + "dpt.out_w", prefix + "dpt.out_b");
}

std::pair<int, int> dpt_decode(Binder& b, const ModelConfig& cfg, const TappedFeatures& t,
                               const std::string& prefix) {
  int r1 = dpt_decode_layer1(b, cfg, t, prefix);
  int f = dpt_finish(b, cfg, r1, t.gh, t.gw, prefix);
  return {f, r1};
}

int depth_head(Binder& b, const ModelConfig& cfg, int f_align, int out_h, int out_w,
               const std::string& prefix) {
  GraphF& g = b.graph();
  (void)cfg;
  int x = conv3(b, f_align, prefix + "head.conv1_w", prefix + "head.conv1_b");
  x = g.bilinear_resize(x, out_h, out_w);
  x = conv3(b, x, prefix + "head.conv2_w", prefix + "head.conv2_b");
  x = g.gelu(x);
  x = g.conv2d(x, b(prefix + "head.conv3_w"), b(prefix + "head.conv3_b"), 1, 0);
  x = g.softplus(x);
  return g.reshape(x, {out_h, out_w});
}

int backbone_forward(Binder& b, const ModelConfig& cfg, int image, const std::string& prefix) {
  GraphF& g = b.graph();
  // Copy the sizes: growing the graph below may reallocate node storage.
  int h = g.val(image).size(1), w = g.val(image).size(2);
  int tokens = patchify(b, cfg, image, prefix);
  TappedFeatures t = vit_encode(b, cfg, tokens, h / cfg.patch, w / cfg.patch, prefix);
  auto [f, r1] = dpt_decode(b, cfg, t, prefix);
  (void)r1;
  return depth_head(b, cfg, f, h, w, prefix);
}

}  // namespace sdepth
