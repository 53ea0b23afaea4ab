#include <cmath>
#include <vector>

#include "doctest.h"
#include "sdepth/backbone.hpp"
#include "sdepth/rng.hpp"

using namespace sdepth;

namespace {

ModelConfig tiny_cfg() {
  ModelConfig c;
  c.patch = 14;
  c.embed_dim = 16;
  c.depth_layers = 4;
  c.taps = {1, 2, 3, 4};
  c.dec_channels = 8;
  c.heads = 2;
  c.variant = 'S';
  return c;
}

TensorF rand_image(int h, int w, uint64_t seed) {
  Rng rng(seed);
  TensorF img = TensorF::zeros({3, h, w});
  for (auto& v : img.data) v = static_cast<float>(rng.uniform());
  return img;
}

void zero_param(ParamStore& ps, const std::string& name) {
  for (auto& v : ps.at(name).data) v = 0.0f;
}

// ---- independent straight-line transformer oracle (double precision) -------

using Vec = std::vector<double>;  // row-major matrices as flat vectors

Vec or_layer_norm(const Vec& x, int rows, int d, const TensorF& gamma, const TensorF& beta) {
  Vec out(x.size());
  for (int r = 0; r < rows; ++r) {
    double mean = 0, var = 0;
    for (int i = 0; i < d; ++i) mean += x[static_cast<size_t>(r) * d + i];
    mean /= d;
    for (int i = 0; i < d; ++i) {
      double c = x[static_cast<size_t>(r) * d + i] - mean;
      var += c * c;
    }
    var /= d;
    double inv = 1.0 / std::sqrt(var + 1e-5);
    for (int i = 0; i < d; ++i)
      out[static_cast<size_t>(r) * d + i] =
          (x[static_cast<size_t>(r) * d + i] - mean) * inv * gamma.data[static_cast<size_t>(i)] +
          beta.data[static_cast<size_t>(i)];
  }
  return out;
}

// y = x W^T + b with W stored (n_out, n_in)
Vec or_linear(const Vec& x, int rows, int n_in, const TensorF& w, const TensorF& b) {
  int n_out = w.size(0);
  Vec out(static_cast<size_t>(rows) * n_out, 0.0);
  for (int r = 0; r < rows; ++r)
    for (int o = 0; o < n_out; ++o) {
      double acc = b.data[static_cast<size_t>(o)];
      for (int i = 0; i < n_in; ++i)
        acc += x[static_cast<size_t>(r) * n_in + i] * w.data[static_cast<size_t>(o) * n_in + i];
      out[static_cast<size_t>(r) * n_out + o] = acc;
    }
  return out;
}

double or_gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

Vec or_attention(const Vec& q, const Vec& k, const Vec& v, int m, int n, int d, int heads) {
  int dh = d / heads;
  double sc = 1.0 / std::sqrt(static_cast<double>(dh));
  Vec out(static_cast<size_t>(m) * d, 0.0);
  for (int h = 0; h < heads; ++h) {
    int ofs = h * dh;
    for (int mi = 0; mi < m; ++mi) {
      Vec e(static_cast<size_t>(n));
      double z = 0;
      for (int ni = 0; ni < n; ++ni) {
        double s = 0;
        for (int di = 0; di < dh; ++di)
          s += q[static_cast<size_t>(mi) * d + ofs + di] * k[static_cast<size_t>(ni) * d + ofs + di];
        e[static_cast<size_t>(ni)] = std::exp(s * sc);
        z += e[static_cast<size_t>(ni)];
      }
      for (int ni = 0; ni < n; ++ni)
        for (int di = 0; di < dh; ++di)
          out[static_cast<size_t>(mi) * d + ofs + di] +=
              e[static_cast<size_t>(ni)] / z * v[static_cast<size_t>(ni) * d + ofs + di];
    }
  }
  return out;
}

// Full encoder replay recording every tap, written independently of vit_encode.
std::vector<Vec> or_encoder(const Vec& tokens0, int s, const ModelConfig& cfg,
                            const ParamStore& ps, const std::string& prefix) {
  int e = cfg.embed_dim;
  Vec x = tokens0;
  std::vector<Vec> taps;
  for (int l = 0; l < cfg.depth_layers; ++l) {
    std::string lp = prefix + "layer" + std::to_string(l) + ".";
    Vec h = or_layer_norm(x, s, e, ps.at(lp + "ln1.gamma"), ps.at(lp + "ln1.beta"));
    Vec qkv = or_linear(h, s, e, ps.at(lp + "attn.qkv_w"), ps.at(lp + "attn.qkv_b"));
    Vec q(static_cast<size_t>(s) * e), k(q.size()), v(q.size());
    for (int r = 0; r < s; ++r)
      for (int i = 0; i < e; ++i) {
        q[static_cast<size_t>(r) * e + i] = qkv[static_cast<size_t>(r) * 3 * e + i];
        k[static_cast<size_t>(r) * e + i] = qkv[static_cast<size_t>(r) * 3 * e + e + i];
        v[static_cast<size_t>(r) * e + i] = qkv[static_cast<size_t>(r) * 3 * e + 2 * e + i];
      }
    Vec a = or_attention(q, k, v, s, s, e, cfg.heads);
    Vec ap = or_linear(a, s, e, ps.at(lp + "attn.proj_w"), ps.at(lp + "attn.proj_b"));
    for (size_t i = 0; i < x.size(); ++i) x[i] += ap[i];
    Vec h2 = or_layer_norm(x, s, e, ps.at(lp + "ln2.gamma"), ps.at(lp + "ln2.beta"));
    Vec f1 = or_linear(h2, s, e, ps.at(lp + "mlp.fc1_w"), ps.at(lp + "mlp.fc1_b"));
    for (auto& vv : f1) vv = or_gelu(vv);
    Vec f2 = or_linear(f1, s, 4 * e, ps.at(lp + "mlp.fc2_w"), ps.at(lp + "mlp.fc2_b"));
    for (size_t i = 0; i < x.size(); ++i) x[i] += f2[i];
    for (int t = 0; t < 4; ++t)
      if (cfg.taps[static_cast<size_t>(t)] == l + 1) taps.push_back(x);
  }
  return taps;
}

}  // namespace

TEST_CASE("patchify token count and grid") {
  ModelConfig cfg = ModelConfig::small();
  ParamStore ps;
  Rng rng(1);
  init_backbone_params(ps, "", cfg, rng);
  GraphF g(false);
  Binder b(g, ps, false);
  int tokens = patchify(b, cfg, g.leaf(rand_image(140, 140, 2)), "");
  CHECK(g.val(tokens).size(0) == 100);
  CHECK(g.val(tokens).size(1) == cfg.embed_dim);
}

TEST_CASE("patchify rejects non-divisible sides") {
  ModelConfig cfg = tiny_cfg();
  ParamStore ps;
  Rng rng(1);
  init_backbone_params(ps, "", cfg, rng);
  GraphF g(false);
  Binder b(g, ps, false);
  CHECK_THROWS_AS(patchify(b, cfg, g.leaf(rand_image(29, 28, 3)), ""), DimensionError);
}

TEST_CASE("patchify of zero image with zero pos embedding replicates the bias") {
  ModelConfig cfg = tiny_cfg();
  ParamStore ps;
  Rng rng(1);
  init_backbone_params(ps, "", cfg, rng);
  zero_param(ps, "pos_embed");
  Rng rb(9);
  for (auto& v : ps.at("patch_embed.b").data) v = static_cast<float>(rb.normal());
  GraphF g(false);
  Binder b(g, ps, false);
  int tokens = patchify(b, cfg, g.leaf(TensorF::zeros({3, 28, 28})), "");
  for (int r = 0; r < 4; ++r)
    for (int i = 0; i < cfg.embed_dim; ++i)
      CHECK(g.val(tokens).at(r, i) == ps.at("patch_embed.b").data[static_cast<size_t>(i)]);
}

TEST_CASE("vit_encode: zeroed residual branches make every tap the input tokens") {
  ModelConfig cfg = tiny_cfg();
  ParamStore ps;
  Rng rng(4);
  init_backbone_params(ps, "", cfg, rng);
  for (int l = 0; l < cfg.depth_layers; ++l) {
    std::string lp = "layer" + std::to_string(l) + ".";
    zero_param(ps, lp + "attn.proj_w");
    zero_param(ps, lp + "attn.proj_b");
    zero_param(ps, lp + "mlp.fc2_w");
    zero_param(ps, lp + "mlp.fc2_b");
  }
  GraphF g(false);
  Binder b(g, ps, false);
  Rng rt(5);
  TensorF tok = TensorF::zeros({4, cfg.embed_dim});
  for (auto& v : tok.data) v = static_cast<float>(rt.normal());
  int tid = g.leaf(tok);
  TappedFeatures t = vit_encode(b, cfg, tid, 2, 2, "");
  for (int i = 0; i < 4; ++i)
    CHECK(g.val(t.taps[static_cast<size_t>(i)]).data == tok.data);
}

TEST_CASE("vit_encode matches an independent replay oracle at every tap") {
  ModelConfig cfg = tiny_cfg();
  cfg.taps = {1, 2, 3, 4};
  ParamStore ps;
  Rng rng(6);
  init_backbone_params(ps, "", cfg, rng);
  Rng rt(7);
  int s = 4;
  TensorF tok = TensorF::zeros({s, cfg.embed_dim});
  for (auto& v : tok.data) v = static_cast<float>(rt.normal());

  GraphF g(false);
  Binder b(g, ps, false);
  TappedFeatures t = vit_encode(b, cfg, g.leaf(tok), 2, 2, "");

  Vec tok_d(tok.data.begin(), tok.data.end());
  auto taps = or_encoder(tok_d, s, cfg, ps, "");
  REQUIRE(taps.size() == 4);
  for (int i = 0; i < 4; ++i) {
    const TensorF& got = g.val(t.taps[static_cast<size_t>(i)]);
    for (size_t j = 0; j < got.data.size(); ++j)
      CHECK(got.data[j] == doctest::Approx(taps[static_cast<size_t>(i)][j]).epsilon(1e-6));
  }
}

TEST_CASE("dpt_decode output shapes: F is 4x grid, R1 is 2x grid") {
  ModelConfig cfg = tiny_cfg();
  ParamStore ps;
  Rng rng(8);
  init_backbone_params(ps, "", cfg, rng);
  GraphF g(false);
  Binder b(g, ps, false);
  int tokens = patchify(b, cfg, g.leaf(rand_image(42, 28, 9)), "");
  TappedFeatures t = vit_encode(b, cfg, tokens, 3, 2, "");
  auto [f, r1] = dpt_decode(b, cfg, t, "");
  CHECK(g.val(f).shape == std::vector<int>{cfg.dec_channels, 12, 8});
  CHECK(g.val(r1).shape == std::vector<int>{cfg.dec_channels, 6, 4});
}

TEST_CASE("dpt_decode with all conv and projection weights zero gives F == 0") {
  ModelConfig cfg = tiny_cfg();
  ParamStore ps;
  Rng rng(10);
  init_backbone_params(ps, "", cfg, rng);
  for (auto& [name, t] : ps.tensors)
    if (name.rfind("dpt.", 0) == 0)
      for (auto& v : t.data) v = 0.0f;
  GraphF g(false);
  Binder b(g, ps, false);
  int tokens = patchify(b, cfg, g.leaf(rand_image(28, 28, 11)), "");
  TappedFeatures t = vit_encode(b, cfg, tokens, 2, 2, "");
  auto [f, r1] = dpt_decode(b, cfg, t, "");
  (void)r1;
  for (float v : g.val(f).data) CHECK(v == 0.0f);
}

TEST_CASE("dpt_decode on constant taps is spatially constant") {
  // All decoder ops (edge-replicated convs, resizes) preserve constants.
  ModelConfig cfg = tiny_cfg();
  ParamStore ps;
  Rng rng(12);
  init_backbone_params(ps, "", cfg, rng);
  GraphF g(false);
  Binder b(g, ps, false);
  TappedFeatures t;
  t.gh = t.gw = 4;
  TensorF tok = TensorF::zeros({16, cfg.embed_dim});
  Rng rv(13);
  for (int i = 0; i < cfg.embed_dim; ++i) {
    float v = static_cast<float>(rv.normal());
    for (int r = 0; r < 16; ++r) tok.at(r, i) = v;
  }
  int tid = g.leaf(tok);
  for (auto& tap : t.taps) tap = tid;
  auto [f, r1] = dpt_decode(b, cfg, t, "");
  (void)r1;
  const TensorF& fv = g.val(f);  // (C, 16, 16)
  for (int c = 0; c < cfg.dec_channels; ++c) {
    float ref = fv.at(c, 0, 0);
    for (int y = 0; y < fv.size(1); ++y)
      for (int x = 0; x < fv.size(2); ++x)
        CHECK(fv.at(c, y, x) == doctest::Approx(ref).epsilon(1e-5));
  }
}

TEST_CASE("depth_head is strictly positive and at the requested resolution") {
  ModelConfig cfg = tiny_cfg();
  ParamStore ps;
  Rng rng(14);
  init_backbone_params(ps, "", cfg, rng);
  GraphF g(false);
  Binder b(g, ps, false);
  Rng rf(15);
  TensorF fmap = TensorF::zeros({cfg.dec_channels, 8, 8});
  for (auto& v : fmap.data) v = static_cast<float>(rf.normal()) * 2.0f;
  int d = depth_head(b, cfg, g.leaf(fmap), 28, 28, "");
  CHECK(g.val(d).shape == std::vector<int>{28, 28});
  for (float v : g.val(d).data) CHECK(v > 0.0f);
}

TEST_CASE("depth_head with zero weights and bias bias_b is constant softplus(bias_b)") {
  ModelConfig cfg = tiny_cfg();
  ParamStore ps;
  Rng rng(16);
  init_backbone_params(ps, "", cfg, rng);
  for (const char* n : {"head.conv1_w", "head.conv1_b", "head.conv2_w", "head.conv2_b",
                        "head.conv3_w"})
    zero_param(ps, n);
  ps.at("head.conv3_b").data[0] = 1.7f;
  GraphF g(false);
  Binder b(g, ps, false);
  int d = depth_head(b, cfg, g.leaf(TensorF::zeros({cfg.dec_channels, 8, 8})), 28, 28, "");
  float expect = std::log1p(std::exp(1.7f));
  for (float v : g.val(d).data) CHECK(v == doctest::Approx(expect));
}

TEST_CASE("full forward is deterministic bitwise") {
  ModelConfig cfg = tiny_cfg();
  ParamStore ps;
  Rng rng(18);
  init_backbone_params(ps, "", cfg, rng);
  TensorF img = rand_image(28, 42, 19);
  GraphF g1(false), g2(false);
  Binder b1(g1, ps, false), b2(g2, ps, false);
  int d1 = backbone_forward(b1, cfg, g1.leaf(img), "");
  int d2 = backbone_forward(b2, cfg, g2.leaf(img), "");
  CHECK(g1.val(d1).data == g2.val(d2).data);
}
