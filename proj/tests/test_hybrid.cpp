#include <cmath>
#include <vector>

#include "doctest.h"
#include "sdepth/hybrid.hpp"

using namespace sdepth;

namespace {

HybridConfig tiny_hc() {
  HybridConfig hc;
  hc.s_cfg.patch = 14;
  hc.s_cfg.embed_dim = 16;
  hc.s_cfg.depth_layers = 4;
  hc.s_cfg.taps = {1, 2, 3, 4};
  hc.s_cfg.dec_channels = 8;
  hc.s_cfg.heads = 2;
  hc.s_cfg.variant = 'S';
  hc.l_cfg = hc.s_cfg;
  hc.l_cfg.embed_dim = 24;
  hc.l_cfg.variant = 'L';
  hc.s_temporal.blocks = 2;
  hc.s_temporal.state_dim = 4;
  hc.s_temporal.conv_kernel = 3;
  hc.l_temporal = hc.s_temporal;
  hc.fuse_blocks = 2;
  hc.fuse_heads = 2;
  hc.base_short_side = 28;
  return hc;
}

TensorF randn_f(std::vector<int> shape, Rng& rng, double std = 1.0) {
  TensorF t = TensorF::zeros(shape);
  for (auto& v : t.data) v = static_cast<float>(rng.normal() * std);
  return t;
}

TensorF rand_image(int h, int w, uint64_t seed) {
  Rng rng(seed);
  TensorF img = TensorF::zeros({3, h, w});
  for (auto& v : img.data) v = static_cast<float>(rng.uniform());
  return img;
}

void randomize_store(ParamStore& ps, uint64_t seed, double std = 0.1) {
  Rng rng(seed);
  for (auto& [name, t] : ps.tensors)
    for (auto& v : t.data) v += static_cast<float>(rng.normal() * std);
}

// ---- independent straight-line fusion oracle (double precision) ------------

using Vec = std::vector<double>;

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

Vec or_fuse(const Vec& q0, const Vec& kv0, int m, int n, int d, const HybridConfig& hc,
            const ParamStore& ps) {
  Vec x = q0, kv = kv0;
  for (int i = 0; i < hc.fuse_blocks; ++i) {
    std::string bp = "block" + std::to_string(i) + ".";
    Vec qn = or_layer_norm(x, m, d, ps.at(bp + "ln_q.gamma"), ps.at(bp + "ln_q.beta"));
    Vec kn = or_layer_norm(kv, n, d, ps.at(bp + "ln_kv.gamma"), ps.at(bp + "ln_kv.beta"));
    Vec qq = or_linear(qn, m, d, ps.at(bp + "q_w"), ps.at(bp + "q_b"));
    Vec kk = or_linear(kn, n, d, ps.at(bp + "k_w"), ps.at(bp + "k_b"));
    Vec vv = or_linear(kn, n, d, ps.at(bp + "v_w"), ps.at(bp + "v_b"));
    Vec att = or_attention(qq, kk, vv, m, n, d, hc.fuse_heads);
    Vec ap = or_linear(att, m, d, ps.at(bp + "proj_w"), ps.at(bp + "proj_b"));
    for (size_t j = 0; j < x.size(); ++j) x[j] += ap[j];
    Vec n2 = or_layer_norm(x, m, d, ps.at(bp + "ln2.gamma"), ps.at(bp + "ln2.beta"));
    Vec f1 = or_linear(n2, m, d, ps.at(bp + "mlp.fc1_w"), ps.at(bp + "mlp.fc1_b"));
    for (auto& vvv : f1) vvv = 0.5 * vvv * (1.0 + std::erf(vvv / std::sqrt(2.0)));
    Vec f2 = or_linear(f1, m, 2 * d, ps.at(bp + "mlp.fc2_w"), ps.at(bp + "mlp.fc2_b"));
    for (size_t j = 0; j < x.size(); ++j) x[j] += f2[j];
  }
  Vec proj = or_linear(x, m, d, ps.at("out_w"), ps.at("out_b"));
  for (size_t j = 0; j < proj.size(); ++j) proj[j] += q0[j];
  return proj;
}

}  // namespace

TEST_CASE("cross_attention_fuse at initialization returns F_S1 bitwise") {
  HybridConfig hc = tiny_hc();
  ParamStore fusion;
  Rng rng(1);
  init_fusion_params(fusion, "", hc.s_cfg.dec_channels, hc.s_cfg.dec_channels, hc.fuse_blocks,
                     rng);
  GraphF g(false);
  Binder bf(g, fusion, false);
  Rng rf(2);
  TensorF fs = randn_f({8, 4, 4}, rf), fl = randn_f({8, 2, 2}, rf);
  int fused = cross_attention_fuse(bf, hc, g.leaf(fs), g.leaf(fl));
  CHECK(g.val(fused).data == fs.data);
}

TEST_CASE("cross_attention_fuse single key: constant queries stay constant") {
  HybridConfig hc = tiny_hc();
  ParamStore fusion;
  Rng rng(3);
  init_fusion_params(fusion, "", 8, 8, hc.fuse_blocks, rng);
  randomize_store(fusion, 4);
  GraphF g(false);
  Binder bf(g, fusion, false);
  TensorF fs = TensorF::zeros({8, 3, 3});
  Rng rc(5);
  for (int c = 0; c < 8; ++c) {
    float v = static_cast<float>(rc.normal());
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 3; ++x) fs.at(c, y, x) = v;
  }
  TensorF fl = randn_f({8, 1, 1}, rc);
  int fused = cross_attention_fuse(bf, hc, g.leaf(fs), g.leaf(fl));
  const TensorF& out = g.val(fused);
  for (int c = 0; c < 8; ++c)
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 3; ++x) CHECK(out.at(c, y, x) == out.at(c, 0, 0));
  // ... and the single key changes the output away from the identity.
  bool moved = false;
  for (int c = 0; c < 8; ++c)
    if (out.at(c, 0, 0) != fs.at(c, 0, 0)) moved = true;
  CHECK(moved);
}

TEST_CASE("cross_attention_fuse matches a straight-line two-block oracle") {
  HybridConfig hc = tiny_hc();
  int d = 8, m = 16, n = 4;
  ParamStore fusion;
  Rng rng(6);
  init_fusion_params(fusion, "", d, d, hc.fuse_blocks, rng);
  randomize_store(fusion, 7);
  Rng rf(8);
  TensorF fs = randn_f({d, 4, 4}, rf), fl = randn_f({d, 2, 2}, rf);

  GraphF g(false);
  Binder bf(g, fusion, false);
  int fused = cross_attention_fuse(bf, hc, g.leaf(fs), g.leaf(fl));

  // Tokens are the channel vectors in row-major spatial order.
  Vec q0(static_cast<size_t>(m) * d), kv0(static_cast<size_t>(n) * d);
  for (int i = 0; i < m; ++i)
    for (int c = 0; c < d; ++c) q0[static_cast<size_t>(i) * d + c] = fs.data[static_cast<size_t>(c) * m + i];
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c) kv0[static_cast<size_t>(i) * d + c] = fl.data[static_cast<size_t>(c) * n + i];
  Vec want = or_fuse(q0, kv0, m, n, d, hc, fusion);

  const TensorF& out = g.val(fused);
  for (int i = 0; i < m; ++i)
    for (int c = 0; c < d; ++c)
      CHECK(out.data[static_cast<size_t>(c) * m + i] ==
            doctest::Approx(want[static_cast<size_t>(i) * d + c]).epsilon(1e-6));
}

TEST_CASE("cross_attention_fuse projects mismatched L channels") {
  HybridConfig hc = tiny_hc();
  hc.l_cfg.dec_channels = 12;
  ParamStore fusion;
  Rng rng(9);
  init_fusion_params(fusion, "", 8, 12, hc.fuse_blocks, rng);
  CHECK(fusion.has("kv_proj_w"));
  GraphF g(false);
  Binder bf(g, fusion, false);
  Rng rf(10);
  TensorF fs = randn_f({8, 4, 4}, rf), fl = randn_f({12, 2, 2}, rf);
  int fused = cross_attention_fuse(bf, hc, g.leaf(fs), g.leaf(fl));
  CHECK(g.val(fused).shape == fs.shape);
  CHECK(g.val(fused).data == fs.data);  // output projection still zero
}

TEST_CASE("hybrid at initialization equals the plain S backbone bitwise") {
  HybridConfig hc = tiny_hc();
  ModelWeights w = init_full_model(11, hc);
  TensorF frame = rand_image(56, 56, 12);

  auto [gh, gw] = state_grid(hc.s_cfg, hc.s_temporal, 56, 56);
  RecurrentState state = init_state(hc.s_temporal, gh, gw, hc.s_cfg.dec_channels);
  TensorF hybrid = hybrid_forward(w, frame, state);

  GraphF g(false);
  Binder b(g, w.s, false);
  int plain = backbone_forward(b, hc.s_cfg, g.leaf(frame), "backbone.");
  CHECK(hybrid.data == g.val(plain).data);
}

TEST_CASE("hybrid_forward shape and determinism") {
  HybridConfig hc = tiny_hc();
  ModelWeights w = init_full_model(13, hc);
  randomize_store(w.fusion, 14, 0.05);  // past the zero-init special case
  TensorF frame = rand_image(56, 84, 15);

  auto [gh, gw] = state_grid(hc.s_cfg, hc.s_temporal, 56, 84);
  RecurrentState s1 = init_state(hc.s_temporal, gh, gw, hc.s_cfg.dec_channels);
  RecurrentState s2 = init_state(hc.s_temporal, gh, gw, hc.s_cfg.dec_channels);
  TensorF d1 = hybrid_forward(w, frame, s1);
  TensorF d2 = hybrid_forward(w, frame, s2);
  CHECK(d1.shape == std::vector<int>{56, 84});
  CHECK(d1.data == d2.data);
  for (size_t i = 0; i < s1.blocks.size(); ++i)
    CHECK(s1.blocks[i].h.data == s2.blocks[i].h.data);
}

TEST_CASE("hybrid_forward is bitwise identical with one and two workers") {
  HybridConfig hc = tiny_hc();
  ModelWeights w = init_full_model(16, hc);
  randomize_store(w.fusion, 17, 0.05);
  auto [gh, gw] = state_grid(hc.s_cfg, hc.s_temporal, 56, 56);
  RecurrentState s1 = init_state(hc.s_temporal, gh, gw, hc.s_cfg.dec_channels);
  RecurrentState s2 = init_state(hc.s_temporal, gh, gw, hc.s_cfg.dec_channels);
  for (int t = 0; t < 3; ++t) {
    TensorF frame = rand_image(56, 56, 18 + static_cast<uint64_t>(t));
    TensorF d1 = hybrid_forward(w, frame, s1, 1);
    TensorF d2 = hybrid_forward(w, frame, s2, 2);
    CHECK(d1.data == d2.data);
  }
}

TEST_CASE("perturbing L features: inert at zero fusion, live with real weights") {
  HybridConfig hc = tiny_hc();
  ModelWeights w = init_full_model(19, hc);
  TensorF frame = rand_image(56, 56, 20);
  TensorF l_r1 = l_stream_layer1(w, frame);
  TensorF l_r1_pert = l_r1;
  for (auto& v : l_r1_pert.data) v += 3.0f;

  auto run = [&](const TensorF& lr) {
    GraphF g(false);
    Binder bs(g, w.s, false), bf(g, w.fusion, false);
    auto [sgh, sgw] = state_grid(hc.s_cfg, hc.s_temporal, 56, 56);
    RecurrentState st = init_state(hc.s_temporal, sgh, sgw, hc.s_cfg.dec_channels);
    auto [depth, sv] = hybrid_s_forward(bs, bf, hc, g.leaf(frame), lr, bind_state(g, st));
    (void)sv;
    return g.val(depth);
  };

  CHECK(run(l_r1).data == run(l_r1_pert).data);  // zero-init fusion: exact
  randomize_store(w.fusion, 21, 0.05);
  CHECK(run(l_r1).data != run(l_r1_pert).data);  // live fusion: sensitive
}

TEST_CASE("the L stream is a pure function of the frame") {
  HybridConfig hc = tiny_hc();
  ModelWeights w = init_full_model(22, hc);
  TensorF f0 = rand_image(56, 56, 23), f1 = rand_image(56, 56, 24);
  TensorF a0 = l_stream_layer1(w, f0);
  TensorF b1 = l_stream_layer1(w, f1);  // different frame in between
  TensorF a0_again = l_stream_layer1(w, f0);
  CHECK(a0.data == a0_again.data);
  CHECK(a0.data != b1.data);
}

TEST_CASE("l_stream_resolution contract") {
  HybridConfig hc = tiny_hc();
  auto [lh, lw] = l_stream_resolution(hc, 56, 84);
  CHECK(lh == 28);
  CHECK(lw == 42);
  CHECK_THROWS_WITH_AS(l_stream_resolution(hc, 14, 56), doctest::Contains("fallback"),
                       DimensionError);
  CHECK_THROWS_AS(l_stream_resolution(hc, 42, 70), DimensionError);   // non-integral scale
  CHECK_THROWS_AS(l_stream_resolution(hc, 56, 70), DimensionError);   // 35 not patch-divisible
}
