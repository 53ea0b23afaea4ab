#include "sdepth/params.hpp"

#include <cmath>

namespace sdepth {

namespace {

TensorF randn(std::vector<int> shape, double std, Rng& rng) {
  TensorF t = TensorF::zeros(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.normal(0.0, std));
  return t;
}

// He-style fan-in scaling for conv kernels (Co,Ci,k,k).
TensorF conv_init(int co, int ci, int k, Rng& rng) {
  double std = std::sqrt(2.0 / (static_cast<double>(ci) * k * k));
  return randn({co, ci, k, k}, std, rng);
}

double softplus_inv(double y) { return std::log(std::expm1(y)); }

}  // namespace

void init_backbone_params(ParamStore& ps, const std::string& prefix, const ModelConfig& cfg,
                          Rng& rng) {
  cfg.validate();
  int E = cfg.embed_dim, C = cfg.dec_channels, p = cfg.patch;

  ps.add(prefix + "patch_embed.w", randn({E, 3 * p * p}, 0.02, rng));
  ps.add(prefix + "patch_embed.b", TensorF::zeros({E}));
  ps.add(prefix + "pos_embed", randn({cfg.pos_grid * cfg.pos_grid, E}, 0.02, rng));

  for (int l = 0; l < cfg.depth_layers; ++l) {
    std::string lp = prefix + "layer" + std::to_string(l) + ".";
    ps.add(lp + "ln1.gamma", TensorF::full({E}, 1.0f));
    ps.add(lp + "ln1.beta", TensorF::zeros({E}));
    ps.add(lp + "attn.qkv_w", randn({3 * E, E}, 0.02, rng));
    ps.add(lp + "attn.qkv_b", TensorF::zeros({3 * E}));
    ps.add(lp + "attn.proj_w", randn({E, E}, 0.02, rng));
    ps.add(lp + "attn.proj_b", TensorF::zeros({E}));
    ps.add(lp + "ln2.gamma", TensorF::full({E}, 1.0f));
    ps.add(lp + "ln2.beta", TensorF::zeros({E}));
    ps.add(lp + "mlp.fc1_w", randn({4 * E, E}, 0.02, rng));
    ps.add(lp + "mlp.fc1_b", TensorF::zeros({4 * E}));
    ps.add(lp + "mlp.fc2_w", randn({E, 4 * E}, 0.02, rng));
    ps.add(lp + "mlp.fc2_b", TensorF::zeros({E}));
  }

  // DPT-style reassembly: token projection to decoder channels, bilinear
  // rescale to {2,1,1/2,1/4}x grid, then a learned 3x3 conv.
  for (int t = 0; t < 4; ++t) {
    std::string tp = prefix + "dpt.reasm" + std::to_string(t) + ".";
    ps.add(tp + "proj_w", randn({C, E}, 0.02, rng));
    ps.add(tp + "proj_b", TensorF::zeros({C}));
    ps.add(tp + "conv_w", conv_init(C, C, 3, rng));
    ps.add(tp + "conv_b", TensorF::zeros({C}));
  }
  // Residual convolutional unit per fusion stage.
  for (int s = 0; s < 4; ++s) {
    std::string sp = prefix + "dpt.fuse" + std::to_string(s) + ".";
    ps.add(sp + "rcu1_w", conv_init(C, C, 3, rng));
    ps.add(sp + "rcu1_b", TensorF::zeros({C}));
    ps.add(sp + "rcu2_w", conv_init(C, C, 3, rng));
    ps.add(sp + "rcu2_b", TensorF::zeros({C}));
  }
  ps.add(prefix + "dpt.out_w", conv_init(C, C, 3, rng));
  ps.add(prefix + "dpt.out_b", TensorF::zeros({C}));

  ps.add(prefix + "head.conv1_w", conv_init(C, C, 3, rng));
  ps.add(prefix + "head.conv1_b", TensorF::zeros({C}));
  ps.add(prefix + "head.conv2_w", conv_init(C, C, 3, rng));
  ps.add(prefix + "head.conv2_b", TensorF::zeros({C}));
  ps.add(prefix + "head.conv3_w", conv_init(1, C, 1, rng));
  // Bias so softplus starts in the middle of the synthetic depth range.
  ps.add(prefix + "head.conv3_b", TensorF::full({1}, 5.0f));
}

void init_temporal_params(ParamStore& ps, const std::string& prefix, const TemporalConfig& cfg,
                          int dim, Rng& rng) {
  cfg.validate();
  int D = dim, N = cfg.state_dim, K = cfg.conv_kernel;
  for (int b = 0; b < cfg.blocks; ++b) {
    std::string bp = prefix + "block" + std::to_string(b) + ".";
    ps.add(bp + "ln1.gamma", TensorF::full({D}, 1.0f));
    ps.add(bp + "ln1.beta", TensorF::zeros({D}));
    ps.add(bp + "in_proj_w", randn({2 * D, D}, 0.02, rng));
    ps.add(bp + "conv_w", randn({D, K}, std::sqrt(1.0 / K), rng));
    ps.add(bp + "conv_b", TensorF::zeros({D}));
    ps.add(bp + "delta_w", randn({D, D}, 0.02, rng));
    TensorF db = TensorF::zeros({D});
    for (int d = 0; d < D; ++d)
      db[d] = static_cast<float>(softplus_inv(rng.uniform(0.001, 0.1)));
    ps.add(bp + "delta_b", std::move(db));
    ps.add(bp + "b_w", randn({N, D}, 0.02, rng));
    ps.add(bp + "c_w", randn({N, D}, 0.02, rng));
    // S4D-real style decay init: A = -exp(A_log) = -(n+1).
    TensorF alog = TensorF::zeros({D, N});
    for (int d = 0; d < D; ++d)
      for (int n = 0; n < N; ++n) alog.at(d, n) = static_cast<float>(std::log(n + 1.0));
    ps.add(bp + "a_log", std::move(alog));
    ps.add(bp + "d_skip", TensorF::full({D}, 1.0f));
    ps.add(bp + "out_proj_w", randn({D, D}, 0.02, rng));
    ps.add(bp + "ln2.gamma", TensorF::full({D}, 1.0f));
    ps.add(bp + "ln2.beta", TensorF::zeros({D}));
    ps.add(bp + "mlp.fc1_w", randn({D, D}, 0.02, rng));
    ps.add(bp + "mlp.fc1_b", TensorF::zeros({D}));
    ps.add(bp + "mlp.fc2_w", randn({D, D}, 0.02, rng));
    ps.add(bp + "mlp.fc2_b", TensorF::zeros({D}));
  }
  // Zero-initialized stack output: the aligner is the identity at step 0.
  ps.add(prefix + "out_w", TensorF::zeros({D, D}));
  ps.add(prefix + "out_b", TensorF::zeros({D}));
}

void init_fusion_params(ParamStore& ps, const std::string& prefix, int s_dim, int l_dim,
                        int blocks, Rng& rng) {
  int D = s_dim;
  if (l_dim != s_dim) {
    ps.add(prefix + "kv_proj_w", randn({D, l_dim}, 0.02, rng));
    ps.add(prefix + "kv_proj_b", TensorF::zeros({D}));
  }
  for (int b = 0; b < blocks; ++b) {
    std::string bp = prefix + "block" + std::to_string(b) + ".";
    ps.add(bp + "ln_q.gamma", TensorF::full({D}, 1.0f));
    ps.add(bp + "ln_q.beta", TensorF::zeros({D}));
    ps.add(bp + "ln_kv.gamma", TensorF::full({D}, 1.0f));
    ps.add(bp + "ln_kv.beta", TensorF::zeros({D}));
    ps.add(bp + "q_w", randn({D, D}, 0.02, rng));
    ps.add(bp + "q_b", TensorF::zeros({D}));
    ps.add(bp + "k_w", randn({D, D}, 0.02, rng));
    ps.add(bp + "k_b", TensorF::zeros({D}));
    ps.add(bp + "v_w", randn({D, D}, 0.02, rng));
    ps.add(bp + "v_b", TensorF::zeros({D}));
    ps.add(bp + "proj_w", randn({D, D}, 0.02, rng));
    ps.add(bp + "proj_b", TensorF::zeros({D}));
    ps.add(bp + "ln2.gamma", TensorF::full({D}, 1.0f));
    ps.add(bp + "ln2.beta", TensorF::zeros({D}));
    ps.add(bp + "mlp.fc1_w", randn({2 * D, D}, 0.02, rng));
    ps.add(bp + "mlp.fc1_b", TensorF::zeros({2 * D}));
    ps.add(bp + "mlp.fc2_w", randn({D, 2 * D}, 0.02, rng));
    ps.add(bp + "mlp.fc2_b", TensorF::zeros({D}));
  }
  // Zero-initialized output: F_fused equals F_S at step 0.
  ps.add(prefix + "out_w", TensorF::zeros({D, D}));
  ps.add(prefix + "out_b", TensorF::zeros({D}));
}

}  // namespace sdepth
