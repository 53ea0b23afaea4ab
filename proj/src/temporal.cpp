#include "sdepth/temporal.hpp"

#include <algorithm>

namespace sdepth {

namespace {

// y = x W^T without bias, w stored (out,in)
int matmul_wt(GraphF& g, int x, int w) { return g.matmul(x, g.transpose(w)); }

int mlp(Binder& b, int x, const std::string& p) {
  GraphF& g = b.graph();
  return g.linear(g.gelu(g.linear(x, b(p + "fc1_w"), b(p + "fc1_b"))), b(p + "fc2_w"),
                  b(p + "fc2_b"));
}

}  // namespace

RecurrentState init_state(const TemporalConfig& cfg, int gh, int gw, int dim) {
  cfg.validate();
  RecurrentState s;
  s.gh = gh;
  s.gw = gw;
  s.blocks.resize(static_cast<size_t>(cfg.blocks));
  for (auto& blk : s.blocks) {
    blk.h = TensorF::zeros({dim, cfg.state_dim});
    blk.conv_buf = TensorF::zeros({cfg.conv_kernel - 1, dim});
  }
  return s;
}

StateVars bind_state(GraphF& g, const RecurrentState& s) {
  StateVars sv;
  sv.gh = s.gh;
  sv.gw = s.gw;
  sv.blocks.reserve(s.blocks.size());
  for (const auto& blk : s.blocks)
    sv.blocks.emplace_back(g.leaf(blk.h, false), g.leaf(blk.conv_buf, false));
  return sv;
}

RecurrentState extract_state(const GraphF& g, const StateVars& sv) {
  RecurrentState s;
  s.gh = sv.gh;
  s.gw = sv.gw;
  s.blocks.reserve(sv.blocks.size());
  for (const auto& [h, buf] : sv.blocks)
    s.blocks.push_back(RecurrentState::Block{g.val(h), g.val(buf)});
  return s;
}

std::pair<int, std::pair<int, int>> mamba_block(Binder& b, const TemporalConfig& cfg, int tokens,
                                                std::pair<int, int> state,
                                                const std::string& prefix) {
  GraphF& g = b.graph();
  const TensorF& x = g.val(tokens);
  if (x.ndim() != 2) throw DimensionError("mamba_block: expects (T,D) tokens");
  int T = x.size(0), D = x.size(1);
  auto [h_in, buf_in] = state;
  if (g.val(h_in).size(0) != D || g.val(buf_in).size(1) != D)
    throw StateError("mamba_block: state dim does not match tokens");

  int u = g.layer_norm(tokens, b(prefix + "ln1.gamma"), b(prefix + "ln1.beta"));
  int inp = matmul_wt(g, u, b(prefix + "in_proj_w"));  // (T, 2D)
  int v = g.slice_cols(inp, 0, D);
  int z = g.slice_cols(inp, D, 2 * D);

  int buf_out = buf_in;
  if (cfg.use_conv) {
    int xc = g.concat_rows(buf_in, v);  // (T+K-1, D)
    buf_out = g.slice_rows(xc, T, T + cfg.conv_kernel - 1);
    v = g.causal_conv1d(xc, b(prefix + "conv_w"), b(prefix + "conv_b"));
  }
  v = g.silu(v);

  int delta = g.softplus(g.linear(v, b(prefix + "delta_w"), b(prefix + "delta_b")));
  int bmat = matmul_wt(g, v, b(prefix + "b_w"));  // (T, N)
  int cmat = matmul_wt(g, v, b(prefix + "c_w"));
  int a = g.scale(g.exp(b(prefix + "a_log")), -1.0f);  // strictly negative decay
  auto [y, h_out] = g.ssm_scan(delta, a, bmat, cmat, v, b(prefix + "d_skip"), h_in);

  int gated = g.mul(y, g.silu(z));
  int out = matmul_wt(g, gated, b(prefix + "out_proj_w"));
  int res = g.add(tokens, out);

  int n2 = g.layer_norm(res, b(prefix + "ln2.gamma"), b(prefix + "ln2.beta"));
  res = g.add(res, mlp(b, n2, prefix + "mlp."));
  return {res, {h_out, buf_out}};
}

std::pair<int, StateVars> align_features(Binder& b, const TemporalConfig& cfg, int f, int fh,
                                         int fw, const StateVars& state,
                                         const std::string& prefix) {
  GraphF& g = b.graph();
  const TensorF& fv = g.val(f);
  if (fv.ndim() != 3 || fv.size(1) != fh || fv.size(2) != fw)
    throw DimensionError("align_features: bad feature map shape");
  int c = fv.size(0);
  int dh = std::max(1, fh / cfg.down_factor);
  int dw = std::max(1, fw / cfg.down_factor);
  if (state.gh != dh || state.gw != dw)
    throw StateError("align_features: state grid " + std::to_string(state.gh) + "x" +
                     std::to_string(state.gw) + " does not match features " + std::to_string(dh) +
                     "x" + std::to_string(dw));
  if (static_cast<int>(state.blocks.size()) != cfg.blocks)
    throw StateError("align_features: state block count mismatch");

  int down = (dh == fh && dw == fw) ? f : g.bilinear_resize(f, dh, dw);
  // Flatten: (C,H,W) -> (H*W, C), row-major scan order.
  int tokens = g.transpose(g.reshape(down, {c, dh * dw}));

  StateVars out_state;
  out_state.gh = dh;
  out_state.gw = dw;
  int x = tokens;
  for (int i = 0; i < cfg.blocks; ++i) {
    auto [nx, ns] = mamba_block(b, cfg, x, state.blocks[static_cast<size_t>(i)],
                                prefix + "block" + std::to_string(i) + ".");
    x = nx;
    out_state.blocks.push_back(ns);
  }
  int proj = g.linear(x, b(prefix + "out_w"), b(prefix + "out_b"));  // zero-init at step 0
  int up = g.reshape(g.transpose(proj), {c, dh, dw});
  if (dh != fh || dw != fw) up = g.bilinear_resize(up, fh, fw);
  return {g.add(f, up), out_state};
}

}  // namespace sdepth
