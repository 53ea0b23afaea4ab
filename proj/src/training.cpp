#include "sdepth/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "sdepth/errors.hpp"
#include "sdepth/io.hpp"

namespace fs = std::filesystem;

namespace sdepth {

double l1_loss(const DepthRaster& pred, const DepthRaster& gt) {
  if (pred.depth.shape != gt.depth.shape) throw DimensionError("l1_loss: shape mismatch");
  double acc = 0;
  int64_t n = 0;
  for (int i = 0; i < gt.depth.numel(); ++i) {
    size_t ii = static_cast<size_t>(i);
    if (!pred.mask.data[ii] || !gt.mask.data[ii]) continue;
    acc += std::abs(static_cast<double>(pred.depth.data[ii]) - gt.depth.data[ii]);
    ++n;
  }
  if (n == 0) throw MetricError("l1_loss: empty mask");
  return acc / static_cast<double>(n);
}

// ---- checkpoints -----------------------------------------------------------

namespace {

TensorF encode_model_cfg(const ModelConfig& c) {
  TensorF t = TensorF::zeros({11});
  float* d = t.data.data();
  d[0] = static_cast<float>(c.patch);
  d[1] = static_cast<float>(c.embed_dim);
  d[2] = static_cast<float>(c.depth_layers);
  for (int i = 0; i < 4; ++i) d[3 + i] = static_cast<float>(c.taps[static_cast<size_t>(i)]);
  d[7] = static_cast<float>(c.dec_channels);
  d[8] = static_cast<float>(c.heads);
  d[9] = static_cast<float>(c.pos_grid);
  d[10] = c.variant == 'L' ? 1.0f : 0.0f;
  return t;
}

ModelConfig decode_model_cfg(const TensorF& t) {
  if (t.numel() != 11) throw IoError("checkpoint: bad model config record");
  const float* d = t.data.data();
  ModelConfig c;
  c.patch = static_cast<int>(d[0]);
  c.embed_dim = static_cast<int>(d[1]);
  c.depth_layers = static_cast<int>(d[2]);
  for (int i = 0; i < 4; ++i) c.taps[static_cast<size_t>(i)] = static_cast<int>(d[3 + i]);
  c.dec_channels = static_cast<int>(d[7]);
  c.heads = static_cast<int>(d[8]);
  c.pos_grid = static_cast<int>(d[9]);
  c.variant = d[10] != 0.0f ? 'L' : 'S';
  c.validate();
  return c;
}

TensorF encode_temporal_cfg(const TemporalConfig& c) {
  TensorF t = TensorF::zeros({5});
  float* d = t.data.data();
  d[0] = static_cast<float>(c.blocks);
  d[1] = static_cast<float>(c.down_factor);
  d[2] = static_cast<float>(c.state_dim);
  d[3] = static_cast<float>(c.conv_kernel);
  d[4] = c.use_conv ? 1.0f : 0.0f;
  return t;
}

TemporalConfig decode_temporal_cfg(const TensorF& t) {
  if (t.numel() != 5) throw IoError("checkpoint: bad temporal config record");
  const float* d = t.data.data();
  TemporalConfig c;
  c.blocks = static_cast<int>(d[0]);
  c.down_factor = static_cast<int>(d[1]);
  c.state_dim = static_cast<int>(d[2]);
  c.conv_kernel = static_cast<int>(d[3]);
  c.use_conv = d[4] != 0.0f;
  c.validate();
  return c;
}

void split_prefixed(const std::map<std::string, TensorF>& all, const std::string& prefix,
                    ParamStore& out) {
  for (const auto& [k, v] : all)
    if (k.rfind(prefix, 0) == 0) out.add(k.substr(prefix.size()), v);
}

}  // namespace

StreamModel init_stream_model(char variant, uint64_t seed, const ModelConfig* mc,
                              const TemporalConfig* tc) {
  StreamModel m;
  m.mc = mc ? *mc : (variant == 'L' ? ModelConfig::large() : ModelConfig::small());
  if (tc) m.tc = *tc;
  m.mc.validate();
  m.tc.validate();
  Rng rng(Rng::mix(seed, variant == 'L' ? 2 : 1));
  init_backbone_params(m.params, "backbone.", m.mc, rng);
  init_temporal_params(m.params, "temporal.", m.tc, m.mc.dec_channels, rng);
  return m;
}

void save_stream_checkpoint(const std::string& path, const StreamModel& m) {
  std::map<std::string, TensorF> out = m.params.tensors;
  out.emplace("meta.stage", TensorF::full({1}, static_cast<float>(m.stage)));
  out.emplace("meta.model", encode_model_cfg(m.mc));
  out.emplace("meta.temporal", encode_temporal_cfg(m.tc));
  write_fckp(path, out);
}

StreamModel load_stream_checkpoint(const std::string& path) {
  auto all = read_fckp(path);
  StreamModel m;
  auto need = [&](const char* k) -> const TensorF& {
    auto it = all.find(k);
    if (it == all.end()) throw IoError(path + ": missing " + k + " (not a stream checkpoint)");
    return it->second;
  };
  m.stage = static_cast<int>(need("meta.stage").data[0]);
  m.mc = decode_model_cfg(need("meta.model"));
  m.tc = decode_temporal_cfg(need("meta.temporal"));
  for (auto& [k, v] : all)
    if (k.rfind("meta.", 0) != 0) m.params.add(k, std::move(v));
  return m;
}

void save_model_checkpoint(const std::string& path, const ModelWeights& w, int stage) {
  std::map<std::string, TensorF> out;
  for (const auto& [k, v] : w.s.tensors) out.emplace("s." + k, v);
  for (const auto& [k, v] : w.l.tensors) out.emplace("l." + k, v);
  for (const auto& [k, v] : w.fusion.tensors) out.emplace("fusion." + k, v);
  out.emplace("meta.stage", TensorF::full({1}, static_cast<float>(stage)));
  out.emplace("meta.s.model", encode_model_cfg(w.cfg.s_cfg));
  out.emplace("meta.s.temporal", encode_temporal_cfg(w.cfg.s_temporal));
  out.emplace("meta.l.model", encode_model_cfg(w.cfg.l_cfg));
  out.emplace("meta.l.temporal", encode_temporal_cfg(w.cfg.l_temporal));
  TensorF f = TensorF::zeros({3});
  f.data[0] = static_cast<float>(w.cfg.fuse_blocks);
  f.data[1] = static_cast<float>(w.cfg.fuse_heads);
  f.data[2] = static_cast<float>(w.cfg.base_short_side);
  out.emplace("meta.fusion", f);
  write_fckp(path, out);
}

ModelWeights load_model_checkpoint(const std::string& path) {
  auto all = read_fckp(path);
  auto need = [&](const char* k) -> const TensorF& {
    auto it = all.find(k);
    if (it == all.end()) throw IoError(path + ": missing " + k + " (not a model checkpoint)");
    return it->second;
  };
  ModelWeights w;
  w.cfg.s_cfg = decode_model_cfg(need("meta.s.model"));
  w.cfg.s_temporal = decode_temporal_cfg(need("meta.s.temporal"));
  w.cfg.l_cfg = decode_model_cfg(need("meta.l.model"));
  w.cfg.l_temporal = decode_temporal_cfg(need("meta.l.temporal"));
  const TensorF& f = need("meta.fusion");
  if (f.numel() != 3) throw IoError(path + ": bad fusion config record");
  w.cfg.fuse_blocks = static_cast<int>(f.data[0]);
  w.cfg.fuse_heads = static_cast<int>(f.data[1]);
  w.cfg.base_short_side = static_cast<int>(f.data[2]);
  split_prefixed(all, "s.", w.s);
  split_prefixed(all, "l.", w.l);
  split_prefixed(all, "fusion.", w.fusion);
  w.has_s = !w.s.tensors.empty();
  w.has_l = !w.l.tensors.empty();
  w.has_fusion = !w.fusion.tensors.empty();
  return w;
}

ModelWeights assemble_hybrid(const StreamModel& s, const StreamModel& l, uint64_t fusion_seed) {
  if (s.stage < 1 || l.stage < 1)
    throw TrainError("stage 2 requires stage-1 checkpoints for both streams");
  if (s.mc.variant != 'S' || l.mc.variant != 'L')
    throw TrainError("assemble_hybrid: variant mismatch (expected S and L checkpoints)");
  ModelWeights w;
  w.cfg.s_cfg = s.mc;
  w.cfg.s_temporal = s.tc;
  w.cfg.l_cfg = l.mc;
  w.cfg.l_temporal = l.tc;
  w.s = s.params;
  w.l = l.params;
  Rng rf(Rng::mix(fusion_seed, 3));
  init_fusion_params(w.fusion, "", w.cfg.s_cfg.dec_channels, w.cfg.l_cfg.dec_channels,
                     w.cfg.fuse_blocks, rf);
  w.has_s = w.has_l = w.has_fusion = true;
  return w;
}

// ---- sampling --------------------------------------------------------------

StrideSampler::StrideSampler(std::vector<std::string> scene_dirs, int clip_len,
                             std::vector<int> strides, uint64_t seed, int crop)
    : dirs_(std::move(scene_dirs)),
      strides_(std::move(strides)),
      t_(clip_len),
      crop_(crop),
      rng_(Rng::mix(seed, 0x636c6970ULL)) {
  if (dirs_.empty()) throw TrainError("StrideSampler: empty corpus");
  if (t_ < 1 || strides_.empty()) throw TrainError("StrideSampler: bad clip config");
  for (const auto& d : dirs_) {
    int n = 0;
    char fname[32];
    for (;; ++n) {
      std::snprintf(fname, sizeof fname, "frame_%04d.fdpt", n);
      if (!fs::exists(fs::path(d) / fname)) break;
    }
    if (n < t_) throw TrainError("StrideSampler: scene too short: " + d);
    lengths_.push_back(n);
  }
  // All scenes of a corpus share one resolution; read one header for cropping.
  DepthRaster r = read_fdpt((fs::path(dirs_[0]) / "frame_0000.fdpt").string());
  h_ = r.h();
  w_ = r.w();
  if (crop_ > 0 && (crop_ > h_ || crop_ > w_))
    throw TrainError("StrideSampler: crop larger than frames");
}

ClipSample StrideSampler::next() {
  for (int tries = 0; tries < 256; ++tries) {
    size_t si = rng_.index(dirs_.size());
    int stride = strides_[rng_.index(strides_.size())];
    int span = stride * (t_ - 1);
    int len = lengths_[si];
    if (span > len - 1) continue;  // stride unusable for this scene, resample
    int start = static_cast<int>(rng_.index(static_cast<size_t>(len - span)));
    ClipSample c;
    c.scene_dir = dirs_[si];
    for (int i = 0; i < t_; ++i) c.frame_idx.push_back(start + i * stride);
    c.crop = crop_;
    if (crop_ > 0) {
      c.crop_y = static_cast<int>(rng_.index(static_cast<size_t>(h_ - crop_ + 1)));
      c.crop_x = static_cast<int>(rng_.index(static_cast<size_t>(w_ - crop_ + 1)));
    }
    return c;
  }
  throw TrainError("StrideSampler: no stride fits any scene");
}

std::vector<SceneFrame> load_clip(const ClipSample& s) {
  std::vector<SceneFrame> out;
  for (int idx : s.frame_idx) {
    char fname[32];
    std::snprintf(fname, sizeof fname, "frame_%04d", idx);
    SceneFrame f;
    f.image = read_ppm((fs::path(s.scene_dir) / (std::string(fname) + ".ppm")).string());
    f.depth = read_fdpt((fs::path(s.scene_dir) / (std::string(fname) + ".fdpt")).string());
    if (s.crop > 0) {
      TensorF img = TensorF::zeros({3, s.crop, s.crop});
      TensorF dep = TensorF::zeros({s.crop, s.crop});
      Mask msk = Mask::zeros({s.crop, s.crop});
      for (int y = 0; y < s.crop; ++y)
        for (int x = 0; x < s.crop; ++x) {
          for (int c = 0; c < 3; ++c) img.at(c, y, x) = f.image.at(c, s.crop_y + y, s.crop_x + x);
          dep.at(y, x) = f.depth.depth.at(s.crop_y + y, s.crop_x + x);
          msk.at(y, x) = f.depth.mask.at(s.crop_y + y, s.crop_x + x);
        }
      f.image = std::move(img);
      f.depth.depth = std::move(dep);
      f.depth.mask = std::move(msk);
    }
    out.push_back(std::move(f));
  }
  return out;
}

// ---- optimizer -------------------------------------------------------------

void Adam::step(ParamStore& params, const std::map<std::string, TensorF>& grads,
                const std::function<double(const std::string&)>& lr) {
  ++t_;
  double bc1 = 1.0 - std::pow(b1_, t_), bc2 = 1.0 - std::pow(b2_, t_);
  for (const auto& [name, g] : grads) {
    TensorF& p = params.at(name);
    if (g.shape != p.shape) throw TrainError("Adam: grad shape mismatch for " + name);
    TensorF& m = m_.try_emplace(name, TensorF::zeros(p.shape)).first->second;
    TensorF& v = v_.try_emplace(name, TensorF::zeros(p.shape)).first->second;
    double a = lr(name);
    for (size_t i = 0; i < p.data.size(); ++i) {
      double gi = g.data[i];
      double mi = b1_ * m.data[i] + (1.0 - b1_) * gi;
      double vi = b2_ * v.data[i] + (1.0 - b2_) * gi * gi;
      m.data[i] = static_cast<float>(mi);
      v.data[i] = static_cast<float>(vi);
      p.data[i] -= static_cast<float>(a * (mi / bc1) / (std::sqrt(vi / bc2) + eps_));
    }
  }
}

// ---- training loops --------------------------------------------------------

namespace {

// Graph-side L1 of depth vs ground truth in the configured loss space.
int supervised_l1(GraphF& g, int depth, const DepthRaster& gt, LossSpace space) {
  if (space == LossSpace::Depth) return g.masked_l1(depth, gt.depth, gt.mask);
  TensorF inv_gt = gt.depth;
  for (size_t i = 0; i < inv_gt.data.size(); ++i)
    if (gt.mask.data[i]) inv_gt.data[i] = 1.0f / inv_gt.data[i];
  return g.masked_l1(g.reciprocal(depth), inv_gt, gt.mask);
}

void accumulate_grads(GraphF& g, const Binder& b, std::map<std::string, TensorF>& grads) {
  for (const auto& [name, id] : b.bound()) {
    if (!g.wants_grad(id) || !g.grad_set(id)) continue;
    const TensorF& gr = g.grad(id);
    auto it = grads.find(name);
    if (it == grads.end()) {
      grads.emplace(name, gr);
    } else {
      for (size_t i = 0; i < gr.data.size(); ++i) it->second.data[i] += gr.data[i];
    }
  }
}

void scale_grads(std::map<std::string, TensorF>& grads, float s) {
  for (auto& [k, v] : grads)
    for (float& x : v.data) x *= s;
}

void divergence_guard(const std::vector<LossRecord>& trace, double loss) {
  if (!std::isfinite(loss)) throw TrainError("training diverged: loss is not finite");
  // Compare smoothed loss levels 100 steps apart; single-clip losses are far
  // too noisy at batch 1 to compare point to point.
  size_t n = trace.size();
  if (n < 100) return;
  double recent = loss, earlier = 0.0;
  for (size_t i = 0; i < 9; ++i) recent += trace[n - 1 - i].clip_loss;
  for (size_t i = 0; i < 10; ++i) earlier += trace[n - 100 + i].clip_loss;
  if (recent > 10.0 * earlier)
    throw TrainError("training diverged: loss grew over 10x within 100 steps");
}

}  // namespace

std::vector<LossRecord> train_stage1(StreamModel& model,
                                     const std::vector<std::string>& scene_dirs,
                                     const TrainConfig& cfg,
                                     const std::function<void(const LossRecord&)>& on_step) {
  StrideSampler sampler(scene_dirs, cfg.clip_len, cfg.strides, cfg.seed, cfg.crop);
  Adam opt;
  auto lr = [&](const std::string& name) {
    return name.rfind("temporal.", 0) == 0 ? cfg.lr_temporal : cfg.lr_backbone;
  };
  std::vector<LossRecord> trace;
  for (int step = 0; step < cfg.steps; ++step) {
    std::map<std::string, TensorF> grads;
    LossRecord rec;
    rec.step = step;
    rec.stage = 1;
    for (int bi = 0; bi < cfg.batch; ++bi) {
      auto clip = load_clip(sampler.next());
      GraphF g(true);
      Binder b(g, model.params, true);
      int h = clip[0].image.size(1), w = clip[0].image.size(2);
      auto [gh, gw] = state_grid(model.mc, model.tc, h, w);
      StateVars sv = bind_state(g, init_state(model.tc, gh, gw, model.mc.dec_channels));
      int total = -1;
      for (auto& fr : clip) {
        int fvar = g.leaf(fr.image, false);
        auto [depth, st] = stream_forward(b, model.mc, model.tc, fvar, sv);
        sv = st;
        int lf = supervised_l1(g, depth, fr.depth, cfg.loss_space);
        rec.per_frame.push_back(g.val(lf).data[0]);
        total = total < 0 ? lf : g.add(total, lf);
      }
      total = g.scale(total, 1.0f / static_cast<float>(clip.size()));
      rec.clip_loss += g.val(total).data[0];
      g.backward(total);
      accumulate_grads(g, b, grads);
    }
    rec.clip_loss /= cfg.batch;
    scale_grads(grads, 1.0f / static_cast<float>(cfg.batch));
    divergence_guard(trace, rec.clip_loss);
    opt.step(model.params, grads, lr);
    if (on_step) on_step(rec);
    trace.push_back(std::move(rec));
  }
  model.stage = 1;
  return trace;
}

std::vector<LossRecord> train_stage2(ModelWeights& weights,
                                     const std::vector<std::string>& scene_dirs,
                                     const TrainConfig& cfg,
                                     const std::function<void(const LossRecord&)>& on_step) {
  if (!weights.has_s || !weights.has_l || !weights.has_fusion)
    throw TrainError("train_stage2: incomplete model weights");
  StrideSampler sampler(scene_dirs, cfg.clip_len, cfg.strides, cfg.seed, cfg.crop);
  Adam opt_s, opt_f;
  auto lr_s = [&](const std::string& name) {
    return name.rfind("temporal.", 0) == 0 ? cfg.lr_temporal : cfg.lr_backbone;
  };
  auto lr_f = [&](const std::string&) { return cfg.lr_fusion; };
  std::vector<LossRecord> trace;
  for (int step = 0; step < cfg.steps; ++step) {
    std::map<std::string, TensorF> grads_s, grads_f;
    LossRecord rec;
    rec.step = step;
    rec.stage = 2;
    for (int bi = 0; bi < cfg.batch; ++bi) {
      auto clip = load_clip(sampler.next());
      int h = clip[0].image.size(1), w = clip[0].image.size(2);
      if (std::min(h, w) < weights.cfg.base_short_side)
        throw TrainError("train_stage2: clip below the hybrid fallback threshold");
      GraphF g(true);
      Binder bs(g, weights.s, true);
      Binder bf(g, weights.fusion, true);
      auto [gh, gw] = state_grid(weights.cfg.s_cfg, weights.cfg.s_temporal, h, w);
      StateVars sv =
          bind_state(g, init_state(weights.cfg.s_temporal, gh, gw, weights.cfg.s_cfg.dec_channels));
      int total = -1;
      for (auto& fr : clip) {
        TensorF l_r1 = l_stream_layer1(weights, fr.image);  // frozen L, no grad by construction
        int fvar = g.leaf(fr.image, false);
        auto [depth, st] = hybrid_s_forward(bs, bf, weights.cfg, fvar, l_r1, sv);
        sv = st;
        int lf = supervised_l1(g, depth, fr.depth, cfg.loss_space);
        rec.per_frame.push_back(g.val(lf).data[0]);
        total = total < 0 ? lf : g.add(total, lf);
      }
      total = g.scale(total, 1.0f / static_cast<float>(clip.size()));
      rec.clip_loss += g.val(total).data[0];
      g.backward(total);
      accumulate_grads(g, bs, grads_s);
      accumulate_grads(g, bf, grads_f);
    }
    rec.clip_loss /= cfg.batch;
    scale_grads(grads_s, 1.0f / static_cast<float>(cfg.batch));
    scale_grads(grads_f, 1.0f / static_cast<float>(cfg.batch));
    divergence_guard(trace, rec.clip_loss);
    opt_s.step(weights.s, grads_s, lr_s);
    opt_f.step(weights.fusion, grads_f, lr_f);
    if (on_step) on_step(rec);
    trace.push_back(std::move(rec));
  }
  return trace;
}

}  // namespace sdepth
