#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sdepth/hybrid.hpp"
#include "sdepth/metrics.hpp"
#include "sdepth/scene.hpp"

namespace sdepth {

// Plain (non-graph) mean |pred - gt| over jointly valid pixels.
double l1_loss(const DepthRaster& pred, const DepthRaster& gt);

struct LossRecord {
  int step = 0;
  int stage = 1;
  double clip_loss = 0;
  std::vector<double> per_frame;
};

// One stream (backbone + temporal) with enough metadata to round-trip
// through a checkpoint and to gate stage 2 on stage-1 provenance.
struct StreamModel {
  ModelConfig mc;
  TemporalConfig tc;
  ParamStore params;
  int stage = 0;  // 0 = untrained init, 1 = finished stage 1
};

StreamModel init_stream_model(char variant, uint64_t seed,
                              const ModelConfig* mc = nullptr,
                              const TemporalConfig* tc = nullptr);

void save_stream_checkpoint(const std::string& path, const StreamModel& m);
StreamModel load_stream_checkpoint(const std::string& path);

// Full hybrid artifact (stage-2 output): s.*, l.*, fusion.* plus configs.
void save_model_checkpoint(const std::string& path, const ModelWeights& w, int stage);
ModelWeights load_model_checkpoint(const std::string& path);

// Uniformly samples (scene, stride, start) and an aligned square crop.
struct ClipSample {
  std::string scene_dir;
  std::vector<int> frame_idx;
  int crop_y = 0, crop_x = 0, crop = 0;  // crop == 0: full frame
};

class StrideSampler {
 public:
  StrideSampler(std::vector<std::string> scene_dirs, int clip_len, std::vector<int> strides,
                uint64_t seed, int crop);
  ClipSample next();

 private:
  std::vector<std::string> dirs_;
  std::vector<int> lengths_;
  std::vector<int> strides_;
  int t_, crop_;
  int h_ = 0, w_ = 0;
  Rng rng_;
};

std::vector<SceneFrame> load_clip(const ClipSample& s);

// Adam over one ParamStore; the learning rate is resolved per tensor name.
class Adam {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : b1_(beta1), b2_(beta2), eps_(eps) {}
  void step(ParamStore& params, const std::map<std::string, TensorF>& grads,
            const std::function<double(const std::string&)>& lr);

 private:
  double b1_, b2_, eps_;
  int t_ = 0;
  std::map<std::string, TensorF> m_, v_;
};

// Stage 1: clips unrolled through the stateful pipeline (state carried within
// a clip, reset between clips), mean L1 across the clip, Adam with temporal
// and backbone learning-rate groups. Updates the model in place.
std::vector<LossRecord> train_stage1(StreamModel& model,
                                     const std::vector<std::string>& scene_dirs,
                                     const TrainConfig& cfg,
                                     const std::function<void(const LossRecord&)>& on_step = {});

// Stage 2: L frozen, S + zero-init fusion trained on high-res clips.
// Both stream models must carry stage-1 provenance.
std::vector<LossRecord> train_stage2(ModelWeights& weights,
                                     const std::vector<std::string>& scene_dirs,
                                     const TrainConfig& cfg,
                                     const std::function<void(const LossRecord&)>& on_step = {});

// Assembles hybrid weights from two stage-1 stream checkpoints plus a fresh
// fusion module; throws unless both are stage-1 trained.
ModelWeights assemble_hybrid(const StreamModel& s, const StreamModel& l, uint64_t fusion_seed);

}  // namespace sdepth
