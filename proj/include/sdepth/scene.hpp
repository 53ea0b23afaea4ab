#pragma once

#include <string>
#include <vector>

#include "sdepth/metrics.hpp"
#include "sdepth/rng.hpp"
#include "sdepth/tensor.hpp"

namespace sdepth {

// Everything needed to regenerate a scene bitwise. Shape placement and
// appearance are derived from the seed; the fields here are the knobs.
struct SceneSpec {
  uint64_t seed = 1;
  int n_frames = 48;
  int height = 140, width = 140;
  int n_shapes = 5;
  float depth_min = 1.0f, depth_max = 10.0f;
  float pan_vx = 0.0f, pan_vy = 0.0f;  // camera pan, pixels/frame
};

struct SceneFrame {
  TensorF image;     // (3,H,W) in [0,1]
  DepthRaster depth; // dense, meters
};

std::vector<SceneFrame> generate_sequence(const SceneSpec& spec);

// Writes <out_dir>/<scene_id>/frame_%04d.{ppm,fdpt} for every scene plus a
// manifest.json listing the specs. Returns the scene directories.
struct CorpusLayout {
  std::string name;  // "toy-base" or "toy-high"
  int n_scenes;
  SceneSpec base;  // per-scene seed derived from base.seed and the index
};

CorpusLayout corpus_layout(const std::string& name, uint64_t seed);
std::vector<std::string> generate_corpus(const CorpusLayout& layout, const std::string& out_dir);

// Loads frame_%04d.{ppm,fdpt} pairs from one scene directory.
std::vector<SceneFrame> load_scene(const std::string& scene_dir);
std::vector<std::string> list_scene_dirs(const std::string& corpus_dir);

}  // namespace sdepth
