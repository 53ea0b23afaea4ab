#include "sdepth/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "sdepth/errors.hpp"
#include "sdepth/io.hpp"

namespace fs = std::filesystem;

namespace sdepth {

namespace {

constexpr uint64_t kNoiseSalt = 0x6e6f697365ULL;  // decorrelates noise from placement

struct Shape {
  bool circle = false;
  float cx = 0, cy = 0;       // world-space center at frame 0
  float vx = 0, vy = 0;       // pixels/frame
  float half_w = 0, half_h = 0;  // radius stored in half_w for circles
  float depth = 1;
  float color[3] = {0, 0, 0};
};

struct Placement {
  // Background depth plane d = base + gx*wx + gy*wy, clamped to depth range.
  float base, gx, gy;
  float bg_color[3];
  std::vector<Shape> shapes;
};

Placement place(const SceneSpec& spec, int attempt) {
  Rng rng(Rng::mix(spec.seed, static_cast<uint64_t>(attempt)));
  Placement p;
  // Gentle gradient: neighboring-pixel depth ratio stays far below the
  // smallest boundary threshold, so an empty scene has zero contours.
  p.base = rng.uniform(5.0f, 7.0f);
  float span = std::max(spec.width, spec.height) + std::abs(spec.pan_vx) * spec.n_frames +
               std::abs(spec.pan_vy) * spec.n_frames + 1.0f;
  p.gx = rng.uniform(-1.5f, 1.5f) / span;
  p.gy = rng.uniform(-1.5f, 1.5f) / span;
  for (float& c : p.bg_color) c = rng.uniform(0.2f, 0.8f);

  p.shapes.resize(static_cast<size_t>(spec.n_shapes));
  for (int i = 0; i < spec.n_shapes; ++i) {
    Shape& s = p.shapes[static_cast<size_t>(i)];
    s.circle = (rng.next() & 1) != 0;
    float min_side = static_cast<float>(std::min(spec.width, spec.height));
    s.half_w = rng.uniform(0.06f, 0.16f) * min_side;
    s.half_h = s.circle ? s.half_w : rng.uniform(0.06f, 0.16f) * min_side;
    // All shapes sit well in front of the background plane (>= 1.25x ratio by
    // construction: shape depth <= 3.2 vs background >= 4.2), so every
    // silhouette is an occluding contour at the strongest threshold.
    s.depth = rng.uniform(spec.depth_min, 3.2f);
    for (float& c : s.color) c = rng.uniform(0.0f, 1.0f);
    s.vx = rng.uniform(-1.5f, 1.5f);
    s.vy = rng.uniform(-1.5f, 1.5f);
    if (i == 0) {
      // Shape 0 is pinned near the center with a drift that cannot leave the
      // frame over n_frames, guaranteeing a visible depth edge in every frame.
      s.cx = spec.width * rng.uniform(0.4f, 0.6f);
      s.cy = spec.height * rng.uniform(0.4f, 0.6f);
      float max_drift = 0.25f * min_side / static_cast<float>(std::max(spec.n_frames, 1));
      s.vx = spec.pan_vx + rng.uniform(-max_drift, max_drift);
      s.vy = spec.pan_vy + rng.uniform(-max_drift, max_drift);
    } else {
      s.cx = rng.uniform(0.0f, static_cast<float>(spec.width));
      s.cy = rng.uniform(0.0f, static_cast<float>(spec.height));
    }
  }
  return p;
}

bool ever_visible(const SceneSpec& spec, const Shape& s) {
  for (int t = 0; t < spec.n_frames; ++t) {
    float sx = s.cx + s.vx * t - spec.pan_vx * t;
    float sy = s.cy + s.vy * t - spec.pan_vy * t;
    if (sx + s.half_w >= 0 && sx - s.half_w < spec.width && sy + s.half_h >= 0 &&
        sy - s.half_h < spec.height)
      return true;
  }
  return false;
}

}  // namespace

std::vector<SceneFrame> generate_sequence(const SceneSpec& spec) {
  if (spec.n_frames < 1 || spec.height < 1 || spec.width < 1 || spec.n_shapes < 0)
    throw DimensionError("generate_sequence: bad spec");
  Placement p;
  bool ok = false;
  for (int attempt = 0; attempt < 64 && !ok; ++attempt) {
    p = place(spec, attempt);
    ok = true;
    for (const Shape& s : p.shapes)
      if (!ever_visible(spec, s)) ok = false;  // reseed placement, spec stays fixed
  }
  if (!ok) throw TrainError("generate_sequence: could not place all shapes in frame");

  std::vector<SceneFrame> frames;
  frames.reserve(static_cast<size_t>(spec.n_frames));
  for (int t = 0; t < spec.n_frames; ++t) {
    SceneFrame f;
    f.image = TensorF::zeros({3, spec.height, spec.width});
    f.depth.depth = TensorF::zeros({spec.height, spec.width});
    f.depth.mask = Mask::full({spec.height, spec.width}, 1);
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        // World coordinates: the camera pan shifts everything uniformly.
        float wx = static_cast<float>(x) + spec.pan_vx * t;
        float wy = static_cast<float>(y) + spec.pan_vy * t;
        float d = p.base + p.gx * wx + p.gy * wy;
        const float* col = p.bg_color;
        for (const Shape& s : p.shapes) {
          float scx = s.cx + s.vx * t, scy = s.cy + s.vy * t;  // shape world position
          float dx = wx - scx, dy = wy - scy;
          bool inside = s.circle ? (dx * dx + dy * dy <= s.half_w * s.half_w)
                                 : (std::abs(dx) <= s.half_w && std::abs(dy) <= s.half_h);
          if (inside && s.depth < d) {  // exact occlusion: nearest wins
            d = s.depth;
            col = s.color;
          }
        }
        d = std::clamp(d, spec.depth_min, spec.depth_max);
        f.depth.depth.at(y, x) = d;
        // Per-pixel color noise keyed by (seed, frame, pixel): order-free.
        Rng px(Rng::mix(Rng::mix(spec.seed ^ kNoiseSalt, static_cast<uint64_t>(t)),
                        static_cast<uint64_t>(y) * static_cast<uint64_t>(spec.width) +
                            static_cast<uint64_t>(x)));
        for (int c = 0; c < 3; ++c)
          f.image.at(c, y, x) =
              std::clamp(col[c] + 0.02f * static_cast<float>(px.normal()), 0.0f, 1.0f);
      }
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

CorpusLayout corpus_layout(const std::string& name, uint64_t seed) {
  CorpusLayout l;
  l.name = name;
  l.base.seed = seed;
  if (name == "toy-base") {
    l.n_scenes = 64;
    l.base.height = l.base.width = 140;
  } else if (name == "toy-high") {
    l.n_scenes = 16;
    l.base.height = l.base.width = 280;
  } else {
    throw IoError("unknown corpus \"" + name + "\" (expected toy-base or toy-high)");
  }
  return l;
}

std::vector<std::string> generate_corpus(const CorpusLayout& layout, const std::string& out_dir) {
  fs::create_directories(out_dir);
  nlohmann::json manifest;
  manifest["corpus"] = layout.name;
  manifest["scenes"] = nlohmann::json::array();
  std::vector<std::string> dirs;
  for (int i = 0; i < layout.n_scenes; ++i) {
    SceneSpec spec = layout.base;
    spec.seed = Rng::mix(layout.base.seed, static_cast<uint64_t>(i) + 1);
    Rng motion(Rng::mix(spec.seed, 0x70616eULL));
    spec.pan_vx = motion.uniform(-1.0f, 1.0f);
    spec.pan_vy = motion.uniform(-1.0f, 1.0f);
    spec.n_shapes = 3 + static_cast<int>(motion.index(4));

    char sid[32];
    std::snprintf(sid, sizeof sid, "scene_%03d", i);
    fs::path dir = fs::path(out_dir) / sid;
    fs::create_directories(dir);
    auto frames = generate_sequence(spec);
    for (int t = 0; t < spec.n_frames; ++t) {
      char fname[32];
      std::snprintf(fname, sizeof fname, "frame_%04d", t);
      write_ppm((dir / (std::string(fname) + ".ppm")).string(), frames[static_cast<size_t>(t)].image);
      write_fdpt((dir / (std::string(fname) + ".fdpt")).string(),
                 frames[static_cast<size_t>(t)].depth);
    }
    manifest["scenes"].push_back({{"id", sid},
                                  {"seed", spec.seed},
                                  {"n_frames", spec.n_frames},
                                  {"height", spec.height},
                                  {"width", spec.width},
                                  {"n_shapes", spec.n_shapes},
                                  {"pan_vx", spec.pan_vx},
                                  {"pan_vy", spec.pan_vy}});
    dirs.push_back(dir.string());
  }
  std::ofstream mf(fs::path(out_dir) / "manifest.json");
  mf << manifest.dump(2) << "\n";
  return dirs;
}

std::vector<SceneFrame> load_scene(const std::string& scene_dir) {
  std::vector<SceneFrame> frames;
  for (int t = 0;; ++t) {
    char fname[32];
    std::snprintf(fname, sizeof fname, "frame_%04d", t);
    fs::path ppm = fs::path(scene_dir) / (std::string(fname) + ".ppm");
    fs::path fdpt = fs::path(scene_dir) / (std::string(fname) + ".fdpt");
    if (!fs::exists(ppm)) break;
    SceneFrame f;
    f.image = read_ppm(ppm.string());
    f.depth = read_fdpt(fdpt.string());
    frames.push_back(std::move(f));
  }
  if (frames.empty()) throw IoError("no frames found in " + scene_dir);
  return frames;
}

std::vector<std::string> list_scene_dirs(const std::string& corpus_dir) {
  std::vector<std::string> dirs;
  if (!fs::is_directory(corpus_dir)) throw IoError("not a directory: " + corpus_dir);
  for (const auto& e : fs::directory_iterator(corpus_dir))
    if (e.is_directory()) dirs.push_back(e.path().string());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw IoError("corpus has no scene directories: " + corpus_dir);
  return dirs;
}

}  // namespace sdepth
