#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "sdepth/io.hpp"
#include "sdepth/scene.hpp"
#include "sdepth/session.hpp"
#include "sdepth/training.hpp"

namespace fs = std::filesystem;
using namespace sdepth;

namespace {

ModelWeights wrap_stream(const StreamModel& m) {
  ModelWeights w;
  if (m.mc.variant == 'L') {
    w.cfg.l_cfg = m.mc;
    w.cfg.l_temporal = m.tc;
    w.l = m.params;
    w.has_l = true;
  } else {
    w.cfg.s_cfg = m.mc;
    w.cfg.s_temporal = m.tc;
    w.s = m.params;
    w.has_s = true;
  }
  return w;
}

// Accepts either a full model checkpoint or a single-stream one.
ModelWeights load_any_checkpoint(const std::string& path) {
  try {
    return load_model_checkpoint(path);
  } catch (const IoError&) {
    return wrap_stream(load_stream_checkpoint(path));
  }
}

std::vector<std::string> train_split(const std::string& data_dir, int holdout) {
  auto dirs = list_scene_dirs(data_dir);
  if (holdout > 0 && holdout < static_cast<int>(dirs.size()))
    dirs.resize(dirs.size() - static_cast<size_t>(holdout));
  return dirs;
}

SessionMode parse_mode(const std::string& s) {
  if (s == "s-only") return SessionMode::SOnly;
  if (s == "l-only") return SessionMode::LOnly;
  if (s == "hybrid") return SessionMode::Hybrid;
  throw CLI::ValidationError("--mode", "expected s-only, l-only or hybrid");
}

std::vector<DepthRaster> load_fdpt_dir(const std::string& dir) {
  std::vector<DepthRaster> out;
  for (int t = 0;; ++t) {
    char fname[32];
    std::snprintf(fname, sizeof fname, "frame_%04d.fdpt", t);
    fs::path p = fs::path(dir) / fname;
    if (!fs::exists(p)) break;
    out.push_back(read_fdpt(p.string()));
  }
  if (out.empty()) throw IoError("no .fdpt frames in " + dir);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"streaming depth pipeline"};
  app.require_subcommand(1);
  app.set_config("--config");

  // generate
  auto* gen = app.add_subcommand("generate", "write a synthetic corpus");
  std::string gen_corpus = "toy-base", gen_out;
  uint64_t gen_seed = 7;
  gen->add_option("--corpus", gen_corpus, "toy-base or toy-high");
  gen->add_option("--out", gen_out)->required();
  gen->add_option("--seed", gen_seed);

  // train-stage1
  auto* t1 = app.add_subcommand("train-stage1", "train one stream on base-resolution clips");
  std::string t1_variant = "L", t1_data, t1_out, t1_loss_space = "depth";
  TrainConfig t1_cfg;
  int t1_holdout = 8;
  t1->add_option("--variant", t1_variant, "S or L");
  t1->add_option("--data", t1_data)->required();
  t1->add_option("--out", t1_out)->required();
  t1->add_option("--steps", t1_cfg.steps);
  t1->add_option("--seed", t1_cfg.seed);
  t1->add_option("--clip-len", t1_cfg.clip_len);
  t1->add_option("--crop", t1_cfg.crop);
  t1->add_option("--batch", t1_cfg.batch);
  t1->add_option("--lr-temporal", t1_cfg.lr_temporal);
  t1->add_option("--lr-backbone", t1_cfg.lr_backbone);
  t1->add_option("--holdout", t1_holdout, "trailing scenes excluded from training");
  t1->add_option("--loss-space", t1_loss_space, "depth or inverse_depth");

  // train-stage2
  auto* t2 = app.add_subcommand("train-stage2", "freeze L, train S + fusion on high-res clips");
  std::string t2_s, t2_l, t2_data, t2_out, t2_loss_space = "depth";
  TrainConfig t2_cfg;
  t2_cfg.stage = 2;
  int t2_holdout = 4;
  t2->add_option("--s-ckpt", t2_s)->required();
  t2->add_option("--l-ckpt", t2_l)->required();
  t2->add_option("--data", t2_data)->required();
  t2->add_option("--out", t2_out)->required();
  t2->add_option("--steps", t2_cfg.steps);
  t2->add_option("--seed", t2_cfg.seed);
  t2->add_option("--clip-len", t2_cfg.clip_len);
  t2->add_option("--crop", t2_cfg.crop);
  t2->add_option("--batch", t2_cfg.batch);
  t2->add_option("--lr-fusion", t2_cfg.lr_fusion);
  t2->add_option("--holdout", t2_holdout);
  t2->add_option("--loss-space", t2_loss_space);

  // infer
  auto* inf = app.add_subcommand("infer", "stream a scene's frames to depth rasters");
  std::string inf_ckpt, inf_mode = "hybrid", inf_in, inf_out;
  int inf_threads = 1;
  inf->add_option("--ckpt", inf_ckpt)->required();
  inf->add_option("--mode", inf_mode);
  inf->add_option("--in", inf_in)->required();
  inf->add_option("--out", inf_out)->required();
  inf->add_option("--threads", inf_threads);

  // eval
  auto* ev = app.add_subcommand("eval", "score a predicted sequence against ground truth");
  std::string ev_pred, ev_gt, ev_report;
  std::vector<int> ev_prefixes;
  ev->add_option("--pred", ev_pred)->required();
  ev->add_option("--gt", ev_gt)->required();
  ev->add_option("--report", ev_report)->required();
  ev->add_option("--drift-prefix", ev_prefixes, "drift_std prefix checkpoints");

  // bench
  auto* be = app.add_subcommand("bench", "FPS protocol: warmup frame untimed, JSON to stdout");
  std::string be_ckpt, be_frames, be_mode = "hybrid";
  int be_threads = 1, be_count = 0;
  be->add_option("--ckpt", be_ckpt)->required();
  be->add_option("--frames", be_frames)->required();
  be->add_option("--mode", be_mode);
  be->add_option("--threads", be_threads);
  be->add_option("--count", be_count, "repeat frames up to this many (0 = as found)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      generate_corpus(corpus_layout(gen_corpus, gen_seed), gen_out);
      std::cout << "wrote corpus " << gen_corpus << " to " << gen_out << "\n";
    } else if (*t1) {
      if (t1_variant != "S" && t1_variant != "L")
        throw TrainError("--variant must be S or L");
      t1_cfg.loss_space =
          t1_loss_space == "inverse_depth" ? LossSpace::InverseDepth : LossSpace::Depth;
      StreamModel m = init_stream_model(t1_variant[0], t1_cfg.seed);
      auto dirs = train_split(t1_data, t1_holdout);
      train_stage1(m, dirs, t1_cfg, [](const LossRecord& r) {
        std::cout << "step " << r.step << " loss " << r.clip_loss << "\n";
      });
      save_stream_checkpoint(t1_out, m);
      std::cout << "wrote " << t1_out << "\n";
    } else if (*t2) {
      t2_cfg.loss_space =
          t2_loss_space == "inverse_depth" ? LossSpace::InverseDepth : LossSpace::Depth;
      StreamModel s = load_stream_checkpoint(t2_s);
      StreamModel l = load_stream_checkpoint(t2_l);
      ModelWeights w = assemble_hybrid(s, l, t2_cfg.seed);
      auto dirs = train_split(t2_data, t2_holdout);
      train_stage2(w, dirs, t2_cfg, [](const LossRecord& r) {
        std::cout << "step " << r.step << " loss " << r.clip_loss << "\n";
      });
      save_model_checkpoint(t2_out, w, 2);
      std::cout << "wrote " << t2_out << "\n";
    } else if (*inf) {
      ModelWeights w = load_any_checkpoint(inf_ckpt);
      auto frames = load_scene(inf_in);
      fs::create_directories(inf_out);
      Session s = open_session(w, frames[0].image.size(1), frames[0].image.size(2),
                               parse_mode(inf_mode), inf_threads);
      for (size_t i = 0; i < frames.size(); ++i) {
        TensorF d = process_frame(s, frames[i].image);
        char fname[32];
        std::snprintf(fname, sizeof fname, "frame_%04zu.fdpt", i);
        write_fdpt((fs::path(inf_out) / fname).string(), DepthRaster::dense(d));
      }
      std::cout << "wrote " << frames.size() << " rasters to " << inf_out << "\n";
    } else if (*ev) {
      auto pred = load_fdpt_dir(ev_pred);
      auto gt = load_fdpt_dir(ev_gt);
      if (ev_prefixes.empty()) ev_prefixes.push_back(static_cast<int>(pred.size()));
      SequenceReport rep = evaluate_sequence(pred, gt, ev_prefixes);
      std::ofstream out(ev_report);
      out << rep.to_json() << "\n";
      std::cout << rep.to_json() << "\n";
    } else if (*be) {
      ModelWeights w = load_any_checkpoint(be_ckpt);
      auto scene = load_scene(be_frames);
      std::vector<TensorF> frames;
      for (auto& f : scene) frames.push_back(f.image);
      if (be_count > 0)
        for (size_t i = 0; frames.size() < static_cast<size_t>(be_count); ++i)
          frames.push_back(frames[i % scene.size()]);
      BenchReport r = bench(w, frames, parse_mode(be_mode), be_threads);
      std::cout << r.to_json() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
