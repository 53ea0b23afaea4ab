#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "sdepth/io.hpp"
#include "sdepth/scene.hpp"

using namespace sdepth;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("sdepth_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(reinterpret_cast<uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

SceneSpec small_spec() {
  SceneSpec s;
  s.seed = 7;
  s.n_frames = 6;
  s.height = 42;
  s.width = 42;
  s.n_shapes = 3;
  s.pan_vx = 0.5f;
  return s;
}

void truncate_file(const std::string& path, int64_t keep) {
  fs::resize_file(path, static_cast<uintmax_t>(keep));
}

}  // namespace

TEST_CASE("generate_sequence is deterministic for a fixed spec") {
  SceneSpec spec = small_spec();
  auto a = generate_sequence(spec);
  auto b = generate_sequence(spec);
  REQUIRE(a.size() == b.size());
  for (size_t t = 0; t < a.size(); ++t) {
    CHECK(a[t].image.data == b[t].image.data);
    CHECK(a[t].depth.depth.data == b[t].depth.depth.data);
  }
  spec.seed = 8;
  auto c = generate_sequence(spec);
  CHECK(a[0].depth.depth.data != c[0].depth.depth.data);
}

TEST_CASE("generated depth stays in range and images in [0,1]") {
  auto frames = generate_sequence(small_spec());
  for (const auto& f : frames) {
    for (float v : f.depth.depth.data) {
      CHECK(v >= 1.0f);
      CHECK(v <= 10.0f);
    }
    for (float v : f.image.data) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }
}

TEST_CASE("n_shapes=0 leaves only the gentle background gradient") {
  SceneSpec spec = small_spec();
  spec.n_shapes = 0;
  auto frames = generate_sequence(spec);
  for (const auto& f : frames) {
    Mask c = boundary_contours(f.depth, 25.0);
    for (auto v : c.data) CHECK(v == 0);
  }
}

TEST_CASE("scenes with shapes produce silhouette contours at t=25") {
  auto frames = generate_sequence(small_spec());
  int64_t total = 0;
  for (const auto& f : frames) {
    Mask c = boundary_contours(f.depth, 25.0);
    for (auto v : c.data) total += v;
  }
  CHECK(total > 0);
}

TEST_CASE("fdpt round-trip is bitwise and masks survive as 0.0 sentinels") {
  TempDir tmp;
  Rng rng(1);
  DepthRaster r;
  r.depth = TensorF::zeros({5, 7});
  for (auto& v : r.depth.data) v = static_cast<float>(rng.uniform(1.0, 9.0));
  r.mask = Mask::full({5, 7}, 1);
  r.mask.data[3] = 0;
  r.mask.data[20] = 0;
  write_fdpt(tmp.file("a.fdpt"), r);
  DepthRaster back = read_fdpt(tmp.file("a.fdpt"));
  CHECK(back.mask.data == r.mask.data);
  for (int i = 0; i < r.depth.numel(); ++i) {
    size_t ii = static_cast<size_t>(i);
    if (r.mask.data[ii])
      CHECK(back.depth.data[ii] == r.depth.data[ii]);
    else
      CHECK(back.depth.data[ii] == 0.0f);
  }
}

TEST_CASE("a 2x2 fdpt file is exactly 32 bytes") {
  TempDir tmp;
  DepthRaster r = DepthRaster::dense(TensorF::full({2, 2}, 1.5f));
  write_fdpt(tmp.file("b.fdpt"), r);
  CHECK(fs::file_size(tmp.file("b.fdpt")) == 32);
}

TEST_CASE("fdpt corruption yields distinct errors") {
  TempDir tmp;
  DepthRaster r = DepthRaster::dense(TensorF::full({2, 2}, 1.5f));
  std::string path = tmp.file("c.fdpt");
  write_fdpt(path, r);

  SUBCASE("bad magic") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.write("NOPE", 4);
    f.close();
    CHECK_THROWS_AS(read_fdpt(path), BadMagicError);
  }
  SUBCASE("bad version") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(4);
    char v[4] = {9, 0, 0, 0};
    f.write(v, 4);
    f.close();
    CHECK_THROWS_AS(read_fdpt(path), VersionError);
  }
  SUBCASE("truncated payload") {
    truncate_file(path, 20);
    CHECK_THROWS_WITH_AS(read_fdpt(path), doctest::Contains("bytes"), TruncationError);
  }
}

TEST_CASE("fckp round-trip reproduces every tensor bitwise") {
  TempDir tmp;
  Rng rng(2);
  std::map<std::string, TensorF> tensors;
  tensors["alpha"] = TensorF::zeros({3, 4});
  tensors["block0.w"] = TensorF::zeros({2, 3, 5});
  tensors["scalar"] = TensorF::zeros({1});
  for (auto& [name, t] : tensors)
    for (auto& v : t.data) v = static_cast<float>(rng.normal());
  std::string path = tmp.file("m.fckp");
  write_fckp(path, tensors);
  auto back = read_fckp(path);
  REQUIRE(back.size() == tensors.size());
  for (const auto& [name, t] : tensors) {
    REQUIRE(back.count(name) == 1);
    CHECK(back.at(name).shape == t.shape);
    CHECK(back.at(name).data == t.data);
  }
}

TEST_CASE("fckp corruption yields distinct errors") {
  TempDir tmp;
  std::map<std::string, TensorF> tensors;
  tensors["w"] = TensorF::full({4, 4}, 0.25f);
  std::string path = tmp.file("n.fckp");
  write_fckp(path, tensors);

  SUBCASE("bad magic") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.write("XXXX", 4);
    f.close();
    CHECK_THROWS_AS(read_fckp(path), BadMagicError);
  }
  SUBCASE("bad version") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(4);
    char v[4] = {42, 0, 0, 0};
    f.write(v, 4);
    f.close();
    CHECK_THROWS_AS(read_fckp(path), VersionError);
  }
  SUBCASE("truncated") {
    truncate_file(path, static_cast<int64_t>(fs::file_size(path)) - 7);
    CHECK_THROWS_AS(read_fckp(path), TruncationError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(read_fckp(tmp.file("nope.fckp")), IoError); }
}

TEST_CASE("ppm round-trip is exact for 8-bit-representable values") {
  TempDir tmp;
  TensorF img = TensorF::zeros({3, 4, 6});
  Rng rng(3);
  for (auto& v : img.data)
    v = static_cast<float>(static_cast<int>(rng.uniform(0, 255.999))) / 255.0f;
  std::string path = tmp.file("img.ppm");
  write_ppm(path, img);
  TensorF back = read_ppm(path);
  CHECK(back.shape == img.shape);
  for (size_t i = 0; i < img.data.size(); ++i)
    CHECK(back.data[i] == doctest::Approx(img.data[i]).epsilon(1e-6));

  truncate_file(path, static_cast<int64_t>(fs::file_size(path)) - 5);
  CHECK_THROWS_AS(read_ppm(path), TruncationError);
}

TEST_CASE("corpus generation writes the documented layout and reloads bitwise") {
  TempDir tmp;
  CorpusLayout layout = corpus_layout("toy-base", 11);
  layout.n_scenes = 2;  // keep the unit test fast; acceptance uses full corpora
  layout.base.n_frames = 3;
  auto dirs = generate_corpus(layout, tmp.file("corpus"));
  REQUIRE(dirs.size() == 2);
  CHECK(fs::exists(tmp.file("corpus") + "/manifest.json"));
  auto listed = list_scene_dirs(tmp.file("corpus"));
  CHECK(listed == dirs);
  for (const auto& dir : dirs) {
    auto frames = load_scene(dir);
    REQUIRE(frames.size() == 3);
    CHECK(frames[0].image.shape == std::vector<int>{3, 140, 140});
    CHECK(frames[0].depth.depth.shape == std::vector<int>{140, 140});
  }
  // Regenerating with the same layout reproduces identical files.
  auto dirs2 = generate_corpus(layout, tmp.file("corpus2"));
  auto a = load_scene(dirs[1]), b = load_scene(dirs2[1]);
  for (size_t t = 0; t < a.size(); ++t) {
    CHECK(a[t].image.data == b[t].image.data);
    CHECK(a[t].depth.depth.data == b[t].depth.depth.data);
  }
}

TEST_CASE("corpus_layout knows the two standard corpora") {
  CorpusLayout base = corpus_layout("toy-base", 1);
  CHECK(base.n_scenes == 64);
  CHECK(base.base.height == 140);
  CorpusLayout high = corpus_layout("toy-high", 1);
  CHECK(high.n_scenes == 16);
  CHECK(high.base.height == 280);
  CHECK_THROWS_AS(corpus_layout("toy-medium", 1), IoError);
}
