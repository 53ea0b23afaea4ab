#include <cmath>

#include "doctest.h"
#include "sdepth/graph.hpp"
#include "sdepth/rng.hpp"

using namespace sdepth;

namespace {

TensorF randn(std::vector<int> shape, Rng& rng, float std = 1.0f) {
  TensorF t = TensorF::zeros(shape);
  for (auto& v : t.data) v = static_cast<float>(rng.normal()) * std;
  return t;
}

// Independent nested-loop convolution reference.
TensorF conv2d_oracle(const TensorF& in, const TensorF& ker, const TensorF& bias, int stride,
                      int pad) {
  int ci = in.size(0), h = in.size(1), w = in.size(2);
  int co = ker.size(0), k = ker.size(2);
  int ho = (h + 2 * pad - k) / stride + 1, wo = (w + 2 * pad - k) / stride + 1;
  TensorF out = TensorF::zeros({co, ho, wo});
  for (int o = 0; o < co; ++o)
    for (int y = 0; y < ho; ++y)
      for (int x = 0; x < wo; ++x) {
        double acc = bias.data[static_cast<size_t>(o)];
        for (int c = 0; c < ci; ++c)
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
              int iy = y * stride + ky - pad, ix = x * stride + kx - pad;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
              acc += static_cast<double>(in.at(c, iy, ix)) * ker.at(o, c, ky, kx);
            }
        out.at(o, y, x) = static_cast<float>(acc);
      }
  return out;
}

}  // namespace

TEST_CASE("tensor basics") {
  TensorF t = TensorF::zeros({2, 3});
  CHECK(t.numel() == 6);
  CHECK(t.ndim() == 2);
  t.at(1, 2) = 5.0f;
  CHECK(t.data[5] == 5.0f);
  CHECK_THROWS_AS(TensorF({2, 3}, {1.0f}), DimensionError);
}

TEST_CASE("nan rejected at op boundaries") {
  GraphF g;
  TensorF bad = TensorF::zeros({2});
  bad.data[0] = std::nanf("");
  CHECK_THROWS_AS(g.leaf(bad), NumericError);
}

TEST_CASE("conv2d 1x1 identity kernel") {
  GraphF g(false);
  Rng rng(3);
  int in = g.leaf(randn({2, 4, 4}, rng));
  TensorF ker = TensorF::zeros({2, 2, 1, 1});
  ker.at(0, 0, 0, 0) = 1.0f;
  ker.at(1, 1, 0, 0) = 1.0f;
  int out = g.conv2d(in, g.leaf(ker), g.leaf(TensorF::zeros({2})), 1, 0);
  for (size_t i = 0; i < g.val(in).data.size(); ++i)
    CHECK(g.val(out).data[i] == g.val(in).data[i]);
}

TEST_CASE("conv2d constant input, ones kernel") {
  GraphF g(false);
  int in = g.leaf(TensorF::full({1, 5, 5}, 2.0f));
  int out = g.conv2d(in, g.leaf(TensorF::full({1, 1, 3, 3}, 1.0f)), g.leaf(TensorF::zeros({1})), 1,
                     0);
  for (float v : g.val(out).data) CHECK(v == doctest::Approx(18.0f));
}

TEST_CASE("conv2d matches brute-force oracle for all stride/padding in {1,2}x{0,1}") {
  Rng rng(11);
  for (int stride : {1, 2})
    for (int pad : {0, 1}) {
      int h = 5, w = 5, k = 3;  // (5 + 2p - 3) divisible by 1 and 2
      if ((h + 2 * pad - k) % stride != 0) continue;
      TensorF in = randn({2, h, w}, rng);
      TensorF ker = randn({3, 2, k, k}, rng);
      TensorF bias = randn({3}, rng);
      GraphF g(false);
      int out = g.conv2d(g.leaf(in), g.leaf(ker), g.leaf(bias), stride, pad);
      TensorF ref = conv2d_oracle(in, ker, bias, stride, pad);
      REQUIRE(g.val(out).shape == ref.shape);
      for (size_t i = 0; i < ref.data.size(); ++i)
        CHECK(g.val(out).data[i] == doctest::Approx(ref.data[i]).epsilon(1e-6));
    }
}

TEST_CASE("conv2d error cases") {
  GraphF g(false);
  Rng rng(5);
  int in = g.leaf(randn({1, 4, 4}, rng));
  // even kernel
  CHECK_THROWS_AS(g.conv2d(in, g.leaf(randn({1, 1, 2, 2}, rng)), g.leaf(TensorF::zeros({1})), 1, 0),
                  DimensionError);
  // non-integral output: (4 - 3) / 2 not integral
  CHECK_THROWS_AS(g.conv2d(in, g.leaf(randn({1, 1, 3, 3}, rng)), g.leaf(TensorF::zeros({1})), 2, 0),
                  DimensionError);
  // channel mismatch
  CHECK_THROWS_AS(g.conv2d(in, g.leaf(randn({1, 2, 3, 3}, rng)), g.leaf(TensorF::zeros({1})), 1, 1),
                  DimensionError);
}

TEST_CASE("bilinear_resize identity at 1:1") {
  GraphF g(false);
  Rng rng(7);
  TensorF in = randn({3, 6, 5}, rng);
  int out = g.bilinear_resize(g.leaf(in), 6, 5);
  for (size_t i = 0; i < in.data.size(); ++i) CHECK(g.val(out).data[i] == in.data[i]);
}

TEST_CASE("bilinear_resize constant stays constant at any size") {
  GraphF g(false);
  int in = g.leaf(TensorF::full({1, 4, 4}, 3.25f));
  for (auto [oh, ow] : {std::pair{1, 1}, {2, 7}, {9, 3}}) {
    int out = g.bilinear_resize(in, oh, ow);
    for (float v : g.val(out).data) CHECK(v == doctest::Approx(3.25f));
  }
}

TEST_CASE("bilinear_resize 2x2 -> 1x1 is the mean") {
  GraphF g(false);
  TensorF in({1, 2, 2}, {1.0f, 2.0f, 3.0f, 4.0f});
  int out = g.bilinear_resize(g.leaf(in), 1, 1);
  CHECK(g.val(out).data[0] == doctest::Approx(2.5f));
}

TEST_CASE("layer_norm worked examples") {
  GraphF g(false);
  int gamma = g.leaf(TensorF::full({2}, 1.0f));
  int beta = g.leaf(TensorF::zeros({2}));

  // constant row -> zeros
  int c = g.layer_norm(g.leaf(TensorF::full({1, 2}, 4.0f)), gamma, beta);
  for (float v : g.val(c).data) CHECK(v == doctest::Approx(0.0f));

  // row [1,3] with eps -> 0: [-1, 1]
  int r = g.layer_norm(g.leaf(TensorF({1, 2}, {1.0f, 3.0f})), gamma, beta, 1e-12f);
  CHECK(g.val(r).data[0] == doctest::Approx(-1.0f));
  CHECK(g.val(r).data[1] == doctest::Approx(1.0f));
}

TEST_CASE("layer_norm normalizes random rows") {
  GraphF g(false);
  Rng rng(13);
  int d = 16;
  TensorF x = randn({4, d}, rng, 3.0f);
  int out = g.layer_norm(g.leaf(x), g.leaf(TensorF::full({d}, 1.0f)), g.leaf(TensorF::zeros({d})));
  for (int row = 0; row < 4; ++row) {
    double mean = 0, var = 0;
    for (int i = 0; i < d; ++i) mean += g.val(out).at(row, i);
    mean /= d;
    for (int i = 0; i < d; ++i) {
      double cdev = g.val(out).at(row, i) - mean;
      var += cdev * cdev;
    }
    var /= d;
    CHECK(mean == doctest::Approx(0.0).epsilon(1e-4));
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("attention single key returns V row for all queries") {
  GraphF g(false);
  Rng rng(17);
  TensorF v = randn({1, 4}, rng);
  int out = g.attention(g.leaf(randn({3, 4}, rng)), g.leaf(randn({1, 4}, rng)), g.leaf(v), 2);
  for (int m = 0; m < 3; ++m)
    for (int d = 0; d < 4; ++d) CHECK(g.val(out).at(m, d) == doctest::Approx(v.at(0, d)));
}

TEST_CASE("attention with identical keys averages V") {
  GraphF g(false);
  Rng rng(19);
  TensorF k = TensorF::zeros({3, 4});
  TensorF krow = randn({1, 4}, rng);
  for (int n = 0; n < 3; ++n)
    for (int d = 0; d < 4; ++d) k.at(n, d) = krow.at(0, d);
  TensorF v = randn({3, 4}, rng);
  int out = g.attention(g.leaf(randn({2, 4}, rng)), g.leaf(k), g.leaf(v), 1);
  for (int m = 0; m < 2; ++m)
    for (int d = 0; d < 4; ++d) {
      float avg = (v.at(0, d) + v.at(1, d) + v.at(2, d)) / 3.0f;
      CHECK(g.val(out).at(m, d) == doctest::Approx(avg).epsilon(1e-5));
    }
}

TEST_CASE("attention matches explicit softmax oracle, 1 head") {
  GraphF g(false);
  Rng rng(23);
  TensorF q = randn({2, 4}, rng), k = randn({3, 4}, rng), v = randn({3, 4}, rng);
  int out = g.attention(g.leaf(q), g.leaf(k), g.leaf(v), 1);
  double sc = 1.0 / std::sqrt(4.0);
  for (int m = 0; m < 2; ++m) {
    double s[3], z = 0;
    for (int n = 0; n < 3; ++n) {
      s[n] = 0;
      for (int d = 0; d < 4; ++d) s[n] += static_cast<double>(q.at(m, d)) * k.at(n, d);
      s[n] = std::exp(s[n] * sc);
      z += s[n];
    }
    for (int d = 0; d < 4; ++d) {
      double ref = 0;
      for (int n = 0; n < 3; ++n) ref += s[n] / z * v.at(n, d);
      CHECK(g.val(out).at(m, d) == doctest::Approx(ref).epsilon(1e-6));
    }
  }
}

TEST_CASE("attention rows stay in the componentwise V envelope") {
  GraphF g(false);
  Rng rng(29);
  TensorF v = randn({5, 8}, rng);
  int out = g.attention(g.leaf(randn({4, 8}, rng, 2.0f)), g.leaf(randn({5, 8}, rng, 2.0f)),
                        g.leaf(v), 4);
  for (int m = 0; m < 4; ++m)
    for (int d = 0; d < 8; ++d) {
      float lo = 1e30f, hi = -1e30f;
      for (int n = 0; n < 5; ++n) {
        lo = std::min(lo, v.at(n, d));
        hi = std::max(hi, v.at(n, d));
      }
      CHECK(g.val(out).at(m, d) >= lo - 1e-5f);
      CHECK(g.val(out).at(m, d) <= hi + 1e-5f);
    }
}

TEST_CASE("softplus output strictly positive, large-x linear") {
  GraphF g(false);
  int out = g.softplus(g.leaf(TensorF({3}, {-30.0f, 0.0f, 30.0f})));
  CHECK(g.val(out).data[0] > 0.0f);
  CHECK(g.val(out).data[1] == doctest::Approx(std::log(2.0)));
  CHECK(g.val(out).data[2] == doctest::Approx(30.0f));
}

TEST_CASE("matmul and linear agree") {
  GraphF g(false);
  Rng rng(31);
  TensorF x = randn({3, 5}, rng), w = randn({4, 5}, rng), b = randn({4}, rng);
  int lin = g.linear(g.leaf(x), g.leaf(w), g.leaf(b));
  int mm = g.matmul(g.leaf(x), g.transpose(g.leaf(w)));
  for (int m = 0; m < 3; ++m)
    for (int n = 0; n < 4; ++n)
      CHECK(g.val(lin).at(m, n) == doctest::Approx(g.val(mm).at(m, n) + b.data[static_cast<size_t>(n)]));
}

TEST_CASE("ops are pure: same inputs give bitwise equal outputs") {
  Rng rng(37);
  TensorF in = randn({2, 6, 6}, rng), ker = randn({2, 2, 3, 3}, rng), bias = randn({2}, rng);
  GraphF g1(false), g2(false);
  int o1 = g1.conv2d(g1.leaf(in), g1.leaf(ker), g1.leaf(bias), 1, 1);
  int o2 = g2.conv2d(g2.leaf(in), g2.leaf(ker), g2.leaf(bias), 1, 1);
  CHECK(g1.val(o1).data == g2.val(o2).data);
}
