#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sdepth/graph.hpp"
#include "sdepth/rng.hpp"
#include "sdepth/tensor.hpp"

namespace sdepth {

struct GradCheckReport {
  std::string op_name;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

// Builds the op under test inside a fresh graph; returns the output var id.
using GradCheckFn = std::function<int(GraphD&, const std::vector<int>&)>;

namespace detail {

// Scalar probe L(x) = mean(w . f(x)) with a fixed random weighting so the full
// Jacobian is exercised by a single backward pass.
inline double probe_forward(const GradCheckFn& fn, const std::vector<TensorD>& inputs,
                            const TensorD& w) {
  GraphD g(false);
  std::vector<int> ids;
  ids.reserve(inputs.size());
  for (const auto& in : inputs) ids.push_back(g.leaf(in, false));
  int out = fn(g, ids);
  const TensorD& o = g.val(out);
  double acc = 0;
  for (int64_t i = 0; i < o.numel(); ++i) acc += o[i] * w[i];
  return acc / static_cast<double>(o.numel());
}

inline double max_rel_err_once(const std::string&, const GradCheckFn& fn,
                               const std::vector<TensorD>& inputs, uint64_t seed) {
  // Analytic gradients.
  GraphD g(true);
  std::vector<int> ids;
  for (const auto& in : inputs) ids.push_back(g.leaf(in, true));
  int out = fn(g, ids);
  Rng rng(Rng::mix(seed, 0xabcdef));
  TensorD w = TensorD::zeros(g.val(out).shape);
  for (int64_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-1.0, 1.0);
  int wleaf = g.leaf(w, false);
  int loss = g.mean_all(g.mul(out, wleaf));
  g.backward(loss);

  const double step = 1e-4;
  double worst = 0;
  std::vector<TensorD> probe = inputs;
  for (size_t i = 0; i < inputs.size(); ++i) {
    const TensorD& ga = g.grad(static_cast<int>(ids[i]));
    for (int64_t j = 0; j < probe[i].numel(); ++j) {
      double orig = probe[i][j];
      probe[i][j] = orig + step;
      double fp = probe_forward(fn, probe, w);
      probe[i][j] = orig - step;
      double fm = probe_forward(fn, probe, w);
      probe[i][j] = orig;
      double fd = (fp - fm) / (2.0 * step);
      double an = ga[j];
      double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-2});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace detail

// Compares reverse-mode gradients against central finite differences in
// 64-bit arithmetic. A failure is retried once with perturbed inputs, in case
// the random draw landed on a non-differentiable point.
inline GradCheckReport grad_check(const std::string& op_name, const GradCheckFn& fn,
                                  std::vector<TensorD> inputs, double tol = 1e-3,
                                  uint64_t seed = 1) {
  GradCheckReport rep;
  rep.op_name = op_name;
  rep.tolerance = tol;
  rep.max_rel_err = detail::max_rel_err_once(op_name, fn, inputs, seed);
  if (rep.max_rel_err > tol) {
    Rng rng(Rng::mix(seed, 0x5eed));
    for (auto& in : inputs)
      for (int64_t j = 0; j < in.numel(); ++j) in[j] += 0.013 * rng.normal();
    rep.max_rel_err = detail::max_rel_err_once(op_name, fn, inputs, seed + 1);
  }
  rep.passed = rep.max_rel_err <= tol;
  return rep;
}

}  // namespace sdepth
