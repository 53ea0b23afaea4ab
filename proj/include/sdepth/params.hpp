#pragma once

#include <map>
#include <string>

#include "sdepth/config.hpp"
#include "sdepth/graph.hpp"
#include "sdepth/rng.hpp"
#include "sdepth/tensor.hpp"

namespace sdepth {

// Named parameter tensors. Ordered map so iteration (checkpointing, optimizer
// sweeps) is deterministic.
struct ParamStore {
  std::map<std::string, TensorF> tensors;

  bool has(const std::string& name) const { return tensors.count(name) != 0; }

  TensorF& at(const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw DimensionError("param not found: " + name);
    return it->second;
  }

  const TensorF& at(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw DimensionError("param not found: " + name);
    return it->second;
  }

  void add(const std::string& name, TensorF t) {
    if (has(name)) throw DimensionError("duplicate param: " + name);
    tensors.emplace(name, std::move(t));
  }

  int64_t count(const std::string& prefix = "") const {
    int64_t n = 0;
    for (const auto& [k, v] : tensors)
      if (k.rfind(prefix, 0) == 0) n += v.numel();
    return n;
  }
};

// Lazily binds store parameters as graph leaves, one leaf per name per graph,
// so gradients accumulate across repeated uses (e.g. frames of a clip).
class Binder {
 public:
  Binder(GraphF& g, const ParamStore& ps, bool trainable)
      : g_(&g), ps_(&ps), trainable_(trainable) {}

  int operator()(const std::string& name) {
    auto it = ids_.find(name);
    if (it != ids_.end()) return it->second;
    int id = g_->leaf(ps_->at(name), trainable_);
    ids_.emplace(name, id);
    return id;
  }

  const std::map<std::string, int>& bound() const { return ids_; }
  GraphF& graph() { return *g_; }
  bool trainable() const { return trainable_; }

 private:
  GraphF* g_;
  const ParamStore* ps_;
  bool trainable_;
  std::map<std::string, int> ids_;
};

// Parameter initialization. Zero-initialized output projections (temporal
// stack output, fusion output) make both modules exact identities at step 0.
void init_backbone_params(ParamStore& ps, const std::string& prefix, const ModelConfig& cfg,
                          Rng& rng);
void init_temporal_params(ParamStore& ps, const std::string& prefix, const TemporalConfig& cfg,
                          int dim, Rng& rng);
void init_fusion_params(ParamStore& ps, const std::string& prefix, int s_dim, int l_dim,
                        int blocks, Rng& rng);

}  // namespace sdepth
