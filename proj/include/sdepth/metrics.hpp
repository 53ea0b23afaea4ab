#pragma once

#include <string>
#include <vector>

#include "sdepth/config.hpp"
#include "sdepth/tensor.hpp"

namespace sdepth {

// Positive depth where mask != 0; masked-out pixels carry no meaning.
struct DepthRaster {
  TensorF depth;  // (H, W)
  Mask mask;      // (H, W), nonzero = valid

  int h() const { return depth.size(0); }
  int w() const { return depth.size(1); }
  void validate() const;

  static DepthRaster dense(TensorF d);  // all-valid mask
};

struct AlignParams {
  double scale = 1.0;
  double shift = 0.0;
};

// Global least squares over every valid pixel of the whole sequence:
// argmin_{s,t} sum (s*p + t - g)^2.
AlignParams align_scale_shift(const std::vector<DepthRaster>& pred,
                              const std::vector<DepthRaster>& gt);

// Per-frame scale-only fit s = sum(p*g) / sum(p*p).
double align_scale(const DepthRaster& pred, const DepthRaster& gt);

DepthRaster apply_align(const DepthRaster& pred, const AlignParams& a);

double abs_rel(const DepthRaster& pred_aligned, const DepthRaster& gt);
double delta1(const DepthRaster& pred_aligned, const DepthRaster& gt);

// Directed 4-neighbor occluding contours: for the pair (i, j),
// contour iff d(j)/d(i) > 1 + t/100. Layout: (2, H, W) where plane 0 is the
// right-neighbor pair (i=(r,c), j=(r,c+1)) and plane 1 the down-neighbor pair;
// the reverse direction of each pair is stored at planes 2 and 3 of the
// returned (4, H, W) field. Pairs touching a masked-out pixel are false.
Mask boundary_contours(const DepthRaster& d, double t_percent);

double boundary_f1(const DepthRaster& pred, const DepthRaster& gt,
                   const BoundaryConfig& cfg = BoundaryConfig{});

// Population std of per-frame align_scale over the first `prefix_len` frames.
double temporal_drift_std(const std::vector<DepthRaster>& pred_seq,
                          const std::vector<DepthRaster>& gt_seq, int prefix_len);

// Per-sequence evaluation bundle (metrics computed on the globally aligned
// prediction sequence).
struct SequenceReport {
  double abs_rel = 0, delta1 = 0, boundary_f1 = 0;
  double scale = 1, shift = 0;
  std::vector<int> drift_prefixes;
  std::vector<double> drift_std;
  std::string to_json() const;
};

SequenceReport evaluate_sequence(const std::vector<DepthRaster>& pred,
                                 const std::vector<DepthRaster>& gt,
                                 const std::vector<int>& drift_prefixes = {},
                                 const BoundaryConfig& bcfg = BoundaryConfig{});

}  // namespace sdepth
