#include "sdepth/metrics.hpp"

#include <cmath>
#include <sstream>

#include "sdepth/errors.hpp"

namespace sdepth {

void DepthRaster::validate() const {
  if (depth.ndim() != 2) throw DimensionError("DepthRaster: depth must be (H,W)");
  if (mask.shape != depth.shape) throw DimensionError("DepthRaster: mask/depth shape mismatch");
  for (int i = 0; i < depth.numel(); ++i) {
    if (!mask.data[static_cast<size_t>(i)]) continue;
    float v = depth.data[static_cast<size_t>(i)];
    if (!std::isfinite(v) || v <= 0.0f)
      throw MetricError("DepthRaster: valid pixel not strictly positive and finite");
  }
}

DepthRaster DepthRaster::dense(TensorF d) {
  DepthRaster r;
  r.mask = Mask::full(d.shape, 1);
  r.depth = std::move(d);
  return r;
}

namespace {

void check_pair(const DepthRaster& a, const DepthRaster& b, const char* who) {
  if (a.depth.shape != b.depth.shape)
    throw DimensionError(std::string(who) + ": pred/gt shape mismatch");
}

}  // namespace

AlignParams align_scale_shift(const std::vector<DepthRaster>& pred,
                              const std::vector<DepthRaster>& gt) {
  if (pred.size() != gt.size() || pred.empty())
    throw MetricError("align_scale_shift: sequences must be nonempty and equal length");
  double sp = 0, sg = 0, spp = 0, spg = 0;
  int64_t n = 0;
  for (size_t f = 0; f < pred.size(); ++f) {
    check_pair(pred[f], gt[f], "align_scale_shift");
    const auto& p = pred[f].depth.data;
    const auto& g = gt[f].depth.data;
    for (int i = 0; i < pred[f].depth.numel(); ++i) {
      size_t ii = static_cast<size_t>(i);
      if (!pred[f].mask.data[ii] || !gt[f].mask.data[ii]) continue;
      double pv = p[ii], gv = g[ii];
      sp += pv;
      sg += gv;
      spp += pv * pv;
      spg += pv * gv;
      ++n;
    }
  }
  if (n < 2) throw MetricError("align_scale_shift: fewer than 2 valid pixels");
  double nn = static_cast<double>(n);
  double var = spp - sp * sp / nn;
  if (var == 0.0) throw MetricError("align_scale_shift: degenerate prediction (zero variance)");
  double cov = spg - sp * sg / nn;
  AlignParams a;
  a.scale = cov / var;
  a.shift = (sg - a.scale * sp) / nn;
  return a;
}

double align_scale(const DepthRaster& pred, const DepthRaster& gt) {
  check_pair(pred, gt, "align_scale");
  double spg = 0, spp = 0;
  int64_t n = 0;
  for (int i = 0; i < pred.depth.numel(); ++i) {
    size_t ii = static_cast<size_t>(i);
    if (!pred.mask.data[ii] || !gt.mask.data[ii]) continue;
    double pv = pred.depth.data[ii], gv = gt.depth.data[ii];
    spg += pv * gv;
    spp += pv * pv;
    ++n;
  }
  if (n == 0) throw MetricError("align_scale: empty mask");
  if (spp == 0.0) throw MetricError("align_scale: all-zero prediction");
  return spg / spp;
}

DepthRaster apply_align(const DepthRaster& pred, const AlignParams& a) {
  DepthRaster out = pred;
  for (auto& v : out.depth.data)
    v = static_cast<float>(std::max(a.scale * v + a.shift, 1e-6));  // clamp for ratio metrics
  return out;
}

double abs_rel(const DepthRaster& pred_aligned, const DepthRaster& gt) {
  check_pair(pred_aligned, gt, "abs_rel");
  double acc = 0;
  int64_t n = 0;
  for (int i = 0; i < gt.depth.numel(); ++i) {
    size_t ii = static_cast<size_t>(i);
    if (!pred_aligned.mask.data[ii] || !gt.mask.data[ii]) continue;
    double p = pred_aligned.depth.data[ii], g = gt.depth.data[ii];
    acc += std::abs(p - g) / g;
    ++n;
  }
  if (n == 0) throw MetricError("abs_rel: empty mask");
  return acc / static_cast<double>(n);
}

double delta1(const DepthRaster& pred_aligned, const DepthRaster& gt) {
  check_pair(pred_aligned, gt, "delta1");
  int64_t hit = 0, n = 0;
  for (int i = 0; i < gt.depth.numel(); ++i) {
    size_t ii = static_cast<size_t>(i);
    if (!pred_aligned.mask.data[ii] || !gt.mask.data[ii]) continue;
    double p = std::max(static_cast<double>(pred_aligned.depth.data[ii]), 1e-6);
    double g = gt.depth.data[ii];
    if (std::max(p / g, g / p) < 1.25) ++hit;
    ++n;
  }
  if (n == 0) throw MetricError("delta1: empty mask");
  return static_cast<double>(hit) / static_cast<double>(n);
}

Mask boundary_contours(const DepthRaster& d, double t_percent) {
  int h = d.h(), w = d.w();
  double thr = 1.0 + t_percent / 100.0;
  Mask out = Mask::zeros({4, h, w});
  auto val = [&](int r, int c) { return static_cast<double>(d.depth.at(r, c)); };
  auto ok = [&](int r, int c) { return d.mask.at(r, c) != 0; };
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      if (!ok(r, c)) continue;
      if (c + 1 < w && ok(r, c + 1)) {
        if (val(r, c + 1) / val(r, c) > thr) out.at(0, r, c) = 1;  // i -> right neighbor
        if (val(r, c) / val(r, c + 1) > thr) out.at(2, r, c) = 1;  // reverse direction
      }
      if (r + 1 < h && ok(r + 1, c)) {
        if (val(r + 1, c) / val(r, c) > thr) out.at(1, r, c) = 1;  // i -> down neighbor
        if (val(r, c) / val(r + 1, c) > thr) out.at(3, r, c) = 1;
      }
    }
  return out;
}

double boundary_f1(const DepthRaster& pred, const DepthRaster& gt, const BoundaryConfig& cfg) {
  check_pair(pred, gt, "boundary_f1");
  std::vector<double> ts = cfg.thresholds();
  double wsum = 0;
  for (double t : ts) wsum += t;
  double score = 0;
  for (double t : ts) {
    Mask cg = boundary_contours(gt, t);
    Mask cp = boundary_contours(pred, t);
    int64_t ng = 0, np = 0, tp = 0;
    for (int i = 0; i < cg.numel(); ++i) {
      size_t ii = static_cast<size_t>(i);
      ng += cg.data[ii];
      np += cp.data[ii];
      tp += (cg.data[ii] && cp.data[ii]) ? 1 : 0;
    }
    double f1;
    if (ng == 0 && np == 0) {
      f1 = 1.0;
    } else if (ng == 0 || np == 0) {
      f1 = 0.0;
    } else {
      // As printed in the source: P sums over gt contours, R over predicted;
      // swap_pr restores the conventional definitions.
      double p = static_cast<double>(tp) / static_cast<double>(ng);
      double r = static_cast<double>(tp) / static_cast<double>(np);
      if (cfg.swap_pr) std::swap(p, r);
      f1 = (p + r == 0.0) ? 0.0 : 2.0 * p * r / (p + r);
    }
    score += t / wsum * f1;
  }
  return score;
}

double temporal_drift_std(const std::vector<DepthRaster>& pred_seq,
                          const std::vector<DepthRaster>& gt_seq, int prefix_len) {
  if (pred_seq.size() != gt_seq.size())
    throw MetricError("temporal_drift_std: sequence length mismatch");
  if (prefix_len < 1 || prefix_len > static_cast<int>(pred_seq.size()))
    throw MetricError("temporal_drift_std: prefix length out of range");
  std::vector<double> scales;
  scales.reserve(static_cast<size_t>(prefix_len));
  for (int f = 0; f < prefix_len; ++f)
    scales.push_back(align_scale(pred_seq[static_cast<size_t>(f)], gt_seq[static_cast<size_t>(f)]));
  double mean = 0;
  for (double s : scales) mean += s;
  mean /= static_cast<double>(scales.size());
  double var = 0;
  for (double s : scales) var += (s - mean) * (s - mean);
  var /= static_cast<double>(scales.size());  // population variance: prefix 1 is legal
  return std::sqrt(var);
}

std::string SequenceReport::to_json() const {
  std::ostringstream os;
  os.precision(12);
  os << "{\"abs_rel\":" << abs_rel << ",\"delta1\":" << delta1 << ",\"boundary_f1\":" << boundary_f1
     << ",\"scale\":" << scale << ",\"shift\":" << shift << ",\"drift_prefixes\":[";
  for (size_t i = 0; i < drift_prefixes.size(); ++i)
    os << (i ? "," : "") << drift_prefixes[i];
  os << "],\"drift_std\":[";
  for (size_t i = 0; i < drift_std.size(); ++i) os << (i ? "," : "") << drift_std[i];
  os << "]}";
  return os.str();
}

SequenceReport evaluate_sequence(const std::vector<DepthRaster>& pred,
                                 const std::vector<DepthRaster>& gt,
                                 const std::vector<int>& drift_prefixes,
                                 const BoundaryConfig& bcfg) {
  SequenceReport rep;
  AlignParams a = align_scale_shift(pred, gt);
  rep.scale = a.scale;
  rep.shift = a.shift;
  double ar = 0, d1 = 0, bf = 0;
  for (size_t f = 0; f < pred.size(); ++f) {
    DepthRaster pa = apply_align(pred[f], a);
    ar += abs_rel(pa, gt[f]);
    d1 += delta1(pa, gt[f]);
    bf += boundary_f1(pred[f], gt[f], bcfg);  // scale-invariant, no alignment needed
  }
  double n = static_cast<double>(pred.size());
  rep.abs_rel = ar / n;
  rep.delta1 = d1 / n;
  rep.boundary_f1 = bf / n;
  rep.drift_prefixes = drift_prefixes;
  for (int p : drift_prefixes) rep.drift_std.push_back(temporal_drift_std(pred, gt, p));
  return rep;
}

}  // namespace sdepth
