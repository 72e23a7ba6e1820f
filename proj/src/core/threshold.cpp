#include "dynavessel/error.hpp"
#include "dynavessel/parallel.hpp"
#include "dynavessel/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dv {

void PhansalkarParams::validate() const {
  if (window_radius < 1) fail(ErrorCode::Argument, "Phansalkar window radius must be >= 1");
  if (!(r > 0.0)) fail(ErrorCode::Argument, "Phansalkar R must be positive");
}

double phansalkar_threshold_value(double mean, double stddev, const PhansalkarParams& params) {
  return mean * (1.0 + params.p * std::exp(-params.q * mean) + params.k * (stddev / params.r - 1.0));
}

std::vector<std::int64_t> normalize_levels(const ScalarVolume& vol, const LabelVolume* roi) {
  if (roi && roi->geometry().dims != vol.geometry().dims) fail(ErrorCode::Geometry, "ROI dimensions differ from volume");
  float lo = std::numeric_limits<float>::infinity();
  float hi = -std::numeric_limits<float>::infinity();
  for (std::size_t i = 0; i < vol.size(); ++i) {
    if (roi && !(*roi)[i]) continue;
    lo = std::min(lo, vol[i]);
    hi = std::max(hi, vol[i]);
  }
  if (!(hi > lo)) fail(ErrorCode::Normalization, "volume is constant (or empty) over the normalization region");
  const double range = static_cast<double>(hi) - static_cast<double>(lo);
  std::vector<std::int64_t> out(vol.size());
  for (std::size_t i = 0; i < vol.size(); ++i) {
    const double t = (static_cast<double>(vol[i]) - lo) / range;
    const double level = std::floor(std::clamp(t, 0.0, 1.0) * kNormLevels + 0.5);
    out[i] = static_cast<std::int64_t>(level);
  }
  return out;
}

namespace {

/// In-place clipped box sum of half-width r along one axis.
void box_sum_axis(std::vector<std::int64_t>& data, const VolumeGeometry& g, int axis, int r) {
  const int n = g.dims[axis];
  const std::ptrdiff_t stride =
      axis == 0 ? 1 : axis == 1 ? g.dims[0] : static_cast<std::ptrdiff_t>(g.dims[0]) * g.dims[1];
  const int a1 = axis == 0 ? 1 : 0;
  const int a2 = axis == 2 ? 1 : 2;
  const int lines = g.dims[a1] * g.dims[a2];
  parallel_for(lines, [&](std::ptrdiff_t line) {
    int c[3] = {0, 0, 0};
    c[a1] = static_cast<int>(line % g.dims[a1]);
    c[a2] = static_cast<int>(line / g.dims[a1]);
    c[axis] = 0;
    const std::size_t base = g.linear(c[0], c[1], c[2]);
    std::vector<std::int64_t> prefix(static_cast<std::size_t>(n) + 1, 0);
    for (int i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + data[base + i * stride];
    for (int i = 0; i < n; ++i) {
      const int lo = std::max(0, i - r);
      const int hi = std::min(n - 1, i + r);
      data[base + i * stride] = prefix[hi + 1] - prefix[lo];
    }
  });
}

int clipped_extent(int i, int n, int r) { return std::min(n - 1, i + r) - std::max(0, i - r) + 1; }

}  // namespace

LabelVolume phansalkar_threshold(const ScalarVolume& vol, const PhansalkarParams& params, const LabelVolume* roi) {
  params.validate();
  const auto& g = vol.geometry();
  const std::vector<std::int64_t> levels = normalize_levels(vol, roi);
  std::vector<std::int64_t> sum = levels;
  std::vector<std::int64_t> sum_sq(levels.size());
  for (std::size_t i = 0; i < levels.size(); ++i) sum_sq[i] = levels[i] * levels[i];
  for (int axis = 0; axis < 3; ++axis) {
    box_sum_axis(sum, g, axis, params.window_radius);
    box_sum_axis(sum_sq, g, axis, params.window_radius);
  }
  LabelVolume out(g, {{0, "background"}, {1, "vessel"}});
  const int r = params.window_radius;
  parallel_for(g.dims[2], [&](std::ptrdiff_t kk) {
    const int k = static_cast<int>(kk);
    const int cz = clipped_extent(k, g.dims[2], r);
    for (int j = 0; j < g.dims[1]; ++j) {
      const int cy = clipped_extent(j, g.dims[1], r);
      for (int i = 0; i < g.dims[0]; ++i) {
        const std::size_t idx = g.linear(i, j, k);
        if (roi && !(*roi)[idx]) continue;
        const double n = static_cast<double>(clipped_extent(i, g.dims[0], r)) * cy * cz;
        const double scale = static_cast<double>(kNormLevels);
        const double mean = static_cast<double>(sum[idx]) / n / scale;
        const double var = static_cast<double>(sum_sq[idx]) / n / (scale * scale) - mean * mean;
        const double sd = std::sqrt(std::max(var, 0.0));
        const double value = static_cast<double>(levels[idx]) / scale;
        out[idx] = value > phansalkar_threshold_value(mean, sd, params) ? 1 : 0;
      }
    }
  });
  return out;
}

int histogram_bin(double value, double lo, double hi, int bins) {
  const double t = (value - lo) / (hi - lo);
  const int b = static_cast<int>(std::floor(t * bins));
  return std::clamp(b, 0, bins - 1);
}

namespace {

struct RoiRange {
  double lo, hi;
};

RoiRange roi_range(const ScalarVolume& vol, const LabelVolume* roi) {
  if (roi && roi->geometry().dims != vol.geometry().dims) fail(ErrorCode::Geometry, "ROI dimensions differ from volume");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = 0; i < vol.size(); ++i) {
    if (roi && !(*roi)[i]) continue;
    lo = std::min(lo, static_cast<double>(vol[i]));
    hi = std::max(hi, static_cast<double>(vol[i]));
  }
  if (!(hi > lo)) fail(ErrorCode::DegenerateHistogram, "histogram is degenerate: input is constant over the ROI");
  return {lo, hi};
}

}  // namespace

KapurResult kapur_threshold(const ScalarVolume& vol, int bins, double renyi_alpha, const LabelVolume* roi) {
  if (bins < 2) fail(ErrorCode::Argument, "at least two histogram bins are required");
  if (!(renyi_alpha > 0.0)) fail(ErrorCode::Argument, "Renyi order must be positive");
  const RoiRange range = roi_range(vol, roi);
  std::vector<double> hist(static_cast<std::size_t>(bins), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < vol.size(); ++i) {
    if (roi && !(*roi)[i]) continue;
    hist[static_cast<std::size_t>(histogram_bin(vol[i], range.lo, range.hi, bins))] += 1.0;
    total += 1.0;
  }
  const bool shannon = std::abs(renyi_alpha - 1.0) < 1e-12;
  // prefix sums of p, and of p ln p (Shannon) or p^alpha (Renyi)
  std::vector<double> cum_p(static_cast<std::size_t>(bins) + 1, 0.0);
  std::vector<double> cum_t(static_cast<std::size_t>(bins) + 1, 0.0);
  std::vector<double> cum_n(static_cast<std::size_t>(bins) + 1, 0.0);
  for (int b = 0; b < bins; ++b) {
    cum_n[b + 1] = cum_n[b] + hist[static_cast<std::size_t>(b)];
    const double p = hist[static_cast<std::size_t>(b)] / total;
    const double term = p > 0 ? (shannon ? p * std::log(p) : std::pow(p, renyi_alpha)) : 0.0;
    cum_p[b + 1] = cum_p[b] + p;
    cum_t[b + 1] = cum_t[b] + term;
  }
  auto class_entropy = [&](double mass, double term) {
    if (shannon) return std::log(mass) - term / mass;
    return (std::log(term) - renyi_alpha * std::log(mass)) / (1.0 - renyi_alpha);
  };
  std::vector<double> scores(static_cast<std::size_t>(bins), -std::numeric_limits<double>::infinity());
  double best = -std::numeric_limits<double>::infinity();
  for (int k = 1; k < bins; ++k) {
    const double pb = cum_p[k];
    const double pf = cum_p[bins] - cum_p[k];
    if (cum_n[k] == 0.0 || cum_n[bins] - cum_n[k] == 0.0) continue;
    const double s = class_entropy(pb, cum_t[k]) + class_entropy(pf, cum_t[bins] - cum_t[k]);
    scores[static_cast<std::size_t>(k)] = s;
    best = std::max(best, s);
  }
  if (!std::isfinite(best)) fail(ErrorCode::DegenerateHistogram, "no bin edge separates two nonempty classes");
  const double tol = 1e-12 * std::max(1.0, std::abs(best));
  KapurResult res;
  for (int k = 1; k < bins; ++k)
    if (scores[static_cast<std::size_t>(k)] >= best - tol) {
      res.edge_bin = k;
      res.score = scores[static_cast<std::size_t>(k)];
      break;
    }
  res.threshold = range.lo + (range.hi - range.lo) * res.edge_bin / bins;
  return res;
}

LabelVolume kapur_segment(const ScalarVolume& vol, int bins, double renyi_alpha, const LabelVolume* roi) {
  const KapurResult res = kapur_threshold(vol, bins, renyi_alpha, roi);
  const RoiRange range = roi_range(vol, roi);
  LabelVolume out(vol.geometry(), {{0, "background"}, {1, "vessel"}});
  for (std::size_t i = 0; i < vol.size(); ++i) {
    if (roi && !(*roi)[i]) continue;
    out[i] = histogram_bin(vol[i], range.lo, range.hi, bins) >= res.edge_bin ? 1 : 0;
  }
  return out;
}

}  // namespace dv
