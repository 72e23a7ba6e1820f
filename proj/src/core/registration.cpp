#include "dynavessel/registration.hpp"

#include "dynavessel/error.hpp"
#include "dynavessel/imaging.hpp"
#include "dynavessel/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dv {

void RegistrationOptions::validate() const {
  if (pyramid_levels < 1) fail(ErrorCode::Argument, "pyramid_levels must be >= 1");
  if (max_iterations < 1) fail(ErrorCode::Argument, "max_iterations must be >= 1");
  if (!(convergence_tol > 0.0)) fail(ErrorCode::Argument, "convergence_tol must be positive");
  if (!(sampling_fraction > 0.0 && sampling_fraction <= 1.0))
    fail(ErrorCode::Argument, "sampling_fraction must lie in (0, 1]");
  if (smoothing_mm < 0.0) fail(ErrorCode::Argument, "smoothing_mm must be non-negative");
}

namespace {

struct Moments {
  double n = 0, sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;

  Moments& operator+=(const Moments& o) {
    n += o.n;
    sa += o.sa;
    sb += o.sb;
    saa += o.saa;
    sbb += o.sbb;
    sab += o.sab;
    return *this;
  }

  /// NaN when either side has no variance.
  double correlation() const {
    if (n < 2) return std::numeric_limits<double>::quiet_NaN();
    const double va = saa - sa * sa / n;
    const double vb = sbb - sb * sb / n;
    const double cov = sab - sa * sb / n;
    const double scale_a = std::max(std::abs(saa), 1.0);
    const double scale_b = std::max(std::abs(sbb), 1.0);
    if (va <= 1e-12 * scale_a || vb <= 1e-12 * scale_b) return std::numeric_limits<double>::quiet_NaN();
    return std::clamp(cov / std::sqrt(va * vb), -1.0, 1.0);
  }
};

constexpr std::ptrdiff_t kChunks = 64;

/// Fixed-image sample points with NCC evaluation against a moving image.
/// With `symmetric`, a sample counts when either image is above the floor;
/// otherwise only the fixed image decides.
class SampledMetric {
public:
  SampledMetric(const ScalarVolume& fixed, const ScalarVolume& moving, float floor, int stride, bool symmetric = false)
      : moving_(moving), floor_(floor), symmetric_(symmetric) {
    const auto& g = fixed.geometry();
    std::size_t eligible = 0;
    for (std::size_t idx = 0; idx < fixed.size(); ++idx) {
      if (!symmetric && !(fixed[idx] > floor)) continue;
      if (eligible++ % static_cast<std::size_t>(stride) != 0) continue;
      points_.push_back(g.voxel_to_world(g.unravel(idx)));
      values_.push_back(fixed[idx]);
    }
    const auto& mg = moving.geometry();
    world_to_voxel_ = Mat4::Identity();
    const Mat3 inv = (mg.direction * mg.spacing.asDiagonal()).inverse();
    world_to_voxel_.block<3, 3>(0, 0) = inv;
    world_to_voxel_.block<3, 1>(0, 3) = -inv * mg.origin;
  }

  std::size_t size() const { return points_.size(); }

  double evaluate(const Mat4& t) const {
    const Mat4 m = world_to_voxel_ * t;
    const Mat3 a = m.block<3, 3>(0, 0);
    const Vec3 b = m.block<3, 1>(0, 3);
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(points_.size());
    const Moments total = ordered_sum<Moments>(kChunks, [&](std::ptrdiff_t c) {
      Moments part;
      const std::ptrdiff_t lo = n * c / kChunks, hi = n * (c + 1) / kChunks;
      for (std::ptrdiff_t s = lo; s < hi; ++s) {
        const double f = values_[static_cast<std::size_t>(s)];
        const double v = trilinear_sample_voxel(moving_, a * points_[static_cast<std::size_t>(s)] + b);
        if (symmetric_ && !(f > floor_) && !(v > floor_)) continue;
        part.n += 1;
        part.sa += f;
        part.sb += v;
        part.saa += f * f;
        part.sbb += v * v;
        part.sab += f * v;
      }
      return part;
    });
    return total.correlation();
  }

private:
  const ScalarVolume& moving_;
  double floor_;
  bool symmetric_;
  std::vector<Vec3> points_;
  std::vector<double> values_;
  Mat4 world_to_voxel_;
};

int sampling_stride(double fraction) {
  return std::max(1, static_cast<int>(std::floor(1.0 / fraction + 0.5)));
}

struct Parameterization {
  Vec3 center;
  int dof = 6;  // 6 rigid, 9 adds scale, 12 adds shear

  int size() const { return dof; }
  bool affine() const { return dof > 6; }

  AffineParams params(const std::vector<double>& x) const {
    AffineParams p;
    p.rigid.center = center;
    p.rigid.angles = {x[0], x[1], x[2]};
    p.rigid.translation = {x[3], x[4], x[5]};
    if (dof >= 9) p.scale = {x[6], x[7], x[8]};
    if (dof >= 12) p.shear = {x[9], x[10], x[11]};
    return p;
  }

  Mat4 matrix(const std::vector<double>& x) const { return params(x).matrix(); }
};

struct LevelResult {
  std::vector<double> x;
  std::vector<double> history;
};

LevelResult coordinate_search(const SampledMetric& metric, const Parameterization& param, std::vector<double> x,
                              std::vector<double> steps, const RegistrationOptions& opts, bool coarsest) {
  LevelResult out;
  double best = metric.evaluate(param.matrix(x));
  if (std::isnan(best)) {
    if (coarsest) fail(ErrorCode::RegistrationFailed, "similarity metric is degenerate at the initial pose");
    best = -std::numeric_limits<double>::infinity();
  }
  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    const std::vector<double> sweep_start = x;
    for (int p = 0; p < param.size(); ++p) {
      bool moved = false;
      for (double dir : {1.0, -1.0}) {
        std::vector<double> trial = x;
        trial[p] += dir * steps[p];
        const double v = metric.evaluate(param.matrix(trial));
        if (!std::isnan(v) && v > best) {
          best = v;
          x = std::move(trial);
          moved = true;
          break;
        }
      }
      if (!moved) steps[p] *= 0.5;
    }
    // pattern move along the sweep's net displacement, for coupled parameters
    if (x != sweep_start) {
      std::vector<double> trial = x;
      for (std::size_t p = 0; p < x.size(); ++p) trial[p] += x[p] - sweep_start[p];
      const double v = metric.evaluate(param.matrix(trial));
      if (!std::isnan(v) && v > best) {
        best = v;
        x = std::move(trial);
      }
    }
    out.history.push_back(best);
    double norm = 0.0;
    for (double s : steps) norm += s * s;
    if (std::sqrt(norm) < opts.convergence_tol) break;
  }
  out.x = std::move(x);
  return out;
}

RegistrationResult run_pyramid(const ScalarVolume& fixed, const ScalarVolume& moving, const RegistrationOptions& opts,
                               const Parameterization& param, std::vector<double>& x) {
  opts.validate();
  RegistrationResult result;
  const int levels = opts.pyramid_levels;
  const int stride = sampling_stride(opts.sampling_fraction);
  for (int level = levels - 1; level >= 0; --level) {
    const int factor = 1 << level;
    ScalarVolume f_level = fixed;
    ScalarVolume m_level = moving;
    if (factor > 1) {
      f_level = downsample(gaussian_smooth(fixed, opts.smoothing_mm), factor);
      m_level = downsample(gaussian_smooth(moving, opts.smoothing_mm), factor);
    }
    // scale changes make a fixed-only sample set penalize growth more than shrinkage
    SampledMetric metric(f_level, m_level, opts.intensity_floor, stride, param.affine());
    if (metric.size() < 2) {
      if (level == levels - 1) fail(ErrorCode::RegistrationFailed, "too few fixed voxels above the intensity floor");
      continue;
    }
    const double scale = static_cast<double>(factor) / static_cast<double>(1 << (levels - 1));
    std::vector<double> steps(static_cast<std::size_t>(param.size()));
    for (int p = 0; p < param.size(); ++p) {
      const double base = p < 3 ? opts.initial_rotation_step : p < 6 ? opts.initial_translation_step : opts.initial_scale_step;
      steps[static_cast<std::size_t>(p)] = base * scale;
    }
    LevelResult lr = coordinate_search(metric, param, x, steps, opts, level == levels - 1);
    x = lr.x;
    result.ncc_history.push_back(std::move(lr.history));
  }
  SampledMetric full(fixed, moving, opts.intensity_floor, 1, param.affine());
  if (full.size() < 2) fail(ErrorCode::RegistrationFailed, "too few fixed voxels above the intensity floor");
  const AffineParams p = param.params(x);
  result.final_ncc = full.evaluate(p.matrix());
  if (std::isnan(result.final_ncc)) fail(ErrorCode::RegistrationFailed, "similarity metric is degenerate at the final pose");
  if (param.affine())
    result.transform = AffineTransform(p.matrix());
  else
    result.transform = p.rigid;
  return result;
}

}  // namespace

double ncc(const ScalarVolume& a, const ScalarVolume& b, const LabelVolume* mask) {
  if (a.geometry().dims != b.geometry().dims) fail(ErrorCode::Geometry, "NCC inputs differ in dimensions");
  if (mask && mask->geometry().dims != a.geometry().dims) fail(ErrorCode::Geometry, "NCC mask differs in dimensions");
  const auto& g = a.geometry();
  const std::size_t slab = static_cast<std::size_t>(g.dims[0]) * g.dims[1];
  const Moments m = ordered_sum<Moments>(g.dims[2], [&](std::ptrdiff_t k) {
    Moments part;
    const std::size_t lo = static_cast<std::size_t>(k) * slab;
    for (std::size_t i = lo; i < lo + slab; ++i) {
      if (mask && !(*mask)[i]) continue;
      const double x = a[i], y = b[i];
      part.n += 1;
      part.sa += x;
      part.sb += y;
      part.saa += x * x;
      part.sbb += y * y;
      part.sab += x * y;
    }
    return part;
  });
  if (m.n < 2) fail(ErrorCode::DegenerateMetric, "NCC needs at least two voxels");
  const double r = m.correlation();
  if (std::isnan(r)) fail(ErrorCode::DegenerateMetric, "NCC input is constant over the mask");
  return r;
}

ScalarVolume resample_with_transform(const ScalarVolume& moving, const Transform& t, const VolumeGeometry& reference,
                                     float fill) {
  ScalarVolume out(reference);
  const auto& mg = moving.geometry();
  const Mat3 inv = (mg.direction * mg.spacing.asDiagonal()).inverse();
  const Mat4 tm = transform_matrix(t);
  // reference voxel -> moving voxel, one affine map
  const Mat4 ref_v2w = reference.affine();
  Mat4 w2v = Mat4::Identity();
  w2v.block<3, 3>(0, 0) = inv;
  w2v.block<3, 1>(0, 3) = -inv * mg.origin;
  const Mat4 m = w2v * tm * ref_v2w;
  const Mat3 a = m.block<3, 3>(0, 0);
  const Vec3 b = m.block<3, 1>(0, 3);
  parallel_for(reference.dims[2], [&](std::ptrdiff_t k) {
    for (int j = 0; j < reference.dims[1]; ++j) {
      const Vec3 row = a * Vec3(0, j, static_cast<double>(k)) + b;
      float* dst = &out[reference.linear(0, j, static_cast<int>(k))];
      for (int i = 0; i < reference.dims[0]; ++i) dst[i] = trilinear_sample_voxel(moving, row + a.col(0) * i, fill);
    }
  });
  return out;
}

LabelVolume resample_labels_with_transform(const LabelVolume& moving, const Transform& t,
                                           const VolumeGeometry& reference) {
  LabelVolume out(reference, moving.label_names());
  parallel_for(reference.dims[2], [&](std::ptrdiff_t k) {
    for (int j = 0; j < reference.dims[1]; ++j)
      for (int i = 0; i < reference.dims[0]; ++i) {
        const Vec3 p = reference.voxel_to_world(Vec3(i, j, static_cast<double>(k)));
        out.at(i, j, static_cast<int>(k)) = nearest_sample(moving, transform_point(t, p));
      }
  });
  return out;
}

Vec3 intensity_centroid(const ScalarVolume& vol, float floor) {
  const auto& g = vol.geometry();
  Vec3 acc = Vec3::Zero();
  double n = 0;
  for (std::size_t idx = 0; idx < vol.size(); ++idx) {
    if (!(vol[idx] > floor)) continue;
    const Index3 v = g.unravel(idx);
    acc += Vec3(v.i, v.j, v.k);
    n += 1;
  }
  if (n == 0) return g.voxel_to_world(Vec3(0.5 * (g.dims[0] - 1), 0.5 * (g.dims[1] - 1), 0.5 * (g.dims[2] - 1)));
  return g.voxel_to_world(acc / n);
}

RegistrationResult register_rigid(const ScalarVolume& fixed, const ScalarVolume& moving, const RegistrationOptions& opts) {
  Parameterization param{intensity_centroid(fixed, opts.intensity_floor), 6};
  std::vector<double> x(6, 0.0);
  return run_pyramid(fixed, moving, opts, param, x);
}

RegistrationResult register_affine(const ScalarVolume& fixed, const ScalarVolume& moving, const RegistrationOptions& opts) {
  const RegistrationResult rigid = register_rigid(fixed, moving, opts);
  const auto& rp = std::get<RigidParams>(rigid.transform);
  RegistrationResult best;
  best.transform = AffineTransform(rp.matrix());
  best.final_ncc = SampledMetric(fixed, moving, opts.intensity_floor, 1, true).evaluate(rp.matrix());
  best.ncc_history = rigid.ncc_history;
  auto keep = [&](const RegistrationResult& r) {
    best.ncc_history.insert(best.ncc_history.end(), r.ncc_history.begin(), r.ncc_history.end());
    if (r.final_ncc > best.final_ncc) {
      best.transform = r.transform;
      best.final_ncc = r.final_ncc;
    }
  };
  // A rigid fit between differently sized heads can settle on a large spurious
  // rotation, so the scale search also starts from the unrotated pose.
  RegistrationOptions fine = opts;
  fine.pyramid_levels = 1;
  const std::vector<double> starts[2] = {
      {rp.angles[0], rp.angles[1], rp.angles[2], rp.translation[0], rp.translation[1], rp.translation[2], 1, 1, 1, 0,
       0, 0},
      {0, 0, 0, 0, 0, 0, 1, 1, 1, 0, 0, 0}};
  for (std::vector<double> x : starts) {
    // scale over the full pyramid, shear only as a final full-resolution refinement
    keep(run_pyramid(fixed, moving, opts, Parameterization{rp.center, 9}, x));
    keep(run_pyramid(fixed, moving, fine, Parameterization{rp.center, 12}, x));
  }
  return best;
}

}  // namespace dv
