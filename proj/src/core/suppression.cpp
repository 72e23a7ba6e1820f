#include "dynavessel/suppression.hpp"

#include "dynavessel/error.hpp"
#include "dynavessel/parallel.hpp"

#include <cmath>
#include <limits>

namespace dv {

ScalarVolume subtract_baseline(const ScalarVolume& post, const ScalarVolume& baseline, bool pre_register,
                               const RegistrationOptions& opts) {
  const auto& g = post.geometry();
  ScalarVolume aligned;
  if (pre_register) {
    const RegistrationResult reg = register_rigid(post, baseline, opts);
    aligned = resample_with_transform(baseline, reg.transform, g, std::numeric_limits<float>::quiet_NaN());
  } else {
    if (!g.same_as(baseline.geometry())) fail(ErrorCode::Geometry, "baseline geometry differs from the post-contrast frame");
    aligned = baseline;
  }
  ScalarVolume out(g);
  parallel_for(static_cast<std::ptrdiff_t>(out.size()), [&](std::ptrdiff_t i) {
    const float b = aligned[static_cast<std::size_t>(i)];
    if (std::isnan(b)) return;
    out[static_cast<std::size_t>(i)] = std::max(post[static_cast<std::size_t>(i)] - b, 0.0f);
  });
  return out;
}

LabelVolume head_roi_mask(const ScalarVolume& patient, const ScalarVolume& templ, const LabelVolume& template_roi,
                          const RegistrationOptions& opts) {
  if (!templ.geometry().same_as(template_roi.geometry()))
    fail(ErrorCode::Geometry, "template and template ROI grids differ");
  LabelVolume out(patient.geometry(), {{0, "background"}, {1, "roi"}});
  if (template_roi.count_nonzero() == 0) return out;
  const RegistrationResult reg = register_affine(patient, templ, opts);
  const LabelVolume warped = resample_labels_with_transform(template_roi, reg.transform, patient.geometry());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = warped[i] ? 1 : 0;
  return out;
}

ScalarVolume suppress_volume(const ScalarVolume& ref, const ScalarVolume& other) {
  if (ref.geometry().dims != other.geometry().dims) fail(ErrorCode::Geometry, "suppression operands differ in size");
  ScalarVolume out(ref.geometry());
  parallel_for(static_cast<std::ptrdiff_t>(out.size()), [&](std::ptrdiff_t i) {
    const auto k = static_cast<std::size_t>(i);
    out[k] = suppress_voxelwise(ref[k], other[k]);
  });
  return out;
}

Alg1Operand parse_alg1_operand(const std::string& s) {
  if (s == "subtracted") return Alg1Operand::Subtracted;
  if (s == "raw") return Alg1Operand::Raw;
  fail(ErrorCode::Argument, "alg1 operand must be 'subtracted' or 'raw', got '" + s + "'");
}

const char* alg1_operand_name(Alg1Operand op) { return op == Alg1Operand::Raw ? "raw" : "subtracted"; }

SeparationResult vessel_separate(const ScalarVolume& s_a, const ScalarVolume& s_v, const ScalarVolume& x_a,
                                 const ScalarVolume& x_v, const SeparationOptions& opts) {
  if (!s_a.geometry().same_as(x_a.geometry())) fail(ErrorCode::Geometry, "S_a and X_a grids differ");
  if (!s_v.geometry().same_as(x_v.geometry())) fail(ErrorCode::Geometry, "S_v and X_v grids differ");
  SeparationResult res;
  if (opts.register_phases) {
    const RegistrationResult rv = register_rigid(x_v, x_a, opts.registration);
    const RegistrationResult ra = register_rigid(x_a, x_v, opts.registration);
    res.g_rv = std::get<RigidParams>(rv.transform);
    res.g_ra = std::get<RigidParams>(ra.transform);
    res.ncc_rv = rv.final_ncc;
    res.ncc_ra = ra.final_ncc;
  } else if (!s_a.geometry().same_as(s_v.geometry())) {
    fail(ErrorCode::Geometry, "unregistered phases must share a grid");
  }
  const bool raw = opts.operand == Alg1Operand::Raw;
  const ScalarVolume& from_v = raw ? x_v : s_v;
  const ScalarVolume& from_a = raw ? x_a : s_a;
  const float fill = raw ? kAirHu : 0.0f;
  const ScalarVolume v_to_a = resample_with_transform(from_v, res.g_ra, s_a.geometry(), fill);
  const ScalarVolume a_to_v = resample_with_transform(from_a, res.g_rv, s_v.geometry(), fill);
  res.s_star_a = suppress_volume(s_a, v_to_a);
  res.s_star_v = suppress_volume(s_v, a_to_v);
  return res;
}

}  // namespace dv
