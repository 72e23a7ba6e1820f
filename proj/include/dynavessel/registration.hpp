#pragma once

#include "dynavessel/transform.hpp"
#include "dynavessel/volume.hpp"

#include <optional>
#include <vector>

namespace dv {

struct RegistrationOptions {
  int pyramid_levels = 3;          // downsample factor 2 per level
  int max_iterations = 200;        // per level
  double convergence_tol = 1e-4;   // norm of the per-parameter step vector
  double sampling_fraction = 0.25; // stratified: every round(1/f)-th eligible voxel
  float intensity_floor = -500.0f; // fixed voxels at or below this are ignored
  double smoothing_mm = 2.0;       // Gaussian sigma on the downsampled levels
  double initial_rotation_step = 2.0 * 3.14159265358979323846 / 180.0;
  double initial_translation_step = 2.0;
  double initial_scale_step = 0.05;

  void validate() const;
};

struct RegistrationResult {
  Transform transform;
  double final_ncc = 0.0;
  /// NCC after each optimizer sweep, one vector per pyramid level (coarse first).
  std::vector<std::vector<double>> ncc_history;
};

/// Pearson correlation of intensities over the voxels where mask != 0
/// (all voxels when no mask). Throws DegenerateMetric on constant input.
double ncc(const ScalarVolume& a, const ScalarVolume& b, const LabelVolume* mask = nullptr);

/// Pull-back resampling: out[v] = moving(T(world(v))).
ScalarVolume resample_with_transform(const ScalarVolume& moving, const Transform& t,
                                     const VolumeGeometry& reference, float fill = kAirHu);
LabelVolume resample_labels_with_transform(const LabelVolume& moving, const Transform& t,
                                           const VolumeGeometry& reference);

/// World centroid of voxels above `floor`; grid center when none qualify.
Vec3 intensity_centroid(const ScalarVolume& vol, float floor);

/// Finds T maximizing NCC(fixed, moving∘T). T maps fixed-space points into
/// moving space. The result's rotation center is the fixed volume's centroid.
RegistrationResult register_rigid(const ScalarVolume& fixed, const ScalarVolume& moving,
                                  const RegistrationOptions& opts = {});
RegistrationResult register_affine(const ScalarVolume& fixed, const ScalarVolume& moving,
                                   const RegistrationOptions& opts = {});

}  // namespace dv
