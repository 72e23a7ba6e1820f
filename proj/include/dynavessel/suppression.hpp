#pragma once

#include "dynavessel/registration.hpp"
#include "dynavessel/volume.hpp"

#include <string>

namespace dv {

/// max(post - baseline, 0). With `pre_register` the baseline is first rigidly
/// registered onto the post frame; voxels the warped baseline does not cover
/// are 0. Without it the geometries must match.
ScalarVolume subtract_baseline(const ScalarVolume& post, const ScalarVolume& baseline, bool pre_register,
                               const RegistrationOptions& opts = {});

/// Affine-registers the template onto the patient and pulls the template ROI
/// into patient space (nearest neighbour). Output is 0/1.
LabelVolume head_roi_mask(const ScalarVolume& patient, const ScalarVolume& templ, const LabelVolume& template_roi,
                          const RegistrationOptions& opts = {});

/// Keeps the reference value only where it strictly exceeds the counterpart.
inline float suppress_voxelwise(float s_ref, float s_other) { return s_ref > s_other ? s_ref : 0.0f; }

/// Element-wise suppress_voxelwise over two volumes on the same grid.
ScalarVolume suppress_volume(const ScalarVolume& ref, const ScalarVolume& other);

/// Which images are warped into the other phase before the comparison.
enum class Alg1Operand { Subtracted, Raw };
Alg1Operand parse_alg1_operand(const std::string& s);
const char* alg1_operand_name(Alg1Operand op);

struct SeparationOptions {
  Alg1Operand operand = Alg1Operand::Subtracted;
  /// false treats the two phases as already aligned (identity transforms).
  bool register_phases = true;
  RegistrationOptions registration;
};

struct SeparationResult {
  ScalarVolume s_star_a;
  ScalarVolume s_star_v;
  RigidParams g_ra;  // arterial-space points -> venous space
  RigidParams g_rv;  // venous-space points -> arterial space
  double ncc_ra = 1.0;
  double ncc_rv = 1.0;
};

/// G_rv registers X_a (moving) onto X_v (fixed), G_ra the reverse. The
/// counterpart of each phase is warped into its space and compared voxel-wise.
SeparationResult vessel_separate(const ScalarVolume& s_a, const ScalarVolume& s_v, const ScalarVolume& x_a,
                                 const ScalarVolume& x_v, const SeparationOptions& opts = {});

}  // namespace dv
