#pragma once

#include "dynavessel/transform.hpp"
#include "dynavessel/volume.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace dv::phantom {

/// Gamma-variate enhancement curve:
/// peak * ((t - onset) / time_to_peak)^alpha * exp(alpha * (1 - (t - onset) / time_to_peak)),
/// zero for t <= onset.
struct TimeAttenuationCurve {
  double onset = 0.0;
  double time_to_peak = 1.0;
  double alpha = 3.0;
  double peak = 0.0;

  double eval(double t) const;
};

inline double tac_eval(const TimeAttenuationCurve& c, double t) { return c.eval(t); }

enum class VesselKind { Artery, Vein };

struct VesselSegment {
  std::vector<Vec3> points;  // world mm
  double radius = 1.0;       // mm
};

struct VesselTree {
  std::vector<VesselSegment> segments;
  VesselKind kind = VesselKind::Artery;
  TimeAttenuationCurve tac;
};

struct SkullSpec {
  Vec3 center = Vec3::Zero();
  Vec3 radii = Vec3(56.0, 60.0, 52.0);  // outer surface, mm
  double thickness = 5.0;
  double bone_hu = 1200.0;
};

struct PhantomSpec {
  VolumeGeometry geometry;
  SkullSpec skull;
  double soft_tissue_hu = 40.0;
  std::vector<VesselTree> arteries;
  std::vector<VesselTree> veins;
  std::vector<double> timepoints;
  std::vector<RigidParams> motion;  // per frame; empty means all identity
  double noise_sigma = 0.0;
  std::uint64_t rng_seed = 20250101;
  /// Template head used for ROI alignment: this skull shrunk by 1/template_scale.
  double template_scale = 1.08;

  /// Throws Spec on any violated invariant.
  void validate() const;
  RigidParams motion_at(std::size_t frame) const;
};

/// Default arterial and venous curves (peaks at 27.6 s and 45.3 s).
TimeAttenuationCurve default_artery_tac();
TimeAttenuationCurve default_vein_tac();
/// 19 acquisition times over [0, 60] s containing 27.6 and 45.3.
std::vector<double> default_timepoints();
/// Centered 128 mm field of view; two artery trees and one vein tree.
PhantomSpec default_spec(int dims = 128, double spacing = 1.0);

PhantomSpec spec_from_json(const nlohmann::json& j);
nlohmann::json spec_to_json(const PhantomSpec& spec);

enum class Tissue : std::uint8_t { Background = 0, SoftTissue = 1, Bone = 2, Artery = 3, Vein = 4 };

/// Analytic classifier over the spec's geometry, accelerated by a bucket grid.
class AnatomyModel {
public:
  explicit AnatomyModel(const PhantomSpec& spec);

  struct Hit {
    Tissue tissue = Tissue::Background;
    int tree = -1;  // index into arteries (Artery) or veins (Vein)
  };
  Hit classify(const Vec3& world) const;

private:
  struct Capsule {
    Vec3 a, b;
    double radius;
    int tree;
    bool artery;
  };
  SkullSpec skull_;
  std::vector<Capsule> capsules_;
  Vec3 lo_;
  double cell_ = 8.0;
  std::array<int, 3> cells_{};
  std::vector<std::vector<int>> buckets_;
};

struct Anatomy {
  LabelVolume tissue;       // Tissue codes
  LabelVolume tree_index;   // 1 + tree index for vessel voxels
  LabelVolume bone;
  LabelVolume soft_tissue;
  LabelVolume artery;
  LabelVolume vein;
  VoxelSet artery_centerline;
  VoxelSet vein_centerline;
};

Anatomy build_anatomy(const PhantomSpec& spec);

/// HU image at time t: composed on the frame-0 grid, then pulled back through
/// `motion` (trilinear, air outside) and given per-slice Gaussian noise.
ScalarVolume render_frame(const Anatomy& anatomy, const PhantomSpec& spec, double t, const RigidParams& motion,
                          std::size_t frame_index = 0);

struct Frame {
  double time = 0.0;
  ScalarVolume volume;
};

struct PhantomStudy {
  std::vector<Frame> frames;
  LabelVolume gt_artery;
  LabelVolume gt_vein;
  VoxelSet gt_artery_centerline;
  VoxelSet gt_vein_centerline;
  std::vector<RigidParams> true_motion;
  std::size_t baseline_index = 0;

  /// 0 background, 1 artery, 2 vein.
  LabelVolume gt_labels() const;
  /// Frame whose time is closest to t.
  std::size_t frame_near(double t) const;
};

PhantomStudy generate_study(const PhantomSpec& spec);

/// Template CT (skull and soft tissue only, no vessels) and its head ROI.
std::pair<ScalarVolume, LabelVolume> make_template(const PhantomSpec& spec);

/// frame_{t}.nii.gz, gt_*.nii.gz, centerline volumes and text lists,
/// motion.json, template files and study.json.
void write_study(const PhantomStudy& study, const PhantomSpec& spec, const std::filesystem::path& dir);
std::string frame_filename(double t);

}  // namespace dv::phantom
