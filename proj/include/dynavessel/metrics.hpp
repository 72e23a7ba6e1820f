#pragma once

#include "dynavessel/volume.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace dv {

/// |A ∩ P| / |A| over nonzero voxels. Throws EmptyReference when A is empty.
double mdc(const LabelVolume& gt_mask, const LabelVolume& pred_mask);

/// Exact nearest-neighbour queries over the world positions of a voxel set.
/// Uniform hash grid (cell = max spacing) searched in expanding rings.
class DistanceIndex {
public:
  explicit DistanceIndex(const VoxelSet& points);

  /// Distance in mm to the nearest indexed point.
  double nearest(const Vec3& world) const;
  std::size_t size() const { return points_.size(); }

private:
  using Key = std::uint64_t;
  std::array<std::int64_t, 3> cell_of(const Vec3& p) const;
  static Key key(std::int64_t x, std::int64_t y, std::int64_t z);

  double cell_ = 1.0;
  std::vector<Vec3> points_;
  std::unordered_map<Key, std::vector<std::uint32_t>> cells_;
  std::array<std::int64_t, 3> lo_{}, hi_{};
};

/// Mean over GT surface points of the distance to the nearest predicted
/// surface point (mm). Throws EmptySurface when either set is empty.
double adhd(const VoxelSet& gt_surface, const VoxelSet& pred_surface);

/// |C ∩ P| / |C|. Throws EmptyReference when the centerline is empty.
double tsens(const VoxelSet& gt_centerline, const LabelVolume& pred_mask);

/// Throws EmptyReference on an empty set.
double mean_hu(const ScalarVolume& vol, const VoxelSet& points);

enum class Phase { Arterial, Venous, Unknown };
const char* phase_name(Phase p);
/// Arterial iff the artery centerline mean is strictly higher.
Phase classify_phase(const ScalarVolume& vol, const VoxelSet& artery_cl, const VoxelSet& vein_cl);

struct LabelMetrics {
  std::uint8_t gt_label = 0;
  std::uint8_t pred_label = 0;
  std::string name;
  bool absent = false;  // no GT voxels
  double mdc = 0.0;
  double tsens = 0.0;
  std::optional<double> adhd;  // unset when the prediction is empty
  std::size_t gt_voxels = 0;
};

struct MetricsReport {
  std::string case_id;
  std::vector<LabelMetrics> per_label;  // ascending GT label
  Phase phase = Phase::Unknown;
  std::map<std::string, double> mean_hu;  // "artery", "vein"
  nlohmann::json provenance = nlohmann::json::object();

  nlohmann::json to_json() const;
};

/// gt label -> pred label.
using Pairing = std::map<std::uint8_t, std::uint8_t>;

/// Accepts {"pairing": {...}, "gt": {...}, "pred": {...}} with label names or
/// numbers as keys/values, or a flat {"1": 1, ...} map.
Pairing pairing_from_json(const nlohmann::json& j, const LabelNames& gt_names, const LabelNames& pred_names);

struct EvaluateOptions {
  /// Precomputed GT centerlines per GT label; otherwise the GT is skeletonized.
  std::map<std::uint8_t, VoxelSet> centerlines;
};

MetricsReport evaluate_case(const LabelVolume& gt, const LabelVolume& pred, const Pairing& pairing,
                            const ScalarVolume* vol = nullptr, const EvaluateOptions& opts = {});

/// One row per (case, label): case_id,label,mdc,tsens,adhd_mm,gt_voxels,phase.
std::string reports_csv(const std::vector<MetricsReport>& reports);

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation, 0 for a single value
  std::size_t n = 0;
};
MeanSd mean_sd(const std::vector<double>& values);

/// Per label name: mean ± sd of mdc, tsens and adhd over cases where present.
nlohmann::json aggregate_reports(const std::vector<MetricsReport>& reports);

}  // namespace dv
