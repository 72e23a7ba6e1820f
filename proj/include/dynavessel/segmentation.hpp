#pragma once

#include "dynavessel/volume.hpp"

#include <cstdint>
#include <vector>

namespace dv {

/// Local threshold parameters on intensities normalized to [0, 1].
struct PhansalkarParams {
  int window_radius = 15;  // voxels; cubic window of side 2r+1, clipped at borders
  double k = 0.25;
  double r = 0.5;
  double p = 2.0;
  double q = 10.0;

  void validate() const;
};

/// Normalized intensities are held as integer levels in [0, kNormLevels] so
/// window sums are exact.
inline constexpr std::int64_t kNormLevels = 65535;

/// T = m (1 + p exp(-q m) + k (s / R - 1)).
double phansalkar_threshold_value(double mean, double stddev, const PhansalkarParams& params);

/// Min-max normalization over `roi` (all voxels when null) to integer levels.
/// Voxels outside the ROI are clamped into range. Throws Normalization when
/// the ROI is constant or empty.
std::vector<std::int64_t> normalize_levels(const ScalarVolume& vol, const LabelVolume* roi);

/// Foreground where normalized value > local threshold. Voxels outside the
/// ROI are background.
LabelVolume phansalkar_threshold(const ScalarVolume& vol, const PhansalkarParams& params = {},
                                 const LabelVolume* roi = nullptr);

struct KapurResult {
  double threshold = 0.0;  // HU at the chosen bin edge
  int edge_bin = 0;        // first foreground bin
  double score = 0.0;      // summed class entropies
};

/// Maximum (Renyi-order) entropy threshold over a `bins`-bin histogram.
/// renyi_alpha == 1 is the Shannon (Kapur) criterion. Ties go to the lower edge.
KapurResult kapur_threshold(const ScalarVolume& vol, int bins = 256, double renyi_alpha = 1.0,
                            const LabelVolume* roi = nullptr);
/// Voxels falling in bins at or above the Kapur edge (inside the ROI).
LabelVolume kapur_segment(const ScalarVolume& vol, int bins = 256, double renyi_alpha = 1.0,
                          const LabelVolume* roi = nullptr);
/// Histogram bin of a value given the ROI range; shared with the mask builder.
int histogram_bin(double value, double lo, double hi, int bins);

enum class Connectivity { Six = 6, TwentySix = 26 };
Connectivity parse_connectivity(int n);

struct Components {
  VolumeGeometry geometry;
  std::vector<std::int32_t> ids;    // 0 background, 1.. in raster order of first voxel
  std::vector<std::size_t> sizes;   // sizes[id - 1]

  std::size_t count() const { return sizes.size(); }
  /// Component ids as 8-bit labels; throws Argument when more than 255 exist.
  LabelVolume to_labels() const;
};

Components connected_components(const LabelVolume& mask, Connectivity connectivity = Connectivity::TwentySix);
/// Keeps components with at least `min_voxels` voxels; output is binary.
LabelVolume remove_small_components(const LabelVolume& mask, Connectivity connectivity, std::size_t min_voxels);

/// Foreground voxels with at least one background (or out-of-grid) 6-neighbour.
VoxelSet extract_surface(const LabelVolume& mask);

/// Topology-preserving curve thinning (directional border sweeps, 26/6
/// simple-point test, end points kept).
VoxelSet skeletonize(const LabelVolume& mask);
/// Simple-point test on a 3x3x3 neighbourhood (index = x + 3y + 9z, centre 13).
bool is_simple_point(const std::uint8_t (&nbh)[27]);

}  // namespace dv
