#pragma once

#include "dynavessel/volume.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace dv {

/// Resamples onto an isotropic grid, keeping origin and direction.
/// Output dims are max(1, round_half_up(n * spacing / target)).
ScalarVolume resample_isotropic(const ScalarVolume& vol, double target_spacing);
VolumeGeometry isotropic_geometry(const VolumeGeometry& g, double target_spacing);

/// Samples `vol` at every voxel center of `target` (trilinear).
ScalarVolume resample_to(const ScalarVolume& vol, const VolumeGeometry& target, float fill = kAirHu);
/// Nearest-neighbour resampling of labels onto `target`.
LabelVolume resample_labels_to(const LabelVolume& vol, const VolumeGeometry& target);

/// out[v] = vol[v] where mask[v] != 0, else fill.
ScalarVolume apply_mask(const ScalarVolume& vol, const LabelVolume& mask, float fill);

enum class Axis { X = 0, Y = 1, Z = 2 };
Axis parse_axis(const std::string& name);

struct Image2D {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major

  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

/// Maximum intensity projection along `axis`, windowed linearly to [0, 255].
Image2D mip_render(const ScalarVolume& vol, Axis axis, double lo, double hi);
void write_png(const Image2D& image, const std::filesystem::path& path);

/// Separable Gaussian blur with sigma in mm; edges replicate.
ScalarVolume gaussian_smooth(const ScalarVolume& vol, double sigma_mm);
/// Averages factor^3 blocks; the last partial block is averaged over what exists.
ScalarVolume downsample(const ScalarVolume& vol, int factor);

/// Binary mask of voxels strictly above `threshold`.
LabelVolume threshold_above(const ScalarVolume& vol, float threshold);

}  // namespace dv
