#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace dv {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

struct Index3 {
  int i = 0;
  int j = 0;
  int k = 0;

  friend bool operator==(const Index3&, const Index3&) = default;
  friend auto operator<=>(const Index3& a, const Index3& b) {
    // raster order: x fastest
    if (a.k != b.k) return a.k <=> b.k;
    if (a.j != b.j) return a.j <=> b.j;
    return a.i <=> b.i;
  }
};

/// Grid layout and voxel-to-world mapping shared by scalar and label volumes.
///
/// world = origin + direction * diag(spacing) * (i, j, k)
struct VolumeGeometry {
  std::array<int, 3> dims{1, 1, 1};
  Vec3 spacing = Vec3::Ones();
  Vec3 origin = Vec3::Zero();
  Mat3 direction = Mat3::Identity();

  VolumeGeometry() = default;
  VolumeGeometry(std::array<int, 3> d, Vec3 sp, Vec3 org = Vec3::Zero(),
                 Mat3 dir = Mat3::Identity());

  /// Throws Geometry when dims/spacing/direction violate the invariants.
  void validate() const;

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  std::size_t linear(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * dims[1] + j) * dims[0] + i;
  }
  std::size_t linear(const Index3& v) const { return linear(v.i, v.j, v.k); }
  Index3 unravel(std::size_t idx) const;
  bool contains(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < dims[0] && j < dims[1] && k < dims[2];
  }

  Vec3 voxel_to_world(const Vec3& ijk) const;
  Vec3 voxel_to_world(const Index3& v) const {
    return voxel_to_world(Vec3(v.i, v.j, v.k));
  }
  Vec3 world_to_voxel(const Vec3& p) const;

  /// 4x4 voxel-to-world affine (the NIfTI sform).
  Mat4 affine() const;

  /// Same grid within tolerance.
  bool same_as(const VolumeGeometry& other, double tol = 1e-6) const;
};

/// Dense HU volume, x-fastest.
class ScalarVolume {
public:
  ScalarVolume() = default;
  explicit ScalarVolume(VolumeGeometry geometry, float fill = 0.0f);
  ScalarVolume(VolumeGeometry geometry, std::vector<float> data);

  const VolumeGeometry& geometry() const { return geometry_; }
  const std::vector<float>& data() const { return data_; }
  std::vector<float>& data() { return data_; }
  std::size_t size() const { return data_.size(); }

  float operator[](std::size_t idx) const { return data_[idx]; }
  float& operator[](std::size_t idx) { return data_[idx]; }
  float at(int i, int j, int k) const { return data_[geometry_.linear(i, j, k)]; }
  float& at(int i, int j, int k) { return data_[geometry_.linear(i, j, k)]; }

private:
  VolumeGeometry geometry_;
  std::vector<float> data_;
};

using LabelNames = std::map<std::uint8_t, std::string>;

/// Standard two-class naming used throughout (0 background, 1 artery, 2 vein).
LabelNames default_label_names();

/// Small-integer class map on a grid. Trilinear sampling is deliberately not
/// offered for this type.
class LabelVolume {
public:
  LabelVolume() = default;
  explicit LabelVolume(VolumeGeometry geometry, LabelNames names = {});
  LabelVolume(VolumeGeometry geometry, std::vector<std::uint8_t> data, LabelNames names = {});

  const VolumeGeometry& geometry() const { return geometry_; }
  const std::vector<std::uint8_t>& data() const { return data_; }
  std::vector<std::uint8_t>& data() { return data_; }
  std::size_t size() const { return data_.size(); }

  std::uint8_t operator[](std::size_t idx) const { return data_[idx]; }
  std::uint8_t& operator[](std::size_t idx) { return data_[idx]; }
  std::uint8_t at(int i, int j, int k) const { return data_[geometry_.linear(i, j, k)]; }
  std::uint8_t& at(int i, int j, int k) { return data_[geometry_.linear(i, j, k)]; }

  const LabelNames& label_names() const { return names_; }
  void set_label_names(LabelNames names) { names_ = std::move(names); }

  /// Adds a generic "label_<n>" name for every unnamed nonzero value.
  void ensure_names();
  std::size_t count(std::uint8_t label) const;
  std::size_t count_nonzero() const;

  /// Binary 0/1 mask of voxels equal to `label`.
  LabelVolume select(std::uint8_t label) const;

private:
  VolumeGeometry geometry_;
  std::vector<std::uint8_t> data_;
  LabelNames names_;
};

/// Integer voxel coordinates on a grid: surfaces, centerlines.
struct VoxelSet {
  VolumeGeometry geometry;
  std::vector<Index3> indices;  // sorted raster order, unique

  bool empty() const { return indices.empty(); }
  std::size_t size() const { return indices.size(); }

  static VoxelSet from_mask(const LabelVolume& mask);
  LabelVolume to_mask() const;
  /// Newline-delimited "i j k".
  std::string to_text() const;
  static VoxelSet from_text(const std::string& text, const VolumeGeometry& geometry);
  void normalize();
};

/// Out-of-grid fill for scalar sampling: air.
inline constexpr float kAirHu = -1024.0f;

float trilinear_sample(const ScalarVolume& vol, const Vec3& world, float fill = kAirHu);
/// Same, in continuous voxel coordinates.
float trilinear_sample_voxel(const ScalarVolume& vol, const Vec3& ijk, float fill = kAirHu);
std::uint8_t nearest_sample(const LabelVolume& vol, const Vec3& world);

}  // namespace dv
