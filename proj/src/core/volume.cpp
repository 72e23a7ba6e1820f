#include "dynavessel/volume.hpp"

#include "dynavessel/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dv {

VolumeGeometry::VolumeGeometry(std::array<int, 3> d, Vec3 sp, Vec3 org, Mat3 dir)
    : dims(d), spacing(std::move(sp)), origin(std::move(org)), direction(std::move(dir)) {
  validate();
}

void VolumeGeometry::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 1) fail(ErrorCode::Geometry, "volume dimensions must be >= 1");
    if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a]))
      fail(ErrorCode::Geometry, "voxel spacing must be positive");
  }
  const Mat3 gram = direction.transpose() * direction;
  if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6)
    fail(ErrorCode::Geometry, "direction matrix is not orthonormal");
}

Index3 VolumeGeometry::unravel(std::size_t idx) const {
  const std::size_t nx = static_cast<std::size_t>(dims[0]);
  const std::size_t ny = static_cast<std::size_t>(dims[1]);
  Index3 v;
  v.i = static_cast<int>(idx % nx);
  v.j = static_cast<int>((idx / nx) % ny);
  v.k = static_cast<int>(idx / (nx * ny));
  return v;
}

Vec3 VolumeGeometry::voxel_to_world(const Vec3& ijk) const {
  return origin + direction * spacing.cwiseProduct(ijk);
}

Vec3 VolumeGeometry::world_to_voxel(const Vec3& p) const {
  return (direction.transpose() * (p - origin)).cwiseQuotient(spacing);
}

Mat4 VolumeGeometry::affine() const {
  Mat4 m = Mat4::Identity();
  m.block<3, 3>(0, 0) = direction * spacing.asDiagonal();
  m.block<3, 1>(0, 3) = origin;
  return m;
}

bool VolumeGeometry::same_as(const VolumeGeometry& other, double tol) const {
  return dims == other.dims && (spacing - other.spacing).cwiseAbs().maxCoeff() <= tol &&
         (origin - other.origin).cwiseAbs().maxCoeff() <= tol &&
         (direction - other.direction).cwiseAbs().maxCoeff() <= tol;
}

ScalarVolume::ScalarVolume(VolumeGeometry geometry, float fill)
    : geometry_(std::move(geometry)), data_(geometry_.voxel_count(), fill) {}

ScalarVolume::ScalarVolume(VolumeGeometry geometry, std::vector<float> data)
    : geometry_(std::move(geometry)), data_(std::move(data)) {
  if (data_.size() != geometry_.voxel_count())
    fail(ErrorCode::Geometry, "data length does not match dimensions");
  for (float v : data_)
    if (!std::isfinite(v)) fail(ErrorCode::Format, "volume contains non-finite values");
}

LabelNames default_label_names() { return {{0, "background"}, {1, "artery"}, {2, "vein"}}; }

LabelVolume::LabelVolume(VolumeGeometry geometry, LabelNames names)
    : geometry_(std::move(geometry)), data_(geometry_.voxel_count(), 0), names_(std::move(names)) {}

LabelVolume::LabelVolume(VolumeGeometry geometry, std::vector<std::uint8_t> data, LabelNames names)
    : geometry_(std::move(geometry)), data_(std::move(data)), names_(std::move(names)) {
  if (data_.size() != geometry_.voxel_count())
    fail(ErrorCode::Geometry, "data length does not match dimensions");
}

void LabelVolume::ensure_names() {
  std::array<bool, 256> seen{};
  for (auto v : data_) seen[v] = true;
  if (!names_.count(0)) names_[0] = "background";
  for (int v = 1; v < 256; ++v)
    if (seen[v] && !names_.count(static_cast<std::uint8_t>(v)))
      names_[static_cast<std::uint8_t>(v)] = "label_" + std::to_string(v);
}

std::size_t LabelVolume::count(std::uint8_t label) const {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), label));
}

std::size_t LabelVolume::count_nonzero() const {
  return data_.size() - count(0);
}

LabelVolume LabelVolume::select(std::uint8_t label) const {
  LabelVolume out(geometry_, {{0, "background"}, {1, names_.count(label) ? names_.at(label) : "foreground"}});
  for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] = data_[i] == label ? 1 : 0;
  return out;
}

VoxelSet VoxelSet::from_mask(const LabelVolume& mask) {
  VoxelSet s;
  s.geometry = mask.geometry();
  const auto& d = mask.data();
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d[i]) s.indices.push_back(mask.geometry().unravel(i));
  return s;
}

LabelVolume VoxelSet::to_mask() const {
  LabelVolume m(geometry, {{0, "background"}, {1, "foreground"}});
  for (const auto& v : indices) m[geometry.linear(v)] = 1;
  return m;
}

std::string VoxelSet::to_text() const {
  std::ostringstream os;
  for (const auto& v : indices) os << v.i << ' ' << v.j << ' ' << v.k << '\n';
  return os.str();
}

VoxelSet VoxelSet::from_text(const std::string& text, const VolumeGeometry& geometry) {
  VoxelSet s;
  s.geometry = geometry;
  std::istringstream is(text);
  Index3 v;
  while (is >> v.i >> v.j >> v.k) {
    if (!geometry.contains(v.i, v.j, v.k)) fail(ErrorCode::Geometry, "voxel index outside grid");
    s.indices.push_back(v);
  }
  if (!is.eof()) fail(ErrorCode::Format, "malformed voxel list");
  s.normalize();
  return s;
}

void VoxelSet::normalize() {
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
}

float trilinear_sample_voxel(const ScalarVolume& vol, const Vec3& ijk, float fill) {
  const auto& g = vol.geometry();
  // Within half a voxel of the border we clamp instead of blending with the
  // fill, so the grid's own extent is fully interpolable.
  int base[3];
  double frac[3];
  for (int a = 0; a < 3; ++a) {
    const double c = ijk[a];
    const int n = g.dims[a];
    if (!(c >= -0.5) || !(c <= n - 0.5)) return fill;
    if (n == 1) {
      base[a] = 0;
      frac[a] = 0.0;
      continue;
    }
    double f = std::floor(c);
    int b = static_cast<int>(f);
    double t = c - f;
    if (b < 0) {
      b = 0;
      t = 0.0;
    } else if (b >= n - 1) {
      b = n - 2;
      t = (c >= n - 1) ? 1.0 : t;
    }
    base[a] = b;
    frac[a] = t;
  }
  const int sx = g.dims[0] > 1 ? 1 : 0;
  const std::size_t sy = g.dims[1] > 1 ? static_cast<std::size_t>(g.dims[0]) : 0;
  const std::size_t sz =
      g.dims[2] > 1 ? static_cast<std::size_t>(g.dims[0]) * static_cast<std::size_t>(g.dims[1]) : 0;
  const std::size_t o = g.linear(base[0], base[1], base[2]);
  const float* d = vol.data().data();
  const double fx = frac[0], fy = frac[1], fz = frac[2];
  const double c00 = d[o] * (1 - fx) + d[o + sx] * fx;
  const double c10 = d[o + sy] * (1 - fx) + d[o + sy + sx] * fx;
  const double c01 = d[o + sz] * (1 - fx) + d[o + sz + sx] * fx;
  const double c11 = d[o + sz + sy] * (1 - fx) + d[o + sz + sy + sx] * fx;
  const double c0 = c00 * (1 - fy) + c10 * fy;
  const double c1 = c01 * (1 - fy) + c11 * fy;
  return static_cast<float>(c0 * (1 - fz) + c1 * fz);
}

float trilinear_sample(const ScalarVolume& vol, const Vec3& world, float fill) {
  return trilinear_sample_voxel(vol, vol.geometry().world_to_voxel(world), fill);
}

std::uint8_t nearest_sample(const LabelVolume& vol, const Vec3& world) {
  const Vec3 c = vol.geometry().world_to_voxel(world);
  // round half up
  const int i = static_cast<int>(std::floor(c[0] + 0.5));
  const int j = static_cast<int>(std::floor(c[1] + 0.5));
  const int k = static_cast<int>(std::floor(c[2] + 0.5));
  if (!vol.geometry().contains(i, j, k)) return 0;
  return vol.at(i, j, k);
}

}  // namespace dv
