#pragma once

#include "dynavessel/volume.hpp"

#include <nlohmann/json.hpp>

#include <variant>

namespace dv {

/// 6-DOF rigid motion about a center.
///
/// T(p) = R (p - center) + center + translation, with R = Rz * Ry * Rx
/// (extrinsic rotations about x, then y, then z). Angles in radians,
/// translation and center in world mm.
struct RigidParams {
  Vec3 angles = Vec3::Zero();
  Vec3 translation = Vec3::Zero();
  Vec3 center = Vec3::Zero();

  static RigidParams identity(const Vec3& center = Vec3::Zero());
  /// Recovers parameters from a rigid homogeneous matrix, expressed about `center`.
  static RigidParams from_matrix(const Mat4& m, const Vec3& center = Vec3::Zero());

  Mat3 rotation() const;
  Mat4 matrix() const;
  RigidParams inverse() const;
  /// Same mapping, re-expressed about a different rotation center.
  RigidParams with_center(const Vec3& c) const;
  Vec3 apply(const Vec3& p) const;
};

/// a ∘ b: apply b first, then a. Result is expressed about b's center.
RigidParams compose(const RigidParams& a, const RigidParams& b);

struct AffineTransform {
  Mat4 matrix = Mat4::Identity();

  AffineTransform() = default;
  explicit AffineTransform(const Mat4& m);

  Vec3 apply(const Vec3& p) const;
  AffineTransform inverse() const;
};

/// Rigid 6 + anisotropic scale 3 + shear 3, about a center:
/// A = R * Shear * diag(scale), T(p) = A (p - c) + c + t.
struct AffineParams {
  RigidParams rigid;
  Vec3 scale = Vec3::Ones();
  Vec3 shear = Vec3::Zero();  // xy, xz, yz

  Mat4 matrix() const;
};

using Transform = std::variant<RigidParams, AffineTransform>;

Mat4 transform_matrix(const Transform& t);
Vec3 transform_point(const Transform& t, const Vec3& p);
Transform invert(const Transform& t);

nlohmann::json transform_to_json(const Transform& t);
Transform transform_from_json(const nlohmann::json& j);

}  // namespace dv
