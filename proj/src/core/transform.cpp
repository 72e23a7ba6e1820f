#include "dynavessel/transform.hpp"

#include "dynavessel/error.hpp"

#include <algorithm>
#include <cmath>

namespace dv {

namespace {

Mat3 euler_zyx(const Vec3& a) {
  const Eigen::AngleAxisd rx(a[0], Vec3::UnitX());
  const Eigen::AngleAxisd ry(a[1], Vec3::UnitY());
  const Eigen::AngleAxisd rz(a[2], Vec3::UnitZ());
  return (rz * ry * rx).toRotationMatrix();
}

Vec3 angles_from_rotation(const Mat3& r) {
  // R = Rz(c) Ry(b) Rx(a); r(2,0) = -sin(b)
  const double sb = std::clamp(-r(2, 0), -1.0, 1.0);
  const double b = std::asin(sb);
  double a, c;
  if (std::abs(sb) < 1.0 - 1e-12) {
    a = std::atan2(r(2, 1), r(2, 2));
    c = std::atan2(r(1, 0), r(0, 0));
  } else {
    // gimbal lock: fold everything into the x angle
    c = 0.0;
    a = std::atan2(-r(1, 2), r(1, 1));
  }
  return {a, b, c};
}

Vec3 json_vec3(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array() || j.at(key).size() != 3)
    fail(ErrorCode::Format, std::string("transform JSON field '") + key + "' must be a 3-vector");
  return {j.at(key)[0].get<double>(), j.at(key)[1].get<double>(), j.at(key)[2].get<double>()};
}

}  // namespace

RigidParams RigidParams::identity(const Vec3& center) {
  RigidParams p;
  p.center = center;
  return p;
}

Mat3 RigidParams::rotation() const { return euler_zyx(angles); }

Mat4 RigidParams::matrix() const {
  const Mat3 r = rotation();
  Mat4 m = Mat4::Identity();
  m.block<3, 3>(0, 0) = r;
  m.block<3, 1>(0, 3) = center + translation - r * center;
  return m;
}

RigidParams RigidParams::from_matrix(const Mat4& m, const Vec3& center) {
  RigidParams p;
  const Mat3 r = m.block<3, 3>(0, 0);
  p.angles = angles_from_rotation(r);
  p.center = center;
  // m(p) = r p + o  =  r (p - c) + c + t  =>  t = o + r c - c
  const Vec3 o = m.block<3, 1>(0, 3);
  p.translation = o + r * center - center;
  return p;
}

RigidParams RigidParams::inverse() const {
  Mat4 inv = Mat4::Identity();
  const Mat3 rt = rotation().transpose();
  inv.block<3, 3>(0, 0) = rt;
  inv.block<3, 1>(0, 3) = -rt * matrix().block<3, 1>(0, 3);
  return from_matrix(inv, center);
}

RigidParams RigidParams::with_center(const Vec3& c) const { return from_matrix(matrix(), c); }

Vec3 RigidParams::apply(const Vec3& p) const { return rotation() * (p - center) + center + translation; }

RigidParams compose(const RigidParams& a, const RigidParams& b) {
  return RigidParams::from_matrix(a.matrix() * b.matrix(), b.center);
}

AffineTransform::AffineTransform(const Mat4& m) : matrix(m) {
  if (std::abs(m.block<3, 3>(0, 0).determinant()) <= 1e-12)
    fail(ErrorCode::Argument, "affine transform is singular");
  matrix.row(3) << 0, 0, 0, 1;
}

Vec3 AffineTransform::apply(const Vec3& p) const {
  return matrix.block<3, 3>(0, 0) * p + matrix.block<3, 1>(0, 3);
}

AffineTransform AffineTransform::inverse() const { return AffineTransform(matrix.inverse()); }

Mat4 AffineParams::matrix() const {
  Mat3 shear_m = Mat3::Identity();
  shear_m(0, 1) = shear[0];
  shear_m(0, 2) = shear[1];
  shear_m(1, 2) = shear[2];
  const Mat3 a = rigid.rotation() * shear_m * scale.asDiagonal();
  Mat4 m = Mat4::Identity();
  m.block<3, 3>(0, 0) = a;
  m.block<3, 1>(0, 3) = rigid.center + rigid.translation - a * rigid.center;
  return m;
}

Mat4 transform_matrix(const Transform& t) {
  if (const auto* r = std::get_if<RigidParams>(&t)) return r->matrix();
  return std::get<AffineTransform>(t).matrix;
}

Vec3 transform_point(const Transform& t, const Vec3& p) {
  return std::visit([&](const auto& x) -> Vec3 { return x.apply(p); }, t);
}

Transform invert(const Transform& t) {
  return std::visit([](const auto& x) -> Transform { return x.inverse(); }, t);
}

nlohmann::json transform_to_json(const Transform& t) {
  nlohmann::json j;
  const Mat4 m = transform_matrix(t);
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < 4; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2), m(r, 3)});
  if (const auto* rp = std::get_if<RigidParams>(&t)) {
    j["type"] = "rigid";
    j["angles"] = {rp->angles[0], rp->angles[1], rp->angles[2]};
    j["translation"] = {rp->translation[0], rp->translation[1], rp->translation[2]};
    j["center"] = {rp->center[0], rp->center[1], rp->center[2]};
  } else {
    j["type"] = "affine";
  }
  j["matrix"] = rows;
  j["convention"] = "pullback";
  j["units"] = "mm,rad";
  return j;
}

Transform transform_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("type")) fail(ErrorCode::Format, "transform JSON lacks a type");
  if (j.contains("convention") && j.at("convention") != "pullback")
    fail(ErrorCode::Unsupported, "only pullback transforms are supported");
  const std::string type = j.at("type").get<std::string>();
  if (type == "rigid") {
    RigidParams p;
    p.angles = json_vec3(j, "angles");
    p.translation = json_vec3(j, "translation");
    p.center = j.contains("center") ? json_vec3(j, "center") : Vec3::Zero();
    return p;
  }
  if (type == "affine") {
    if (!j.contains("matrix") || j.at("matrix").size() < 3) fail(ErrorCode::Format, "affine JSON lacks a matrix");
    Mat4 m = Mat4::Identity();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c) m(r, c) = j.at("matrix")[r][c].get<double>();
    return AffineTransform(m);
  }
  fail(ErrorCode::Format, "unknown transform type '" + type + "'");
}

}  // namespace dv
