#include <doctest.h>

#include "dynavessel/error.hpp"
#include "dynavessel/imaging.hpp"
#include "dynavessel/phantom.hpp"
#include "dynavessel/registration.hpp"
#include "support/builders.hpp"

#include <cmath>

using namespace dv;

namespace {

constexpr double kDeg = M_PI / 180.0;

const phantom::PhantomSpec& small_spec() {
  static const phantom::PhantomSpec spec = phantom::default_spec(64, 2.0);
  return spec;
}

const phantom::Anatomy& small_anatomy() {
  static const phantom::Anatomy a = phantom::build_anatomy(small_spec());
  return a;
}

ScalarVolume frame(double t, const RigidParams& motion = RigidParams::identity()) {
  return phantom::render_frame(small_anatomy(), small_spec(), t, motion);
}

Vec3 centroid_above(const ScalarVolume& v, float floor) {
  Vec3 sum = Vec3::Zero();
  double w = 0;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i] > floor) {
      sum += v.geometry().voxel_to_world(v.geometry().unravel(i)) * v[i];
      w += v[i];
    }
  return sum / w;
}

double dice(const LabelVolume& a, const LabelVolume& b) {
  std::size_t inter = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += a[i] != 0;
    nb += b[i] != 0;
    inter += a[i] && b[i];
  }
  return 2.0 * inter / static_cast<double>(na + nb);
}

}  // namespace

TEST_CASE("ncc examples") {
  std::mt19937_64 rng(1);
  const ScalarVolume a = dvtest::random_volume(dvtest::cube(8), -100, 100, rng);
  ScalarVolume neg = a, lin = a;
  for (std::size_t i = 0; i < a.size(); ++i) {
    neg[i] = -a[i] + 100.0f;
    lin[i] = 2.0f * a[i] + 7.0f;
  }
  CHECK(std::abs(ncc(a, a) - 1.0) < 1e-12);
  CHECK(ncc(a, neg) == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(ncc(a, lin) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_THROWS_AS(ncc(a, ScalarVolume(a.geometry(), 5.0f)), Error);
  CHECK_THROWS_AS(ncc(a, ScalarVolume(dvtest::cube(7))), Error);
}

TEST_CASE("ncc property: invariance to positive affine rescaling") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const ScalarVolume a = dvtest::random_volume(dvtest::cube(6), -1000, 1000, rng);
    const ScalarVolume b = dvtest::random_volume(dvtest::cube(6), -1000, 1000, rng);
    ScalarVolume c = b;
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = static_cast<float>(0.5 * b[i] + 300.0);
    const double r = ncc(a, b);
    CHECK(std::abs(r) <= 1.0);
    CHECK(std::abs(ncc(a, c) - r) < 1e-6);  // float32 storage of the rescaled copy
  }
}

TEST_CASE("resample_with_transform examples") {
  std::mt19937_64 rng(4);
  const ScalarVolume v = dvtest::random_volume(dvtest::cube(10, 1.5), -200, 200, rng);
  const ScalarVolume id = resample_with_transform(v, RigidParams::identity(), v.geometry());
  for (std::size_t i = 0; i < v.size(); ++i) REQUIRE(std::abs(id[i] - v[i]) <= 1e-4);

  RigidParams shift;
  shift.translation = Vec3(1.5, 0, 0);
  const ScalarVolume s = resample_with_transform(v, shift, v.geometry());
  for (int k = 0; k < 10; ++k)
    for (int j = 0; j < 10; ++j)
      for (int i = 0; i < 9; ++i) REQUIRE(s.at(i, j, k) == v.at(i + 1, j, k));
}

TEST_CASE("pull-back displaces content opposite to the transform") {
  const VolumeGeometry g({40, 40, 40}, Vec3::Ones(), Vec3::Constant(-19.5));
  ScalarVolume sphere(g, 0.0f);
  for (std::size_t i = 0; i < sphere.size(); ++i)
    if (g.voxel_to_world(g.unravel(i)).norm() <= 6.0) sphere[i] = 1000.0f;
  RigidParams t;
  t.translation = Vec3(5, 0, 0);
  const ScalarVolume moved = resample_with_transform(sphere, t, g, 0.0f);
  const Vec3 d = centroid_above(moved, 0.0f) - centroid_above(sphere, 0.0f);
  CHECK(d.x() == doctest::Approx(-5.0).epsilon(1e-6));
  CHECK(std::abs(d.y()) < 1e-6);
}

TEST_CASE("self registration is the identity") {
  const ScalarVolume f = frame(0.0);
  const RegistrationResult r = register_rigid(f, f);
  const auto& p = std::get<RigidParams>(r.transform);
  CHECK(p.angles.cwiseAbs().maxCoeff() < 0.1 * kDeg);
  CHECK(p.translation.cwiseAbs().maxCoeff() < 0.05);
  CHECK(r.final_ncc > 0.9999);
}

TEST_CASE("rigid registration recovers a known motion") {
  RigidParams truth;
  truth.angles = Vec3(2, 2, -1) * kDeg;
  truth.translation = Vec3(1.5, -2.0, 0.5);
  truth.center = small_spec().skull.center;
  const ScalarVolume fixed = frame(0.0, truth);
  const RegistrationResult r = register_rigid(fixed, frame(0.0));
  const RigidParams got = std::get<RigidParams>(r.transform).with_center(truth.center);
  CHECK((got.angles - truth.angles).cwiseAbs().maxCoeff() < 0.5 * kDeg);
  CHECK((got.translation - truth.translation).cwiseAbs().maxCoeff() < 0.25);
}

TEST_CASE("differing contrast phases with the same pose register to near identity") {
  const RegistrationResult r = register_rigid(frame(45.3), frame(27.6));
  const auto p = std::get<RigidParams>(r.transform);
  CHECK(p.angles.cwiseAbs().maxCoeff() < 0.5 * kDeg);
  CHECK(p.translation.cwiseAbs().maxCoeff() < 0.5);
}

TEST_CASE("affine registration recovers isotropic scale") {
  const ScalarVolume fixed = frame(0.0);
  AffineParams shrink;
  shrink.rigid.center = small_spec().skull.center;
  shrink.scale = Vec3::Constant(1.0 / 1.1);
  const ScalarVolume moving = resample_with_transform(fixed, AffineTransform(shrink.matrix()), fixed.geometry());
  const RegistrationResult r = register_affine(fixed, moving);
  const Mat3 a = transform_matrix(r.transform).block<3, 3>(0, 0);
  const Vec3 sv = Eigen::JacobiSVD<Mat3>(a).singularValues();
  for (int i = 0; i < 3; ++i) CHECK(sv[i] == doctest::Approx(1.1).epsilon(0.01));
}

TEST_CASE("affine self registration is the identity") {
  const ScalarVolume f = frame(0.0);
  const RegistrationResult r = register_affine(f, f);
  CHECK((transform_matrix(r.transform) - Mat4::Identity()).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("affine registration aligns ellipsoids with 10 percent axis differences") {
  phantom::PhantomSpec patient = small_spec();
  patient.arteries.clear();
  patient.veins.clear();
  phantom::PhantomSpec templ = patient;
  templ.skull.radii = patient.skull.radii.cwiseProduct(Vec3(1.1, 0.9, 1.0));
  const auto pa = phantom::build_anatomy(patient);
  const auto ta = phantom::build_anatomy(templ);
  const ScalarVolume pct = phantom::render_frame(pa, patient, 0.0, RigidParams::identity());
  const ScalarVolume tct = phantom::render_frame(ta, templ, 0.0, RigidParams::identity());
  const RegistrationResult r = register_affine(pct, tct);
  LabelVolume p_in(pa.tissue.geometry()), t_in(ta.tissue.geometry());
  for (std::size_t i = 0; i < p_in.size(); ++i) {
    p_in[i] = pa.tissue[i] != 0;
    t_in[i] = ta.tissue[i] != 0;
  }
  CHECK(dice(resample_labels_with_transform(t_in, r.transform, p_in.geometry()), p_in) >= 0.95);
}

TEST_CASE("registration rejects invalid options and non-overlapping inputs") {
  RegistrationOptions o;
  o.sampling_fraction = 0.0;
  CHECK_THROWS_AS(o.validate(), Error);
  const ScalarVolume f = frame(0.0);
  ScalarVolume far(VolumeGeometry(f.geometry().dims, f.geometry().spacing, Vec3::Constant(5000.0)), 0.0f);
  far.data() = f.data();
  CHECK_THROWS_AS(register_rigid(f, far), Error);
}

TEST_CASE("resampling by T then by its inverse reproduces smooth interiors") {
  // double trilinear error grows with h^2 times curvature, so the blur must
  // span several voxels for the bound to hold at the skull
  const ScalarVolume smooth = gaussian_smooth(frame(27.6), 15.0);
  RigidParams t;
  t.angles = Vec3(3, -2, 4) * kDeg;
  t.translation = Vec3(2.5, -1.0, 3.0);
  t.center = small_spec().skull.center;
  const ScalarVolume there = resample_with_transform(smooth, t, smooth.geometry());
  const ScalarVolume back = resample_with_transform(there, invert(Transform(t)), smooth.geometry());
  const auto& g = smooth.geometry();
  double worst = 0;
  for (int k = 8; k < g.dims[2] - 8; ++k)
    for (int j = 8; j < g.dims[1] - 8; ++j)
      for (int i = 8; i < g.dims[0] - 8; ++i) worst = std::max(worst, double(std::abs(back.at(i, j, k) - smooth.at(i, j, k))));
  CHECK(worst < 3.0);
}

TEST_CASE("recorded NCC never decreases within a pyramid level") {
  RigidParams m;
  m.angles = Vec3(1, -1, 2) * kDeg;
  m.translation = Vec3(-1, 2, 1);
  m.center = small_spec().skull.center;
  const RegistrationResult r = register_rigid(frame(0.0, m), frame(0.0));
  REQUIRE(r.ncc_history.size() == 3);
  for (const auto& level : r.ncc_history)
    for (std::size_t i = 1; i < level.size(); ++i) REQUIRE(level[i] >= level[i - 1]);
}
