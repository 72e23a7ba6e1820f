#include <doctest.h>

#include "dynavessel/error.hpp"
#include "dynavessel/transform.hpp"

#include <cmath>
#include <random>

using namespace dv;

namespace {

RigidParams random_rigid(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> a(-0.3, 0.3), t(-10, 10);
  RigidParams p;
  p.angles = Vec3(a(rng), a(rng), a(rng));
  p.translation = Vec3(t(rng), t(rng), t(rng));
  p.center = Vec3(t(rng), t(rng), t(rng));
  return p;
}

}  // namespace

TEST_CASE("rigid examples") {
  CHECK(RigidParams::identity().apply(Vec3(1, 2, 3)) == Vec3(1, 2, 3));
  RigidParams q;
  q.angles = Vec3(0, 0, M_PI / 2);
  CHECK((q.apply(Vec3(1, 0, 0)) - Vec3(0, 1, 0)).norm() < 1e-12);
  RigidParams t;
  t.translation = Vec3(1, 2, 3);
  CHECK(t.apply(Vec3::Zero()) == Vec3(1, 2, 3));
}

TEST_CASE("rotation order is Rz Ry Rx") {
  RigidParams p;
  p.angles = Vec3(0.1, -0.2, 0.3);
  const Mat3 expect = (Eigen::AngleAxisd(0.3, Vec3::UnitZ()) * Eigen::AngleAxisd(-0.2, Vec3::UnitY()) *
                       Eigen::AngleAxisd(0.1, Vec3::UnitX()))
                          .toRotationMatrix();
  CHECK((p.rotation() - expect).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("rigid properties: inverse, recentre, compose, matrix round trip") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const RigidParams a = random_rigid(rng), b = random_rigid(rng);
    const Vec3 p(rng() % 17 - 8.0, rng() % 13 - 6.0, 1.5);
    CHECK((a.inverse().apply(a.apply(p)) - p).norm() < 1e-9);
    const RigidParams c = a.with_center(Vec3(3, -4, 5));
    CHECK((c.apply(p) - a.apply(p)).norm() < 1e-9);
    CHECK((compose(a, b).apply(p) - a.apply(b.apply(p))).norm() < 1e-9);
    const RigidParams m = RigidParams::from_matrix(a.matrix(), a.center);
    CHECK((m.angles - a.angles).norm() < 1e-9);
    CHECK((m.translation - a.translation).norm() < 1e-9);
  }
}

TEST_CASE("affine parameters") {
  AffineParams p;
  p.scale = Vec3(1.1, 1.1, 1.1);
  const Mat4 m = p.matrix();
  CHECK(m.block<3, 3>(0, 0).isApprox(Mat3::Identity() * 1.1));
  const AffineTransform t(m);
  const Vec3 x(4, -2, 7);
  CHECK((t.inverse().apply(t.apply(x)) - x).norm() < 1e-12);
}

TEST_CASE("transform variant helpers and JSON") {
  std::mt19937_64 rng(5);
  const Transform r = random_rigid(rng);
  const Vec3 p(1, 2, 3);
  CHECK((transform_point(invert(r), transform_point(r, p)) - p).norm() < 1e-9);
  const Transform back = transform_from_json(transform_to_json(r));
  CHECK((transform_matrix(back) - transform_matrix(r)).cwiseAbs().maxCoeff() < 1e-12);

  AffineParams ap;
  ap.scale = Vec3(1.2, 0.9, 1.0);
  ap.shear = Vec3(0.05, 0, -0.02);
  const Transform a = AffineTransform(ap.matrix());
  const Transform aback = transform_from_json(transform_to_json(a));
  CHECK((transform_matrix(aback) - transform_matrix(a)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(transform_from_json(nlohmann::json{{"type", "spline"}}), Error);
}
