#include <doctest.h>

#include "dynavessel/error.hpp"
#include "dynavessel/imaging.hpp"
#include "support/builders.hpp"

#include <cmath>

using namespace dv;

TEST_CASE("isotropic geometry dims") {
  const VolumeGeometry g = isotropic_geometry(dvtest::cube(256, 0.936), 0.468);
  CHECK(g.dims == std::array<int, 3>{512, 512, 512});
  CHECK(g.spacing.isApprox(Vec3::Constant(0.468)));
  const VolumeGeometry a = isotropic_geometry(VolumeGeometry({10, 7, 3}, Vec3(0.5, 1.0, 3.0)), 1.0);
  CHECK(a.dims == std::array<int, 3>{5, 7, 9});
  CHECK_THROWS_AS(isotropic_geometry(dvtest::cube(4), 0.0), Error);
}

TEST_CASE("resampling a constant volume stays constant") {
  ScalarVolume v(VolumeGeometry({9, 7, 5}, Vec3(0.9, 1.3, 2.0)), 123.5f);
  const ScalarVolume r = resample_isotropic(v, 0.6);
  const auto& g = r.geometry();
  std::size_t inside = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const Vec3 src = v.geometry().world_to_voxel(g.voxel_to_world(g.unravel(i)));
    if ((src.array() < -0.5).any() || (src.array() > Vec3(8.5, 6.5, 4.5).array()).any()) {
      REQUIRE(r[i] == kAirHu);  // more than half a voxel past the source grid
      continue;
    }
    ++inside;
    REQUIRE(r[i] == doctest::Approx(123.5).epsilon(1e-6));
  }
  CHECK(inside > r.size() / 2);
}

TEST_CASE("resampling at the source spacing is the identity") {
  std::mt19937_64 rng(3);
  const ScalarVolume v = dvtest::random_volume(dvtest::cube(12, 0.7), -500, 500, rng);
  const ScalarVolume r = resample_isotropic(v, 0.7);
  REQUIRE(r.geometry().dims == v.geometry().dims);
  for (std::size_t i = 0; i < r.size(); ++i) REQUIRE(std::abs(r[i] - v[i]) <= 1e-4);
}

TEST_CASE("apply_mask") {
  const VolumeGeometry g = dvtest::cube(6);
  ScalarVolume v(g, 100.0f);
  LabelVolume ones(g), zeros(g), half(g);
  for (std::size_t i = 0; i < ones.size(); ++i) {
    ones[i] = 1;
    half[i] = g.unravel(i).k < 3 ? 1 : 0;
  }
  CHECK(apply_mask(v, ones, 0.0f).data() == v.data());
  const ScalarVolume z = apply_mask(v, zeros, 0.0f);
  for (float x : z.data()) REQUIRE(x == 0.0f);
  const ScalarVolume h = apply_mask(v, half, 0.0f);
  std::size_t hundred = 0;
  for (float x : h.data()) hundred += x == 100.0f;
  CHECK(hundred * 2 == h.size());
  CHECK_THROWS_AS(apply_mask(v, LabelVolume(dvtest::cube(5)), 0.0f), Error);
}

TEST_CASE("MIP rendering") {
  ScalarVolume v(dvtest::cube(8), -1024.0f);
  v.at(2, 5, 4) = 500.0f;
  const Image2D img = mip_render(v, Axis::Z, 0.0, 500.0);
  REQUIRE(img.width == 8);
  REQUIRE(img.height == 8);
  int bright = 0;
  for (auto p : img.pixels) bright += p == 255;
  CHECK(bright == 1);
  CHECK(img.at(2, 5) == 255);

  const Image2D flat = mip_render(ScalarVolume(dvtest::cube(4), 0.0f), Axis::X, 0.0, 100.0);
  for (auto p : flat.pixels) REQUIRE(p == 0);
  const Image2D over = mip_render(ScalarVolume(dvtest::cube(4), 900.0f), Axis::Y, 0.0, 100.0);
  for (auto p : over.pixels) REQUIRE(p == 255);
  CHECK_THROWS_AS(mip_render(v, Axis::Z, 10.0, 10.0), Error);
}

TEST_CASE("PNG output") {
  const auto dir = dvtest::scratch_dir("png");
  Image2D img{3, 2, {0, 50, 100, 150, 200, 255}};
  write_png(img, dir / "x.png");
  CHECK(std::filesystem::file_size(dir / "x.png") > 8);
  CHECK(parse_axis("y") == Axis::Y);
  CHECK_THROWS_AS(parse_axis("w"), Error);
}

TEST_CASE("smoothing and downsampling preserve constants") {
  ScalarVolume v(VolumeGeometry({9, 8, 7}, Vec3::Ones()), 42.0f);
  const ScalarVolume s = gaussian_smooth(v, 2.0);
  for (float x : s.data()) REQUIRE(x == doctest::Approx(42.0));
  const ScalarVolume d = downsample(v, 2);
  CHECK(d.geometry().dims == std::array<int, 3>{5, 4, 4});
  for (float x : d.data()) REQUIRE(x == doctest::Approx(42.0));
}

TEST_CASE("threshold_above is strict") {
  ScalarVolume v(dvtest::cube(2), 0.0f);
  v[0] = 100.0f;
  v[1] = 100.5f;
  const LabelVolume m = threshold_above(v, 100.0f);
  CHECK(m[0] == 0);
  CHECK(m[1] == 1);
}

TEST_CASE("apply_mask is idempotent") {
  std::mt19937_64 rng(12);
  const ScalarVolume v = dvtest::random_volume(dvtest::cube(9), -1000, 1000, rng);
  const LabelVolume m = dvtest::random_mask(v.geometry(), 0.4, rng);
  const ScalarVolume once = apply_mask(v, m, -7.0f);
  CHECK(apply_mask(once, m, -7.0f).data() == once.data());
}
