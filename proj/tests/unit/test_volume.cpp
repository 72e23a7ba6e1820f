#include <doctest.h>

#include "dynavessel/error.hpp"
#include "dynavessel/nifti.hpp"
#include "dynavessel/volume.hpp"
#include "support/builders.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

using namespace dv;

namespace {

bool bit_equal(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Internal;
}

}  // namespace

TEST_CASE("geometry mapping and raster order") {
  VolumeGeometry g({4, 3, 2}, Vec3(0.5, 1.0, 2.0), Vec3(10, 20, 30));
  CHECK(g.linear(1, 2, 1) == 1 + 4 * 2 + 12);
  CHECK(g.unravel(g.linear(3, 1, 1)) == Index3{3, 1, 1});
  const Vec3 w = g.voxel_to_world(Vec3(2, 1, 1));
  CHECK(w.isApprox(Vec3(11, 21, 32)));
  CHECK((g.world_to_voxel(w) - Vec3(2, 1, 1)).norm() < 1e-12);
  CHECK(Index3{0, 0, 1} > Index3{3, 2, 0});
}

TEST_CASE("geometry validation rejects bad grids") {
  CHECK(code_of([] { VolumeGeometry({0, 1, 1}, Vec3::Ones()).validate(); }) == ErrorCode::Geometry);
  CHECK(code_of([] { VolumeGeometry({1, 1, 1}, Vec3(1, -1, 1)).validate(); }) == ErrorCode::Geometry);
  Mat3 skew = Mat3::Identity();
  skew(0, 1) = 0.3;
  CHECK(code_of([&] { VolumeGeometry({1, 1, 1}, Vec3::Ones(), Vec3::Zero(), skew).validate(); }) == ErrorCode::Geometry);
}

TEST_CASE("trilinear sampling") {
  ScalarVolume v(VolumeGeometry({2, 1, 1}, Vec3::Ones()));
  v[0] = 0.0f;
  v[1] = 100.0f;
  CHECK(trilinear_sample(v, Vec3(0, 0, 0)) == 0.0f);
  CHECK(trilinear_sample(v, Vec3(1, 0, 0)) == 100.0f);
  CHECK(trilinear_sample(v, Vec3(0.5, 0, 0)) == doctest::Approx(50.0));
  CHECK(trilinear_sample(v, Vec3(11, 0, 0)) == -1024.0f);
  CHECK(trilinear_sample(v, Vec3(-10, 0, 0)) == -1024.0f);
}

TEST_CASE("nearest sampling of labels") {
  LabelVolume l(VolumeGeometry({3, 3, 3}, Vec3::Constant(2.0)));
  l.at(1, 1, 1) = 1;
  CHECK(nearest_sample(l, Vec3(2, 2, 2)) == 1);
  CHECK(nearest_sample(l, Vec3(2 + 0.8, 2, 2)) == 1);  // 0.4 of the spacing
  CHECK(nearest_sample(l, Vec3(2, 2 - 0.8, 2)) == 1);
  CHECK(nearest_sample(l, Vec3(0, 0, 0)) == 0);
  CHECK(nearest_sample(l, Vec3(50, 0, 0)) == 0);
}

TEST_CASE("voxel set text round trip") {
  LabelVolume m(dvtest::cube(4));
  m.at(3, 0, 0) = 1;
  m.at(0, 2, 1) = 1;
  m.at(1, 1, 3) = 1;
  const VoxelSet s = VoxelSet::from_mask(m);
  REQUIRE(s.size() == 3);
  CHECK(s.indices.front() == Index3{3, 0, 0});
  const VoxelSet back = VoxelSet::from_text(s.to_text(), m.geometry());
  CHECK(back.indices == s.indices);
  CHECK(back.to_mask().data() == m.data());
}

TEST_CASE("label volume helpers") {
  LabelVolume l(dvtest::cube(3), default_label_names());
  l[0] = 1;
  l[1] = 2;
  l[2] = 2;
  l[3] = 7;
  CHECK(l.count(2) == 2);
  CHECK(l.count_nonzero() == 4);
  CHECK(l.select(2).count_nonzero() == 2);
  l.ensure_names();
  CHECK(l.label_names().at(7) == "label_7");
  CHECK(l.label_names().at(1) == "artery");
}

TEST_CASE("NIfTI minimal float round trip") {
  const auto dir = dvtest::scratch_dir("nifti_min");
  ScalarVolume v(VolumeGeometry({2, 2, 2}, Vec3(0.7, 0.8, 0.9), Vec3(-3, 4, 5)));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(i) * 1.5f - 3.0f;
  for (const char* name : {"v.nii", "v.nii.gz"}) {
    nifti::write_volume(v, dir / name);
    const ScalarVolume r = nifti::read_volume(dir / name);
    CHECK(bit_equal(r.data(), v.data()));
    CHECK(r.geometry().same_as(v.geometry()));
  }
}

TEST_CASE("NIfTI int16 with slope and intercept") {
  const auto bytes = dvtest::int16_nifti(512, 2.0f, -1024.0f);
  const ScalarVolume v = nifti::decode_scalar(bytes);
  REQUIRE(v.size() == 1);
  CHECK(v[0] == 0.0f);
}

TEST_CASE("NIfTI rejects a bad magic") {
  const auto dir = dvtest::scratch_dir("nifti_magic");
  auto bytes = dvtest::int16_nifti(0, 1.0f, 0.0f);
  std::memcpy(bytes.data() + 344, "abc", 4);
  {
    std::ofstream os(dir / "bad.nii", std::ios::binary);
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  CHECK(code_of([&] { nifti::read_volume(dir / "bad.nii"); }) == ErrorCode::Format);
  CHECK(code_of([&] { nifti::read_volume(dir / "missing.nii"); }) == ErrorCode::Io);
}

TEST_CASE("NIfTI labels are written as uint8") {
  const auto dir = dvtest::scratch_dir("nifti_labels");
  LabelVolume l(dvtest::cube(3), default_label_names());
  l[0] = 1;
  l[5] = 2;
  nifti::write_volume(l, dir / "l.nii.gz");
  CHECK(nifti::read_header(dir / "l.nii.gz").datatype == nifti::kUInt8);
  CHECK(nifti::read_labels(dir / "l.nii.gz").data() == l.data());
}

TEST_CASE("NIfTI pixdim carries the spacing") {
  const auto dir = dvtest::scratch_dir("nifti_pixdim");
  ScalarVolume v(dvtest::cube(2, 0.468));
  nifti::write_volume(v, dir / "v.nii");
  const auto bytes = nifti::read_file_bytes(dir / "v.nii");
  float pixdim[4];
  std::memcpy(pixdim, bytes.data() + 76, sizeof(pixdim));
  for (int a = 1; a <= 3; ++a) CHECK(pixdim[a] == 0.468f);
}

TEST_CASE("NIfTI round trip property: random data and oblique geometry") {
  const auto dir = dvtest::scratch_dir("nifti_prop");
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 8; ++trial) {
    std::uniform_int_distribution<int> dim(1, 9);
    std::uniform_real_distribution<double> u(-1, 1);
    const double a = u(rng), b = u(rng);
    const Mat3 dir3 = (Eigen::AngleAxisd(a, Vec3::UnitZ()) * Eigen::AngleAxisd(b, Vec3::UnitX())).toRotationMatrix();
    VolumeGeometry g({dim(rng), dim(rng), dim(rng)}, Vec3(0.3 + u(rng) * 0.1, 1.1, 2.5), Vec3(u(rng) * 50, 3, -7), dir3);
    const ScalarVolume v = dvtest::random_volume(g, -3000, 3000, rng);
    nifti::write_volume(v, dir / "p.nii.gz");
    const ScalarVolume r = nifti::read_volume(dir / "p.nii.gz");
    CHECK(bit_equal(r.data(), v.data()));
    CHECK(r.geometry().dims == g.dims);
    const Mat4 d = r.geometry().affine() - g.affine();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 4; ++j) CHECK(std::abs(d(i, j)) <= 1e-6 * std::max(1.0, std::abs(g.affine()(i, j))));
  }
}

TEST_CASE("trilinear sampling reproduces affine intensity fields") {
  const VolumeGeometry g({7, 6, 5}, Vec3(0.8, 1.2, 2.0), Vec3(-3, 1, 4));
  ScalarVolume v(g);
  auto field = [](const Vec3& p) { return 3.0 * p.x() - 2.0 * p.y() + 0.5 * p.z() + 10.0; };
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(field(g.voxel_to_world(g.unravel(i))));
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> ux(0, 6), uy(0, 5), uz(0, 4);
  for (int n = 0; n < 500; ++n) {
    const Vec3 p = g.voxel_to_world(Vec3(ux(rng), uy(rng), uz(rng)));
    REQUIRE(std::abs(trilinear_sample(v, p) - field(p)) < 1e-3);
  }
}
