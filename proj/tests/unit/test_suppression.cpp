#include <doctest.h>

#include "dynavessel/error.hpp"
#include "dynavessel/phantom.hpp"
#include "dynavessel/suppression.hpp"
#include "support/builders.hpp"

#include <cmath>

using namespace dv;

namespace {

struct Small {
  phantom::PhantomSpec spec = phantom::default_spec(64, 2.0);
  phantom::Anatomy anatomy = phantom::build_anatomy(spec);
  ScalarVolume frame(double t) const { return phantom::render_frame(anatomy, spec, t, RigidParams::identity()); }
};

const Small& small() {
  static const Small s;
  return s;
}

double dice(const LabelVolume& a, const LabelVolume& b) {
  std::size_t inter = 0, n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    n += (a[i] != 0) + (b[i] != 0);
    inter += a[i] && b[i];
  }
  return 2.0 * inter / static_cast<double>(n);
}

}  // namespace

TEST_CASE("voxelwise suppression rule") {
  CHECK(suppress_voxelwise(100.0f, 50.0f) == 100.0f);
  CHECK(suppress_voxelwise(50.0f, 100.0f) == 0.0f);
  CHECK(suppress_voxelwise(70.0f, 70.0f) == 0.0f);
  CHECK(parse_alg1_operand("raw") == Alg1Operand::Raw);
  CHECK(std::string(alg1_operand_name(Alg1Operand::Subtracted)) == "subtracted");
  CHECK_THROWS_AS(parse_alg1_operand("both"), Error);
}

TEST_CASE("subtract_baseline examples") {
  const ScalarVolume base = small().frame(0.0);
  const ScalarVolume same = subtract_baseline(base, base, false);
  for (float x : same.data()) REQUIRE(x == 0.0f);

  ScalarVolume post = base;
  const auto& artery = small().anatomy.artery;
  for (std::size_t i = 0; i < post.size(); ++i)
    if (artery[i]) post[i] += 300.0f;
  const ScalarVolume s = subtract_baseline(post, base, false);
  for (std::size_t i = 0; i < s.size(); ++i) REQUIRE(s[i] == (artery[i] ? 300.0f : 0.0f));

  ScalarVolume darker = base;
  darker[1234] -= 25.0f;
  CHECK(subtract_baseline(darker, base, false)[1234] == 0.0f);
  CHECK_THROWS_AS(subtract_baseline(base, ScalarVolume(dvtest::cube(8)), false), Error);
}

TEST_CASE("registered subtraction is non-negative and cancels static anatomy") {
  const ScalarVolume base = small().frame(0.0);
  const ScalarVolume post = small().frame(27.6);
  const ScalarVolume s = subtract_baseline(post, base, true);
  double bone_max = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    REQUIRE(s[i] >= 0.0f);
    if (small().anatomy.bone[i]) bone_max = std::max(bone_max, double(s[i]));
  }
  CHECK(bone_max < 1.0);
}

TEST_CASE("head ROI examples") {
  const ScalarVolume patient = small().frame(0.0);
  LabelVolume interior(patient.geometry());
  for (std::size_t i = 0; i < interior.size(); ++i) interior[i] = small().anatomy.tissue[i] != 0;
  CHECK(dice(head_roi_mask(patient, patient, interior), interior) >= 0.99);

  const auto [tpl, tpl_roi] = phantom::make_template(small().spec);
  CHECK(dice(head_roi_mask(patient, tpl, tpl_roi), interior) >= 0.95);

  CHECK(head_roi_mask(patient, tpl, LabelVolume(tpl.geometry())).count_nonzero() == 0);
  CHECK_THROWS_AS(head_roi_mask(patient, tpl, LabelVolume(dvtest::cube(5))), Error);
}

TEST_CASE("identical phases suppress everything") {
  const ScalarVolume x = small().frame(27.6);
  const ScalarVolume s = subtract_baseline(x, small().frame(0.0), false);
  const SeparationResult r = vessel_separate(s, s, x, x);
  for (std::size_t i = 0; i < s.size(); ++i) {
    REQUIRE(r.s_star_a[i] == 0.0f);
    REQUIRE(r.s_star_v[i] == 0.0f);
  }
}

TEST_CASE("motion-free separation keeps arteries and drops veins") {
  const ScalarVolume x0 = small().frame(0.0), xa = small().frame(27.6), xv = small().frame(45.3);
  const ScalarVolume sa = subtract_baseline(xa, x0, false), sv = subtract_baseline(xv, x0, false);
  for (bool reg : {false, true}) {
    SeparationOptions o;
    o.register_phases = reg;
    const SeparationResult r = vessel_separate(sa, sv, xa, xv, o);
    const auto& art = small().anatomy.artery;
    const auto& vein = small().anatomy.vein;
    double kept = 0, total = 0, vein_sum = 0;
    std::size_t vein_n = 0;
    for (std::size_t i = 0; i < sa.size(); ++i) {
      REQUIRE(r.s_star_a[i] >= 0.0f);
      REQUIRE(r.s_star_a[i] <= sa[i]);
      REQUIRE(r.s_star_v[i] <= sv[i]);
      if (art[i]) {
        kept += r.s_star_a[i];
        total += sa[i];
      }
      if (vein[i]) {
        vein_sum += r.s_star_a[i];
        ++vein_n;
      }
    }
    CHECK(kept / total >= 0.99);
    CHECK(vein_sum / vein_n <= 1.0);
  }
}

TEST_CASE("aligned suppression is exclusive and idempotent") {
  std::mt19937_64 rng(17);
  const ScalarVolume a = dvtest::random_volume(dvtest::cube(10), 0, 400, rng);
  const ScalarVolume b = dvtest::random_volume(dvtest::cube(10), 0, 400, rng);
  const ScalarVolume s = suppress_volume(a, b);
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s[i] > 0) REQUIRE(a[i] > b[i]);
  CHECK(suppress_volume(s, b).data() == s.data());
  SeparationOptions o;
  o.register_phases = false;
  const SeparationResult r = vessel_separate(a, b, a, b, o);
  CHECK(r.s_star_a.data() == s.data());
}
