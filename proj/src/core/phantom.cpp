#include "dynavessel/phantom.hpp"
#include "dynavessel/registration.hpp"

#include "dynavessel/error.hpp"
#include "dynavessel/nifti.hpp"
#include "dynavessel/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

namespace dv::phantom {

using nlohmann::json;

double TimeAttenuationCurve::eval(double t) const {
  if (t <= onset) return 0.0;
  const double x = (t - onset) / time_to_peak;
  return peak * std::pow(x, alpha) * std::exp(alpha * (1.0 - x));
}

TimeAttenuationCurve default_artery_tac() { return {7.0, 20.6, 3.0, 400.0}; }
TimeAttenuationCurve default_vein_tac() { return {12.0, 33.3, 3.0, 485.0}; }

std::vector<double> default_timepoints() {
  std::vector<double> t(19);
  for (int i = 0; i < 19; ++i) t[static_cast<std::size_t>(i)] = 60.0 * i / 18.0;
  // the two peak acquisitions replace their nearest neighbours on the even grid
  for (double peak : {27.6, 45.3}) {
    auto it = std::min_element(t.begin(), t.end(),
                               [&](double a, double b) { return std::abs(a - peak) < std::abs(b - peak); });
    *it = peak;
  }
  return t;
}

namespace {

VesselSegment seg(std::initializer_list<Vec3> pts, double r) { return {std::vector<Vec3>(pts), r}; }

VesselTree mirrored(const VesselTree& tree) {
  VesselTree out = tree;
  for (auto& s : out.segments)
    for (auto& p : s.points) p.x() = -p.x();
  return out;
}

double point_segment_distance2(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (a + t * ab - p).squaredNorm();
}

double polyline_distance(const Vec3& p, const std::vector<Vec3>& pts) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) best = std::min(best, point_segment_distance2(p, pts[i], pts[i + 1]));
  return std::sqrt(best);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

bool is_identity(const RigidParams& m) { return m.angles.isZero(0.0) && m.translation.isZero(0.0); }

Vec3 vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) fail(ErrorCode::Spec, "expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json to_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

TimeAttenuationCurve tac_from_json(const json& j, TimeAttenuationCurve def) {
  def.onset = j.value("onset", def.onset);
  def.time_to_peak = j.value("time_to_peak", def.time_to_peak);
  def.alpha = j.value("alpha", def.alpha);
  def.peak = j.value("peak", def.peak);
  return def;
}

json tac_to_json(const TimeAttenuationCurve& c) {
  return {{"onset", c.onset}, {"time_to_peak", c.time_to_peak}, {"alpha", c.alpha}, {"peak", c.peak}};
}

std::vector<VesselTree> trees_from_json(const json& arr, VesselKind kind) {
  std::vector<VesselTree> out;
  for (const auto& jt : arr) {
    VesselTree t;
    t.kind = kind;
    t.tac = tac_from_json(jt.value("tac", json::object()),
                          kind == VesselKind::Artery ? default_artery_tac() : default_vein_tac());
    for (const auto& js : jt.at("segments")) {
      VesselSegment s;
      s.radius = js.at("radius").get<double>();
      for (const auto& p : js.at("points")) s.points.push_back(vec3(p));
      t.segments.push_back(std::move(s));
    }
    out.push_back(std::move(t));
  }
  return out;
}

json trees_to_json(const std::vector<VesselTree>& trees) {
  json arr = json::array();
  for (const auto& t : trees) {
    json jt;
    jt["tac"] = tac_to_json(t.tac);
    jt["segments"] = json::array();
    for (const auto& s : t.segments) {
      json pts = json::array();
      for (const auto& p : s.points) pts.push_back(to_json(p));
      jt["segments"].push_back({{"points", pts}, {"radius", s.radius}});
    }
    arr.push_back(jt);
  }
  return arr;
}

RigidParams rigid_from_json(const json& j) {
  RigidParams p;
  if (j.contains("angles_deg")) p.angles = vec3(j.at("angles_deg")) * (M_PI / 180.0);
  if (j.contains("angles")) p.angles = vec3(j.at("angles"));
  if (j.contains("translation")) p.translation = vec3(j.at("translation"));
  if (j.contains("center")) p.center = vec3(j.at("center"));
  return p;
}

json rigid_to_json(const RigidParams& p) {
  return {{"angles", to_json(p.angles)}, {"translation", to_json(p.translation)}, {"center", to_json(p.center)}};
}

}  // namespace

PhantomSpec default_spec(int dims, double spacing) {
  PhantomSpec s;
  const double half = 0.5 * (dims - 1) * spacing;
  s.geometry = VolumeGeometry({dims, dims, dims}, Vec3::Constant(spacing), Vec3::Constant(-half));

  VesselTree left;
  left.kind = VesselKind::Artery;
  left.tac = default_artery_tac();
  left.segments = {
      seg({{-12, -25, -32}, {-12, -18, -20}, {-10, -5, -5}}, 2.5),
      seg({{-10, -5, -5}, {-25, 5, 5}, {-38, 12, 12}}, 1.8),
      seg({{-10, -5, -5}, {-8, 15, 8}, {-6, 35, 12}}, 1.8),
      seg({{-25, 5, 5}, {-28, -8, 20}}, 1.5),
  };
  s.arteries = {left, mirrored(left)};

  VesselTree sinus;
  sinus.kind = VesselKind::Vein;
  sinus.tac = default_vein_tac();
  sinus.segments = {
      seg({{0, -42, 18}, {0, -20, 32}, {0, 10, 34}, {0, 38, 22}}, 3.0),
      seg({{0, -42, 18}, {-20, -40, 8}, {-34, -34, 0}}, 2.5),
      seg({{0, -42, 18}, {20, -40, 8}, {34, -34, 0}}, 2.5),
      seg({{0, -20, 32}, {-18, -10, 26}}, 1.8),
      seg({{0, 10, 34}, {18, 16, 26}}, 1.8),
  };
  s.veins = {sinus};
  s.timepoints = default_timepoints();
  return s;
}

void PhantomSpec::validate() const {
  geometry.validate();
  if (timepoints.empty()) fail(ErrorCode::Spec, "at least one timepoint is required");
  for (std::size_t i = 1; i < timepoints.size(); ++i)
    if (!(timepoints[i] > timepoints[i - 1])) fail(ErrorCode::Spec, "timepoints must be strictly increasing");
  for (const auto* trees : {&arteries, &veins})
    for (const auto& t : *trees) {
      if (timepoints.front() > t.tac.onset)
        fail(ErrorCode::Spec, "the first timepoint must precede every contrast onset");
      if (!(t.tac.alpha > 0.0) || !(t.tac.time_to_peak > 0.0)) fail(ErrorCode::Spec, "TAC alpha and time_to_peak must be positive");
    }
  if (!motion.empty() && motion.size() != timepoints.size())
    fail(ErrorCode::Spec, "motion must list one transform per timepoint");
  if (!(noise_sigma >= 0.0)) fail(ErrorCode::Spec, "noise_sigma must be non-negative");
  if (!(skull.thickness > 0.0) || (skull.radii.array() <= skull.thickness).any())
    fail(ErrorCode::Spec, "skull radii must exceed the shell thickness");
  if (!(template_scale > 0.0)) fail(ErrorCode::Spec, "template_scale must be positive");

  const Vec3 inner = skull.radii - Vec3::Constant(skull.thickness);
  for (const auto* trees : {&arteries, &veins})
    for (const auto& tree : *trees) {
      if (tree.segments.empty()) fail(ErrorCode::Spec, "vessel tree without segments");
      for (std::size_t si = 0; si < tree.segments.size(); ++si) {
        const auto& s = tree.segments[si];
        if (s.points.size() < 2) fail(ErrorCode::Spec, "vessel polylines need at least two points");
        if (!(s.radius > 0.0)) fail(ErrorCode::Spec, "vessel radii must be positive");
        if (si > 0) {
          double d = std::numeric_limits<double>::infinity();
          for (std::size_t pi = 0; pi < si; ++pi) d = std::min(d, polyline_distance(s.points.front(), tree.segments[pi].points));
          if (d > 1e-6) fail(ErrorCode::Spec, "vessel segment does not start on an earlier segment of its tree");
        }
        const Vec3 shrunk = inner - Vec3::Constant(s.radius);
        if ((shrunk.array() <= 0).any()) fail(ErrorCode::Spec, "vessel too thick for the skull interior");
        for (std::size_t i = 0; i + 1 < s.points.size(); ++i) {
          const double len = (s.points[i + 1] - s.points[i]).norm();
          const int steps = std::max(1, static_cast<int>(std::ceil(len / 0.5)));
          for (int k = 0; k <= steps; ++k) {
            const Vec3 p = s.points[i] + (s.points[i + 1] - s.points[i]) * (static_cast<double>(k) / steps);
            if ((p - skull.center).cwiseQuotient(shrunk).squaredNorm() > 1.0)
              fail(ErrorCode::Spec, "vessel lies outside the skull interior");
          }
        }
      }
    }
}

RigidParams PhantomSpec::motion_at(std::size_t frame) const {
  if (motion.empty()) return RigidParams::identity(skull.center);
  return motion.at(frame);
}

PhantomSpec spec_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorCode::Spec, "phantom spec must be a JSON object");
  try {
    int dims = 128;
    double spacing = 1.0;
    if (j.contains("geometry")) {
      const auto& g = j.at("geometry");
      if (g.contains("dims")) dims = g.at("dims").is_array() ? g.at("dims")[0].get<int>() : g.at("dims").get<int>();
      if (g.contains("spacing")) spacing = g.at("spacing").is_array() ? g.at("spacing")[0].get<double>() : g.at("spacing").get<double>();
    }
    PhantomSpec s = default_spec(dims, spacing);
    if (j.contains("geometry")) {
      const auto& g = j.at("geometry");
      std::array<int, 3> d = s.geometry.dims;
      Vec3 sp = s.geometry.spacing;
      if (g.contains("dims") && g.at("dims").is_array())
        for (int a = 0; a < 3; ++a) d[a] = g.at("dims")[a].get<int>();
      if (g.contains("spacing") && g.at("spacing").is_array()) sp = vec3(g.at("spacing"));
      Vec3 origin = -0.5 * (Vec3(d[0] - 1, d[1] - 1, d[2] - 1).cwiseProduct(sp));
      if (g.contains("origin")) origin = vec3(g.at("origin"));
      Mat3 dir = Mat3::Identity();
      if (g.contains("direction")) {
        const auto& m = g.at("direction");
        for (int r = 0; r < 3; ++r)
          for (int c = 0; c < 3; ++c) dir(r, c) = m[r][c].get<double>();
      }
      s.geometry = VolumeGeometry(d, sp, origin, dir);
    }
    if (j.contains("skull")) {
      const auto& k = j.at("skull");
      if (k.contains("center")) s.skull.center = vec3(k.at("center"));
      if (k.contains("radii")) s.skull.radii = vec3(k.at("radii"));
      s.skull.thickness = k.value("thickness", s.skull.thickness);
      s.skull.bone_hu = k.value("bone_hu", s.skull.bone_hu);
    }
    s.soft_tissue_hu = j.value("soft_tissue_hu", s.soft_tissue_hu);
    if (j.contains("arteries")) s.arteries = trees_from_json(j.at("arteries"), VesselKind::Artery);
    if (j.contains("veins")) s.veins = trees_from_json(j.at("veins"), VesselKind::Vein);
    if (j.contains("artery_tac"))
      for (auto& t : s.arteries) t.tac = tac_from_json(j.at("artery_tac"), t.tac);
    if (j.contains("vein_tac"))
      for (auto& t : s.veins) t.tac = tac_from_json(j.at("vein_tac"), t.tac);
    if (j.contains("timepoints")) s.timepoints = j.at("timepoints").get<std::vector<double>>();
    if (j.contains("motion")) {
      s.motion.clear();
      for (const auto& m : j.at("motion")) {
        RigidParams p = rigid_from_json(m);
        if (!m.contains("center")) p.center = s.skull.center;
        s.motion.push_back(p);
      }
    }
    s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
    s.rng_seed = j.value("rng_seed", s.rng_seed);
    s.template_scale = j.value("template_scale", s.template_scale);
    s.validate();
    return s;
  } catch (const json::exception& e) {
    fail(ErrorCode::Spec, std::string("malformed phantom spec: ") + e.what());
  }
}

json spec_to_json(const PhantomSpec& s) {
  json j;
  const auto& g = s.geometry;
  json dir = json::array();
  for (int r = 0; r < 3; ++r) dir.push_back({g.direction(r, 0), g.direction(r, 1), g.direction(r, 2)});
  j["geometry"] = {{"dims", {g.dims[0], g.dims[1], g.dims[2]}},
                   {"spacing", to_json(g.spacing)},
                   {"origin", to_json(g.origin)},
                   {"direction", dir}};
  j["skull"] = {{"center", to_json(s.skull.center)},
                {"radii", to_json(s.skull.radii)},
                {"thickness", s.skull.thickness},
                {"bone_hu", s.skull.bone_hu}};
  j["soft_tissue_hu"] = s.soft_tissue_hu;
  j["arteries"] = trees_to_json(s.arteries);
  j["veins"] = trees_to_json(s.veins);
  j["timepoints"] = s.timepoints;
  json motion = json::array();
  for (const auto& m : s.motion) motion.push_back(rigid_to_json(m));
  j["motion"] = motion;
  j["noise_sigma"] = s.noise_sigma;
  j["rng_seed"] = s.rng_seed;
  j["template_scale"] = s.template_scale;
  return j;
}

AnatomyModel::AnatomyModel(const PhantomSpec& spec) : skull_(spec.skull) {
  auto add = [&](const std::vector<VesselTree>& trees, bool artery) {
    for (std::size_t t = 0; t < trees.size(); ++t)
      for (const auto& s : trees[t].segments)
        for (std::size_t i = 0; i + 1 < s.points.size(); ++i)
          capsules_.push_back({s.points[i], s.points[i + 1], s.radius, static_cast<int>(t), artery});
  };
  add(spec.arteries, true);
  add(spec.veins, false);
  lo_ = skull_.center - skull_.radii;
  const Vec3 extent = 2.0 * skull_.radii;
  for (int a = 0; a < 3; ++a) cells_[a] = std::max(1, static_cast<int>(std::ceil(extent[a] / cell_)));
  buckets_.resize(static_cast<std::size_t>(cells_[0]) * cells_[1] * cells_[2]);
  for (int c = 0; c < static_cast<int>(capsules_.size()); ++c) {
    const auto& cap = capsules_[static_cast<std::size_t>(c)];
    const Vec3 lo = cap.a.cwiseMin(cap.b) - Vec3::Constant(cap.radius);
    const Vec3 hi = cap.a.cwiseMax(cap.b) + Vec3::Constant(cap.radius);
    int l[3], h[3];
    for (int a = 0; a < 3; ++a) {
      l[a] = std::clamp(static_cast<int>(std::floor((lo[a] - lo_[a]) / cell_)), 0, cells_[a] - 1);
      h[a] = std::clamp(static_cast<int>(std::floor((hi[a] - lo_[a]) / cell_)), 0, cells_[a] - 1);
    }
    for (int z = l[2]; z <= h[2]; ++z)
      for (int y = l[1]; y <= h[1]; ++y)
        for (int x = l[0]; x <= h[0]; ++x)
          buckets_[(static_cast<std::size_t>(z) * cells_[1] + y) * cells_[0] + x].push_back(c);
  }
}

AnatomyModel::Hit AnatomyModel::classify(const Vec3& world) const {
  const Vec3 q = world - skull_.center;
  if (q.cwiseQuotient(skull_.radii).squaredNorm() > 1.0) return {};
  int cell[3];
  for (int a = 0; a < 3; ++a)
    cell[a] = std::clamp(static_cast<int>(std::floor((world[a] - lo_[a]) / cell_)), 0, cells_[a] - 1);
  const auto& bucket = buckets_[(static_cast<std::size_t>(cell[2]) * cells_[1] + cell[1]) * cells_[0] + cell[0]];
  int artery_tree = -1, vein_tree = -1;
  for (int c : bucket) {
    const auto& cap = capsules_[static_cast<std::size_t>(c)];
    if (point_segment_distance2(world, cap.a, cap.b) > cap.radius * cap.radius) continue;
    int& slot = cap.artery ? artery_tree : vein_tree;
    if (slot < 0 || cap.tree < slot) slot = cap.tree;
  }
  if (artery_tree >= 0) return {Tissue::Artery, artery_tree};
  if (vein_tree >= 0) return {Tissue::Vein, vein_tree};
  const Vec3 inner = skull_.radii - Vec3::Constant(skull_.thickness);
  if (q.cwiseQuotient(inner).squaredNorm() > 1.0) return {Tissue::Bone, -1};
  return {Tissue::SoftTissue, -1};
}

namespace {

VoxelSet trace_centerlines(const std::vector<VesselTree>& trees, const VolumeGeometry& g, const LabelVolume& mask) {
  VoxelSet out;
  out.geometry = g;
  const double step = 0.25 * g.spacing.minCoeff();
  for (const auto& tree : trees)
    for (const auto& s : tree.segments)
      for (std::size_t i = 0; i + 1 < s.points.size(); ++i) {
        const double len = (s.points[i + 1] - s.points[i]).norm();
        const int n = std::max(1, static_cast<int>(std::ceil(len / step)));
        for (int k = 0; k <= n; ++k) {
          const Vec3 p = s.points[i] + (s.points[i + 1] - s.points[i]) * (static_cast<double>(k) / n);
          const Vec3 c = g.world_to_voxel(p);
          const Index3 v{static_cast<int>(std::floor(c[0] + 0.5)), static_cast<int>(std::floor(c[1] + 0.5)),
                         static_cast<int>(std::floor(c[2] + 0.5))};
          if (g.contains(v.i, v.j, v.k) && mask[g.linear(v)]) out.indices.push_back(v);
        }
      }
  out.normalize();
  return out;
}

}  // namespace

Anatomy build_anatomy(const PhantomSpec& spec) {
  spec.validate();
  const auto& g = spec.geometry;
  const AnatomyModel model(spec);
  Anatomy a;
  a.tissue = LabelVolume(g, {{0, "background"}, {1, "soft_tissue"}, {2, "bone"}, {3, "artery"}, {4, "vein"}});
  a.tree_index = LabelVolume(g);
  parallel_for(g.dims[2], [&](std::ptrdiff_t k) {
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i) {
        const auto hit = model.classify(g.voxel_to_world(Vec3(i, j, static_cast<double>(k))));
        const std::size_t idx = g.linear(i, j, static_cast<int>(k));
        a.tissue[idx] = static_cast<std::uint8_t>(hit.tissue);
        a.tree_index[idx] = static_cast<std::uint8_t>(hit.tree + 1);
      }
  });
  auto select = [&](Tissue t, const char* name) {
    LabelVolume m(g, {{0, "background"}, {1, name}});
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = a.tissue[i] == static_cast<std::uint8_t>(t) ? 1 : 0;
    return m;
  };
  a.bone = select(Tissue::Bone, "bone");
  a.soft_tissue = select(Tissue::SoftTissue, "soft_tissue");
  a.artery = select(Tissue::Artery, "artery");
  a.vein = select(Tissue::Vein, "vein");
  a.artery_centerline = trace_centerlines(spec.arteries, g, a.artery);
  a.vein_centerline = trace_centerlines(spec.veins, g, a.vein);
  return a;
}

ScalarVolume render_frame(const Anatomy& anatomy, const PhantomSpec& spec, double t, const RigidParams& motion,
                          std::size_t frame_index) {
  const auto& g = spec.geometry;
  std::vector<double> artery_hu, vein_hu;
  for (const auto& tree : spec.arteries) artery_hu.push_back(spec.soft_tissue_hu + tree.tac.eval(t));
  for (const auto& tree : spec.veins) vein_hu.push_back(spec.soft_tissue_hu + tree.tac.eval(t));
  auto value = [&](Tissue tissue, int tree) -> double {
    switch (tissue) {
      case Tissue::Background: return kAirHu;
      case Tissue::SoftTissue: return spec.soft_tissue_hu;
      case Tissue::Bone: return spec.skull.bone_hu;
      case Tissue::Artery: return artery_hu[static_cast<std::size_t>(tree)];
      case Tissue::Vein: return vein_hu[static_cast<std::size_t>(tree)];
    }
    return kAirHu;
  };
  ScalarVolume out(g);
  parallel_for(static_cast<std::ptrdiff_t>(out.size()), [&](std::ptrdiff_t i) {
    const auto idx = static_cast<std::size_t>(i);
    out[idx] = static_cast<float>(value(static_cast<Tissue>(anatomy.tissue[idx]), anatomy.tree_index[idx] - 1));
  });
  if (!is_identity(motion)) out = resample_with_transform(out, motion, g, kAirHu);
  if (spec.noise_sigma > 0) {
    parallel_for(g.dims[2], [&](std::ptrdiff_t kk) {
      const int k = static_cast<int>(kk);
      std::mt19937_64 rng(splitmix64(spec.rng_seed ^ splitmix64((frame_index + 1) * 0x100000001B3ull + static_cast<std::uint64_t>(k))));
      std::normal_distribution<double> noise(0.0, spec.noise_sigma);
      for (int j = 0; j < g.dims[1]; ++j)
        for (int i = 0; i < g.dims[0]; ++i) {
          float& v = out.at(i, j, k);
          v = static_cast<float>(v + noise(rng));
        }
    });
  }
  return out;
}

LabelVolume PhantomStudy::gt_labels() const {
  LabelVolume out(gt_artery.geometry(), default_label_names());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = gt_artery[i] ? 1 : gt_vein[i] ? 2 : 0;
  return out;
}

std::size_t PhantomStudy::frame_near(double t) const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < frames.size(); ++i)
    if (std::abs(frames[i].time - t) < std::abs(frames[best].time - t)) best = i;
  return best;
}

PhantomStudy generate_study(const PhantomSpec& spec) {
  const Anatomy anatomy = build_anatomy(spec);
  PhantomStudy study;
  study.gt_artery = anatomy.artery;
  study.gt_vein = anatomy.vein;
  study.gt_artery_centerline = anatomy.artery_centerline;
  study.gt_vein_centerline = anatomy.vein_centerline;
  study.baseline_index = 0;
  for (std::size_t f = 0; f < spec.timepoints.size(); ++f) {
    const RigidParams m = spec.motion_at(f);
    study.true_motion.push_back(m);
    study.frames.push_back({spec.timepoints[f], render_frame(anatomy, spec, spec.timepoints[f], m, f)});
  }
  return study;
}

std::pair<ScalarVolume, LabelVolume> make_template(const PhantomSpec& spec) {
  PhantomSpec tpl = spec;
  tpl.arteries.clear();
  tpl.veins.clear();
  tpl.motion.clear();
  tpl.noise_sigma = 0.0;
  tpl.skull.radii = spec.skull.radii / spec.template_scale;
  tpl.skull.thickness = spec.skull.thickness / spec.template_scale;
  const Anatomy a = build_anatomy(tpl);
  ScalarVolume ct = render_frame(a, tpl, tpl.timepoints.front(), RigidParams::identity(), 0);
  LabelVolume roi(spec.geometry, {{0, "background"}, {1, "head"}});
  for (std::size_t i = 0; i < roi.size(); ++i) roi[i] = a.tissue[i] != 0 ? 1 : 0;
  return {std::move(ct), std::move(roi)};
}

std::string frame_filename(double t) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "frame_%06.2f.nii.gz", t);
  return buf;
}

void write_study(const PhantomStudy& study, const PhantomSpec& spec, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json index;
  index["frames"] = json::array();
  for (std::size_t f = 0; f < study.frames.size(); ++f) {
    const std::string name = frame_filename(study.frames[f].time);
    nifti::write_volume(study.frames[f].volume, dir / name);
    index["frames"].push_back({{"index", f}, {"time", study.frames[f].time}, {"file", name}});
  }
  nifti::write_volume(study.gt_artery, dir / "gt_artery.nii.gz");
  nifti::write_volume(study.gt_vein, dir / "gt_vein.nii.gz");
  nifti::write_volume(study.gt_labels(), dir / "gt_labels.nii.gz");
  nifti::write_volume(study.gt_artery_centerline.to_mask(), dir / "artery_centerline.nii.gz");
  nifti::write_volume(study.gt_vein_centerline.to_mask(), dir / "vein_centerline.nii.gz");
  auto write_text = [&](const std::filesystem::path& p, const std::string& text) {
    std::ofstream os(p, std::ios::binary | std::ios::trunc);
    if (!os) fail(ErrorCode::Io, "cannot write " + p.string());
    os << text;
  };
  write_text(dir / "artery_centerline.txt", study.gt_artery_centerline.to_text());
  write_text(dir / "vein_centerline.txt", study.gt_vein_centerline.to_text());
  json motion = json::array();
  for (std::size_t f = 0; f < study.true_motion.size(); ++f) {
    json m = rigid_to_json(study.true_motion[f]);
    m["frame"] = f;
    m["time"] = study.frames[f].time;
    m["convention"] = "pullback";
    m["units"] = "mm,rad";
    motion.push_back(m);
  }
  write_text(dir / "motion.json", motion.dump(2) + "\n");
  const auto [tpl, roi] = make_template(spec);
  nifti::write_volume(tpl, dir / "template.nii.gz");
  nifti::write_volume(roi, dir / "template_roi.nii.gz");
  index["baseline_index"] = study.baseline_index;
  index["arterial_index"] = study.frame_near(27.6);
  index["venous_index"] = study.frame_near(45.3);
  index["spec"] = spec_to_json(spec);
  write_text(dir / "study.json", index.dump(2) + "\n");
}

}  // namespace dv::phantom
