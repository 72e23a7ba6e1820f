#include "dynavessel/metrics.hpp"

#include "dynavessel/error.hpp"
#include "dynavessel/parallel.hpp"
#include "dynavessel/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace dv {

namespace {

void require_same_grid(const VolumeGeometry& a, const VolumeGeometry& b, const char* what) {
  if (!a.same_as(b)) fail(ErrorCode::Geometry, std::string(what) + ": grids differ");
}

}  // namespace

double mdc(const LabelVolume& gt_mask, const LabelVolume& pred_mask) {
  require_same_grid(gt_mask.geometry(), pred_mask.geometry(), "mdc");
  std::size_t a = 0, hit = 0;
  for (std::size_t i = 0; i < gt_mask.size(); ++i) {
    if (!gt_mask[i]) continue;
    ++a;
    hit += pred_mask[i] != 0;
  }
  if (a == 0) fail(ErrorCode::EmptyReference, "mdc: ground-truth mask is empty");
  return static_cast<double>(hit) / static_cast<double>(a);
}

DistanceIndex::DistanceIndex(const VoxelSet& points) {
  const auto& g = points.geometry;
  cell_ = g.spacing.maxCoeff();
  points_.reserve(points.size());
  lo_ = {std::numeric_limits<std::int64_t>::max(), std::numeric_limits<std::int64_t>::max(),
         std::numeric_limits<std::int64_t>::max()};
  hi_ = {std::numeric_limits<std::int64_t>::min(), std::numeric_limits<std::int64_t>::min(),
         std::numeric_limits<std::int64_t>::min()};
  for (const Index3& v : points.indices) {
    const Vec3 p = g.voxel_to_world(v);
    const auto c = cell_of(p);
    for (int a = 0; a < 3; ++a) {
      lo_[a] = std::min(lo_[a], c[a]);
      hi_[a] = std::max(hi_[a], c[a]);
    }
    cells_[key(c[0], c[1], c[2])].push_back(static_cast<std::uint32_t>(points_.size()));
    points_.push_back(p);
  }
}

std::array<std::int64_t, 3> DistanceIndex::cell_of(const Vec3& p) const {
  return {static_cast<std::int64_t>(std::floor(p.x() / cell_)), static_cast<std::int64_t>(std::floor(p.y() / cell_)),
          static_cast<std::int64_t>(std::floor(p.z() / cell_))};
}

DistanceIndex::Key DistanceIndex::key(std::int64_t x, std::int64_t y, std::int64_t z) {
  constexpr std::int64_t bias = std::int64_t{1} << 20;
  constexpr std::uint64_t mask = (std::uint64_t{1} << 21) - 1;
  return (static_cast<std::uint64_t>(x + bias) & mask) << 42 | (static_cast<std::uint64_t>(y + bias) & mask) << 21 |
         (static_cast<std::uint64_t>(z + bias) & mask);
}

double DistanceIndex::nearest(const Vec3& q) const {
  if (points_.empty()) fail(ErrorCode::EmptySurface, "distance query against an empty point set");
  double best2 = std::numeric_limits<double>::infinity();
  auto brute = [&] {
    for (const Vec3& p : points_) best2 = std::min(best2, (p - q).squaredNorm());
    return std::sqrt(best2);
  };
  const auto qc = cell_of(q);
  auto visit = [&](std::int64_t x, std::int64_t y, std::int64_t z) {
    if (x < lo_[0] || x > hi_[0] || y < lo_[1] || y > hi_[1] || z < lo_[2] || z > hi_[2]) return;
    const auto it = cells_.find(key(x, y, z));
    if (it == cells_.end()) return;
    for (std::uint32_t id : it->second) best2 = std::min(best2, (points_[id] - q).squaredNorm());
  };
  for (std::int64_t r = 0;; ++r) {
    // the shell costs ~24 r^2 lookups; past the point count a scan is cheaper
    if (r > 0 && 24 * r * r > static_cast<std::int64_t>(points_.size())) return brute();
    for (std::int64_t dz = -r; dz <= r; ++dz) {
      const std::int64_t z = qc[2] + dz;
      if (z < lo_[2] || z > hi_[2]) continue;
      for (std::int64_t dy = -r; dy <= r; ++dy) {
        const std::int64_t y = qc[1] + dy;
        if (y < lo_[1] || y > hi_[1]) continue;
        if (std::abs(dz) == r || std::abs(dy) == r) {
          for (std::int64_t dx = -r; dx <= r; ++dx) visit(qc[0] + dx, y, z);
        } else {
          visit(qc[0] - r, y, z);
          if (r > 0) visit(qc[0] + r, y, z);
        }
      }
    }
    // cells in later rings are at least r cells away
    if (std::sqrt(best2) <= static_cast<double>(r) * cell_) return std::sqrt(best2);
    bool covered = true;
    for (int a = 0; a < 3; ++a) covered = covered && qc[a] - r <= lo_[a] && qc[a] + r >= hi_[a];
    if (covered) return std::sqrt(best2);
  }
}

double adhd(const VoxelSet& gt_surface, const VoxelSet& pred_surface) {
  if (gt_surface.empty()) fail(ErrorCode::EmptySurface, "adhd: ground-truth surface is empty");
  if (pred_surface.empty()) fail(ErrorCode::EmptySurface, "adhd: predicted surface is empty");
  const DistanceIndex index(pred_surface);
  const auto& g = gt_surface.geometry;
  const auto n = static_cast<std::ptrdiff_t>(gt_surface.size());
  constexpr std::ptrdiff_t kChunks = 64;
  const double total = ordered_sum<double>(kChunks, [&](std::ptrdiff_t c) {
    double part = 0.0;
    for (std::ptrdiff_t s = n * c / kChunks; s < n * (c + 1) / kChunks; ++s)
      part += index.nearest(g.voxel_to_world(gt_surface.indices[static_cast<std::size_t>(s)]));
    return part;
  });
  return total / static_cast<double>(n);
}

double tsens(const VoxelSet& gt_centerline, const LabelVolume& pred_mask) {
  if (gt_centerline.empty()) fail(ErrorCode::EmptyReference, "tsens: centerline is empty");
  require_same_grid(gt_centerline.geometry, pred_mask.geometry(), "tsens");
  std::size_t hit = 0;
  for (const Index3& v : gt_centerline.indices) hit += pred_mask[pred_mask.geometry().linear(v)] != 0;
  return static_cast<double>(hit) / static_cast<double>(gt_centerline.size());
}

double mean_hu(const ScalarVolume& vol, const VoxelSet& points) {
  if (points.empty()) fail(ErrorCode::EmptyReference, "mean_hu: point set is empty");
  const auto& g = vol.geometry();
  double sum = 0.0;
  for (const Index3& v : points.indices) {
    if (!g.contains(v.i, v.j, v.k)) fail(ErrorCode::Geometry, "mean_hu: point outside the volume");
    sum += vol[g.linear(v)];
  }
  return sum / static_cast<double>(points.size());
}

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::Arterial: return "arterial";
    case Phase::Venous: return "venous";
    default: return "unknown";
  }
}

Phase classify_phase(const ScalarVolume& vol, const VoxelSet& artery_cl, const VoxelSet& vein_cl) {
  return mean_hu(vol, artery_cl) > mean_hu(vol, vein_cl) ? Phase::Arterial : Phase::Venous;
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json labels = nlohmann::json::object();
  for (const auto& m : per_label) {
    nlohmann::json row = {{"gt_label", m.gt_label}, {"pred_label", m.pred_label}, {"gt_voxels", m.gt_voxels},
                          {"absent", m.absent}};
    if (m.absent) {
      row["mdc"] = nullptr;
      row["tsens"] = nullptr;
      row["adhd"] = nullptr;
    } else {
      row["mdc"] = m.mdc;
      row["tsens"] = m.tsens;
      row["adhd"] = m.adhd ? nlohmann::json(*m.adhd) : nlohmann::json(nullptr);
    }
    labels[m.name] = row;
  }
  return {{"case_id", case_id}, {"per_label", labels}, {"phase", phase_name(phase)}, {"mean_hu", mean_hu},
          {"provenance", provenance}};
}

namespace {

std::uint8_t resolve_label(const nlohmann::json& token, const LabelNames& names, const char* side) {
  if (token.is_number_integer()) {
    const auto v = token.get<int>();
    if (v < 0 || v > 255) fail(ErrorCode::Config, std::string("pairing: ") + side + " label out of range");
    return static_cast<std::uint8_t>(v);
  }
  if (!token.is_string()) fail(ErrorCode::Config, std::string("pairing: ") + side + " label must be a name or number");
  const auto s = token.get<std::string>();
  for (const auto& [label, name] : names)
    if (name == s) return label;
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (!s.empty() && *end == '\0' && v >= 0 && v <= 255) return static_cast<std::uint8_t>(v);
  fail(ErrorCode::Config, std::string("pairing: unknown ") + side + " label '" + s + "'");
}

LabelNames names_from_json(const nlohmann::json& j, LabelNames base) {
  for (const auto& [k, v] : j.items()) {
    const int label = std::stoi(k);
    if (label < 0 || label > 255 || !v.is_string()) fail(ErrorCode::Config, "pairing: bad label name entry '" + k + "'");
    base[static_cast<std::uint8_t>(label)] = v.get<std::string>();
  }
  return base;
}

}  // namespace

Pairing pairing_from_json(const nlohmann::json& j, const LabelNames& gt_names, const LabelNames& pred_names) {
  try {
    if (!j.is_object()) fail(ErrorCode::Config, "pairing must be a JSON object");
    LabelNames gn = gt_names, pn = pred_names;
    const nlohmann::json* map = &j;
    if (j.contains("pairing")) {
      if (j.contains("gt")) gn = names_from_json(j.at("gt"), gn);
      if (j.contains("pred")) pn = names_from_json(j.at("pred"), pn);
      map = &j.at("pairing");
    }
    Pairing out;
    for (const auto& [k, v] : map->items()) out[resolve_label(nlohmann::json(k), gn, "gt")] = resolve_label(v, pn, "pred");
    return out;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Config, std::string("pairing: ") + e.what());
  } catch (const std::invalid_argument&) {
    fail(ErrorCode::Config, "pairing: label keys must be integers");
  }
}

MetricsReport evaluate_case(const LabelVolume& gt, const LabelVolume& pred, const Pairing& pairing,
                            const ScalarVolume* vol, const EvaluateOptions& opts) {
  require_same_grid(gt.geometry(), pred.geometry(), "evaluate");
  if (vol) require_same_grid(gt.geometry(), vol->geometry(), "evaluate volume");
  LabelVolume named = gt;
  named.ensure_names();
  MetricsReport report;
  std::map<std::string, VoxelSet> centerline_by_name;
  for (const auto& [label, name] : named.label_names()) {
    if (label == 0) continue;
    const auto pit = pairing.find(label);
    if (pit == pairing.end()) fail(ErrorCode::Config, "no pairing entry for ground-truth label '" + name + "'");
    LabelMetrics m;
    m.gt_label = label;
    m.pred_label = pit->second;
    m.name = name;
    const LabelVolume gt_mask = gt.select(label);
    m.gt_voxels = gt_mask.count_nonzero();
    if (m.gt_voxels == 0) {
      m.absent = true;
      report.per_label.push_back(m);
      continue;
    }
    const LabelVolume pred_mask = pred.select(pit->second);
    const auto cit = opts.centerlines.find(label);
    VoxelSet centerline = cit != opts.centerlines.end() ? cit->second : skeletonize(gt_mask);
    m.mdc = mdc(gt_mask, pred_mask);
    m.tsens = tsens(centerline, pred_mask);
    if (pred_mask.count_nonzero() > 0) m.adhd = adhd(extract_surface(gt_mask), extract_surface(pred_mask));
    centerline_by_name[name] = std::move(centerline);
    report.per_label.push_back(m);
  }
  if (vol) {
    const auto a = centerline_by_name.find("artery");
    const auto v = centerline_by_name.find("vein");
    if (a != centerline_by_name.end() && v != centerline_by_name.end()) {
      report.mean_hu["artery"] = mean_hu(*vol, a->second);
      report.mean_hu["vein"] = mean_hu(*vol, v->second);
      report.phase = report.mean_hu["artery"] > report.mean_hu["vein"] ? Phase::Arterial : Phase::Venous;
    }
  }
  nlohmann::json pj = nlohmann::json::object();
  for (const auto& [g, p] : pairing) pj[std::to_string(g)] = p;
  report.provenance["pairing"] = pj;
  return report;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::string reports_csv(const std::vector<MetricsReport>& reports) {
  std::ostringstream os;
  os << "case_id,label,mdc,tsens,adhd_mm,gt_voxels,phase\n";
  for (const auto& r : reports)
    for (const auto& m : r.per_label) {
      os << r.case_id << ',' << m.name << ',';
      if (m.absent)
        os << "nan,nan,nan,";
      else
        os << fmt(m.mdc) << ',' << fmt(m.tsens) << ',' << (m.adhd ? fmt(*m.adhd) : std::string("nan")) << ',';
      os << m.gt_voxels << ',' << phase_name(r.phase) << '\n';
    }
  return os.str();
}

MeanSd mean_sd(const std::vector<double>& values) {
  MeanSd out;
  out.n = values.size();
  if (values.empty()) return out;
  double s = 0.0;
  for (double v : values) s += v;
  out.mean = s / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

nlohmann::json aggregate_reports(const std::vector<MetricsReport>& reports) {
  std::map<std::string, std::array<std::vector<double>, 3>> by_label;
  for (const auto& r : reports)
    for (const auto& m : r.per_label) {
      if (m.absent) continue;
      auto& cols = by_label[m.name];
      cols[0].push_back(m.mdc);
      cols[1].push_back(m.tsens);
      if (m.adhd) cols[2].push_back(*m.adhd);
    }
  nlohmann::json out = nlohmann::json::object();
  static constexpr const char* kNames[3] = {"mdc", "tsens", "adhd"};
  for (const auto& [name, cols] : by_label) {
    nlohmann::json row;
    for (int c = 0; c < 3; ++c) {
      const MeanSd ms = mean_sd(cols[static_cast<std::size_t>(c)]);
      row[kNames[c]] = {{"mean", ms.mean}, {"sd", ms.sd}, {"n", ms.n}};
    }
    out[name] = row;
  }
  return out;
}

}  // namespace dv
