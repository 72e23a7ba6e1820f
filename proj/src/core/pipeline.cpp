#include "dynavessel/pipeline.hpp"

#include "dynavessel/digest.hpp"
#include "dynavessel/error.hpp"
#include "dynavessel/imaging.hpp"
#include "dynavessel/metrics.hpp"
#include "dynavessel/nifti.hpp"
#include "dynavessel/phantom.hpp"
#include "dynavessel/segmentation.hpp"
#include "dynavessel/suppression.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace dv::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;
constexpr std::uint64_t kDefaultSeed = 20250101;

struct KindInfo {
  std::vector<std::string> inputs;  // required slots
  std::set<std::string> params;     // accepted parameter names
};

const std::map<std::string, KindInfo>& kinds() {
  static const std::map<std::string, KindInfo> k = {
      {"phantom", {{}, {"spec", "spec_file"}}},
      {"preprocess", {{"study"}, {"spacing", "roi", "register_baseline", "arterial_time", "venous_time"}}},
      {"suppress", {{"volumes"}, {"alg1_operand", "register"}}},
      {"segment",
       {{"volumes"},
        {"method", "threshold_hu", "radius", "k", "r", "p", "q", "bins", "alpha", "min_component", "connectivity"}}},
      {"evaluate", {{"pred", "study"}, {"pairing", "phase_frame"}}},
      {"report", {{"metrics"}, {}}},
  };
  return k;
}

std::vector<std::string> ref_list(const json& v) {
  std::vector<std::string> out;
  if (v.is_string()) out.push_back(v.get<std::string>());
  if (v.is_array())
    for (const auto& e : v)
      if (e.is_string()) out.push_back(e.get<std::string>());
  return out;
}

bool is_file_ref(const std::string& r) { return r.rfind("file:", 0) == 0; }

fs::path resolve(const fs::path& base, const fs::path& p) { return p.is_absolute() ? p : base / p; }

std::string stage_name(const json& st) {
  if (st.contains("name") && st["name"].is_string()) return st["name"].get<std::string>();
  if (st.contains("kind") && st["kind"].is_string()) return st["kind"].get<std::string>();
  return "";
}

void check_params(const std::string& kind, const std::string& name, const json& params, const fs::path& base,
                  std::vector<Diagnostic>& out) {
  auto range = [&](const std::string& msg) { out.push_back({"range", name, msg}); };
  auto num = [&](const char* key, auto pred, const char* what) {
    if (!params.contains(key)) return;
    const auto& v = params[key];
    if (!v.is_number()) {
      out.push_back({"schema", name, std::string("parameter '") + key + "' must be a number"});
      return;
    }
    if (!pred(v.get<double>())) range(std::string("parameter '") + key + "' must be " + what);
  };
  auto boolean = [&](const char* key) {
    if (params.contains(key) && !params[key].is_boolean())
      out.push_back({"schema", name, std::string("parameter '") + key + "' must be a boolean"});
  };
  auto positive = [](double x) { return x > 0.0 && std::isfinite(x); };
  auto non_negative = [](double x) { return x >= 0.0 && std::isfinite(x); };
  auto finite = [](double x) { return std::isfinite(x); };

  if (kind == "phantom") {
    try {
      json spec = json::object();
      if (params.contains("spec_file")) {
        std::ifstream is(resolve(base, params["spec_file"].get<std::string>()));
        if (!is) {
          out.push_back({"unresolved_reference", name, "spec_file does not exist"});
          return;
        }
        spec = json::parse(is);
      }
      if (params.contains("spec")) spec = params["spec"];
      phantom::spec_from_json(spec).validate();
    } catch (const Error& e) {
      range(std::string("phantom spec: ") + e.what());
    } catch (const std::exception& e) {
      out.push_back({"schema", name, std::string("phantom spec: ") + e.what()});
    }
  } else if (kind == "preprocess") {
    num("spacing", positive, "positive");
    num("arterial_time", non_negative, "non-negative");
    num("venous_time", non_negative, "non-negative");
    boolean("roi");
    boolean("register_baseline");
  } else if (kind == "suppress") {
    boolean("register");
    if (params.contains("alg1_operand")) {
      const auto& v = params["alg1_operand"];
      if (!v.is_string() || (v != "subtracted" && v != "raw")) range("alg1_operand must be 'subtracted' or 'raw'");
    }
  } else if (kind == "segment") {
    if (params.contains("method")) {
      const auto& v = params["method"];
      if (!v.is_string() || (v != "threshold" && v != "phansalkar" && v != "kapur"))
        range("method must be threshold, phansalkar or kapur");
    }
    num("threshold_hu", finite, "finite");
    num("radius", [](double x) { return x >= 1.0 && x == std::floor(x); }, "an integer >= 1");
    num("k", finite, "finite");
    num("r", positive, "positive");
    num("p", finite, "finite");
    num("q", finite, "finite");
    num("bins", [](double x) { return x >= 2.0 && x == std::floor(x); }, "an integer >= 2");
    num("alpha", positive, "positive");
    num("min_component", [](double x) { return x >= 0.0 && x == std::floor(x); }, "a non-negative integer");
    num("connectivity", [](double x) { return x == 6.0 || x == 26.0; }, "6 or 26");
  } else if (kind == "evaluate") {
    if (params.contains("pairing") && !params["pairing"].is_object())
      out.push_back({"schema", name, "pairing must be an object"});
    if (params.contains("phase_frame")) {
      const auto& v = params["phase_frame"];
      if (!v.is_string() || (v != "arterial" && v != "venous")) range("phase_frame must be 'arterial' or 'venous'");
    }
  }
}

}  // namespace

std::vector<Diagnostic> validate_impl(const json& config, const fs::path& base) {
  std::vector<Diagnostic> out;
  if (!config.is_object()) {
    out.push_back({"schema", "", "config must be a JSON object"});
    return out;
  }
  for (const auto& [key, _] : config.items())
    if (key != "stages" && key != "workspace" && key != "cache" && key != "seed")
      out.push_back({"schema", "", "unknown top-level key '" + key + "'"});
  if (!config.contains("workspace") || !config["workspace"].is_string() || config["workspace"].get<std::string>().empty())
    out.push_back({"schema", "", "workspace must be a non-empty string"});
  if (config.contains("cache") && !config["cache"].is_boolean()) out.push_back({"schema", "", "cache must be a boolean"});
  if (config.contains("seed") && !(config["seed"].is_number_integer() && config["seed"].get<std::int64_t>() >= 0))
    out.push_back({"range", "", "seed must be a non-negative integer"});
  if (!config.contains("stages") || !config["stages"].is_array() || config["stages"].empty()) {
    out.push_back({"schema", "", "stages must be a non-empty array"});
    return out;
  }
  std::map<std::string, std::string> seen;  // name -> kind
  for (const auto& st : config["stages"]) {
    if (!st.is_object()) {
      out.push_back({"schema", "", "each stage must be an object"});
      continue;
    }
    const std::string name = stage_name(st);
    if (!st.contains("kind") || !st["kind"].is_string()) {
      out.push_back({"schema", name, "stage kind missing"});
      continue;
    }
    const std::string kind = st["kind"].get<std::string>();
    const auto kit = kinds().find(kind);
    if (kit == kinds().end()) {
      out.push_back({"unknown_kind", name, "unknown stage kind '" + kind + "'"});
      continue;
    }
    if (name.empty() || name.find('/') != std::string::npos || name[0] == '.')
      out.push_back({"schema", name, "stage names must be non-empty and contain no '/' or leading '.'"});
    if (seen.count(name)) out.push_back({"duplicate", name, "duplicate stage name"});
    for (const auto& [key, _] : st.items())
      if (key != "name" && key != "kind" && key != "inputs" && key != "params")
        out.push_back({"schema", name, "unknown stage key '" + key + "'"});
    const json inputs = st.value("inputs", json::object());
    const json params = st.value("params", json::object());
    if (!inputs.is_object()) out.push_back({"schema", name, "inputs must be an object"});
    if (!params.is_object()) out.push_back({"schema", name, "params must be an object"});
    if (inputs.is_object()) {
      for (const auto& slot : kit->second.inputs) {
        if (!inputs.contains(slot)) {
          out.push_back({"unresolved_reference", name, "missing input '" + slot + "'"});
          continue;
        }
        const auto refs = ref_list(inputs[slot]);
        if (refs.empty()) out.push_back({"schema", name, "input '" + slot + "' must name a stage or file:"});
        for (const auto& r : refs) {
          if (is_file_ref(r)) {
            if (!fs::exists(resolve(base, r.substr(5))))
              out.push_back({"unresolved_reference", name, "input '" + slot + "' file not found: " + r.substr(5)});
          } else if (!seen.count(r)) {
            out.push_back({"unresolved_reference", name, "input '" + slot + "' references undefined stage '" + r + "'"});
          }
        }
      }
      for (const auto& [slot, _] : inputs.items())
        if (std::find(kit->second.inputs.begin(), kit->second.inputs.end(), slot) == kit->second.inputs.end())
          out.push_back({"schema", name, "unknown input '" + slot + "'"});
    }
    if (params.is_object()) {
      for (const auto& [key, _] : params.items())
        if (!kit->second.params.count(key)) out.push_back({"schema", name, "unknown parameter '" + key + "'"});
      check_params(kind, name, params, base, out);
    }
    seen[name] = kind;
  }
  return out;
}

std::vector<Diagnostic> validate(const json& config) { return validate_impl(config, fs::current_path()); }

json load_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::Io, "cannot open config " + path.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    fail(ErrorCode::Config, "config is not valid JSON: " + std::string(e.what()));
  }
}

fs::path cache_dir(const fs::path& workspace) {
  if (const char* env = std::getenv("DYNAVESSEL_CACHE"); env && *env) return env;
  return workspace / ".cache";
}

namespace {

class WorkspaceLock {
public:
  explicit WorkspaceLock(const fs::path& workspace) : path_(workspace / ".dynavessel.lock") {
    fs::create_directories(workspace);
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
      if (errno == EEXIST) fail(ErrorCode::Locked, "workspace is locked by another run: " + path_.string());
      fail(ErrorCode::Io, "cannot create lock file " + path_.string() + ": " + std::strerror(errno));
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
    ::close(fd);
  }
  ~WorkspaceLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  WorkspaceLock(const WorkspaceLock&) = delete;
  WorkspaceLock& operator=(const WorkspaceLock&) = delete;

private:
  fs::path path_;
};

/// Relative path -> digest for every regular file under dir.
json directory_digests(const fs::path& dir) {
  std::vector<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), dir).generic_string());
  std::sort(files.begin(), files.end());
  json out = json::object();
  for (const auto& f : files) out[f] = sha256_file(dir / f);
  return out;
}

std::string combined_digest(const json& digests) {
  std::string s;
  for (const auto& [k, v] : digests.items()) s += k + ":" + v.get<std::string>() + "\n";
  return sha256_hex(s);
}

void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  if (!os) fail(ErrorCode::Io, "cannot write " + p.string());
  os << text;
}

json read_json(const fs::path& p) {
  std::ifstream is(p);
  if (!is) fail(ErrorCode::Io, "cannot open " + p.string());
  return json::parse(is);
}

std::string read_text(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) fail(ErrorCode::Io, "cannot open " + p.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

struct StageContext {
  std::string name;
  std::string kind;
  json params;
  std::map<std::string, std::vector<fs::path>> inputs;
  fs::path out;
  fs::path base;
  std::uint64_t seed = kDefaultSeed;

  const fs::path& input(const std::string& slot) const { return inputs.at(slot).front(); }
};

std::size_t frame_index(const json& study, double t) {
  std::size_t best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (const auto& f : study["frames"]) {
    const double d = std::abs(f["time"].get<double>() - t);
    if (d < bd) {
      bd = d;
      best = f["index"].get<std::size_t>();
    }
  }
  return best;
}

fs::path frame_path(const fs::path& dir, const json& study, std::size_t index) {
  return dir / study["frames"].at(index)["file"].get<std::string>();
}

void run_phantom(const StageContext& c) {
  json spec_json = json::object();
  if (c.params.contains("spec_file")) spec_json = read_json(resolve(c.base, c.params["spec_file"].get<std::string>()));
  if (c.params.contains("spec")) spec_json = c.params["spec"];
  if (!spec_json.contains("rng_seed")) spec_json["rng_seed"] = c.seed;
  const phantom::PhantomSpec spec = phantom::spec_from_json(spec_json);
  spec.validate();
  phantom::write_study(phantom::generate_study(spec), spec, c.out);
}

void run_preprocess(const StageContext& c) {
  const fs::path sdir = c.input("study");
  const json study = read_json(sdir / "study.json");
  const double spacing = c.params.value("spacing", 0.468);
  const bool use_roi = c.params.value("roi", true);
  const bool reg = c.params.value("register_baseline", false);
  const std::size_t i0 = study.value("baseline_index", std::size_t{0});
  const std::size_t ia = frame_index(study, c.params.value("arterial_time", 27.6));
  const std::size_t iv = frame_index(study, c.params.value("venous_time", 45.3));
  const ScalarVolume x0 = nifti::read_volume(frame_path(sdir, study, i0));
  ScalarVolume xa = nifti::read_volume(frame_path(sdir, study, ia));
  ScalarVolume xv = nifti::read_volume(frame_path(sdir, study, iv));
  ScalarVolume sa = subtract_baseline(xa, x0, reg);
  ScalarVolume sv = subtract_baseline(xv, x0, reg);
  LabelVolume roi(x0.geometry(), {{0, "background"}, {1, "roi"}});
  if (use_roi) {
    roi = head_roi_mask(x0, nifti::read_volume(sdir / "template.nii.gz"), nifti::read_labels(sdir / "template_roi.nii.gz"));
    xa = apply_mask(xa, roi, kAirHu);
    xv = apply_mask(xv, roi, kAirHu);
    sa = apply_mask(sa, roi, 0.0f);
    sv = apply_mask(sv, roi, 0.0f);
  } else {
    std::fill(roi.data().begin(), roi.data().end(), 1);
  }
  const VolumeGeometry target = isotropic_geometry(x0.geometry(), spacing);
  const bool same = target.same_as(x0.geometry(), 1e-12);
  auto iso = [&](const ScalarVolume& v, float fill) { return same ? v : resample_to(v, target, fill); };
  nifti::write_volume(iso(xa, kAirHu), c.out / "x_a.nii.gz");
  nifti::write_volume(iso(xv, kAirHu), c.out / "x_v.nii.gz");
  nifti::write_volume(iso(sa, 0.0f), c.out / "s_a.nii.gz");
  nifti::write_volume(iso(sv, 0.0f), c.out / "s_v.nii.gz");
  nifti::write_volume(same ? roi : resample_labels_to(roi, target), c.out / "roi.nii.gz");
  const json info = {{"baseline_index", i0}, {"arterial_index", ia}, {"venous_index", iv},
                     {"spacing", spacing},   {"roi", use_roi},       {"register_baseline", reg}};
  write_text(c.out / "preprocess.json", info.dump(2) + "\n");
}

void run_suppress(const StageContext& c) {
  const fs::path in = c.input("volumes");
  SeparationOptions opts;
  opts.operand = parse_alg1_operand(c.params.value("alg1_operand", std::string("subtracted")));
  opts.register_phases = c.params.value("register", true);
  const SeparationResult r =
      vessel_separate(nifti::read_volume(in / "s_a.nii.gz"), nifti::read_volume(in / "s_v.nii.gz"),
                      nifti::read_volume(in / "x_a.nii.gz"), nifti::read_volume(in / "x_v.nii.gz"), opts);
  nifti::write_volume(r.s_star_a, c.out / "s_star_a.nii.gz");
  nifti::write_volume(r.s_star_v, c.out / "s_star_v.nii.gz");
  const json t = {{"g_ra", transform_to_json(r.g_ra)},
                  {"g_rv", transform_to_json(r.g_rv)},
                  {"ncc_ra", r.ncc_ra},
                  {"ncc_rv", r.ncc_rv},
                  {"alg1_operand", alg1_operand_name(opts.operand)},
                  {"register", opts.register_phases},
                  {"inputs", directory_digests(in)}};
  write_text(c.out / "transforms.json", t.dump(2) + "\n");
}

LabelVolume segment_one(const ScalarVolume& v, const json& p) {
  const std::string method = p.value("method", std::string("threshold"));
  LabelVolume mask;
  if (method == "threshold") {
    mask = threshold_above(v, p.value("threshold_hu", 100.0f));
  } else if (method == "phansalkar") {
    PhansalkarParams pp;
    pp.window_radius = p.value("radius", pp.window_radius);
    pp.k = p.value("k", pp.k);
    pp.r = p.value("r", pp.r);
    pp.p = p.value("p", pp.p);
    pp.q = p.value("q", pp.q);
    mask = phansalkar_threshold(v, pp);
  } else {
    mask = kapur_segment(v, p.value("bins", 256), p.value("alpha", 1.0));
  }
  const auto min_component = p.value("min_component", std::size_t{0});
  if (min_component > 1)
    mask = remove_small_components(mask, parse_connectivity(p.value("connectivity", 26)), min_component);
  return mask;
}

void run_segment(const StageContext& c) {
  const fs::path in = c.input("volumes");
  const LabelVolume a = segment_one(nifti::read_volume(in / "s_star_a.nii.gz"), c.params);
  const LabelVolume v = segment_one(nifti::read_volume(in / "s_star_v.nii.gz"), c.params);
  if (!a.geometry().same_as(v.geometry())) fail(ErrorCode::Geometry, "arterial and venous outputs differ in grid");
  LabelVolume labels(a.geometry(), default_label_names());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = a[i] ? 1 : v[i] ? 2 : 0;
  nifti::write_volume(a, c.out / "artery_mask.nii.gz");
  nifti::write_volume(v, c.out / "vein_mask.nii.gz");
  nifti::write_volume(labels, c.out / "pred_labels.nii.gz");
}

void run_evaluate(const StageContext& c) {
  const fs::path sdir = c.input("study");
  const fs::path pdir = c.input("pred");
  const json study = read_json(sdir / "study.json");
  const LabelVolume gt = nifti::read_labels(sdir / "gt_labels.nii.gz");
  LabelVolume pred = nifti::read_labels(pdir / "pred_labels.nii.gz");
  if (!pred.geometry().same_as(gt.geometry())) pred = resample_labels_to(pred, gt.geometry());
  const json pj = c.params.value("pairing", json{{"pairing", {{"artery", "artery"}, {"vein", "vein"}}}});
  const Pairing pairing = pairing_from_json(pj, gt.label_names(), pred.label_names());
  EvaluateOptions opts;
  opts.centerlines[1] = VoxelSet::from_text(read_text(sdir / "artery_centerline.txt"), gt.geometry());
  opts.centerlines[2] = VoxelSet::from_text(read_text(sdir / "vein_centerline.txt"), gt.geometry());
  const bool venous = c.params.value("phase_frame", std::string("arterial")) == "venous";
  const std::size_t fi = venous ? study["venous_index"].get<std::size_t>() : study["arterial_index"].get<std::size_t>();
  const ScalarVolume frame = nifti::read_volume(frame_path(sdir, study, fi));
  MetricsReport report = evaluate_case(gt, pred, pairing, &frame, opts);
  report.case_id = c.name;
  report.provenance["gt_digest"] = sha256_file(sdir / "gt_labels.nii.gz");
  report.provenance["pred_digest"] = sha256_file(pdir / "pred_labels.nii.gz");
  report.provenance["phase_frame"] = frame_path(sdir, study, fi).filename().string();
  write_text(c.out / "report.json", report.to_json().dump(2) + "\n");
  write_text(c.out / "report.csv", reports_csv({report}));
}

void run_report(const StageContext& c) {
  std::string csv;
  std::map<std::string, std::array<std::vector<double>, 3>> cols;
  for (const auto& dir : c.inputs.at("metrics")) {
    const std::string text = read_text(dir / "report.csv");
    csv += csv.empty() ? text : text.substr(text.find('\n') + 1);
    const json r = read_json(dir / "report.json");
    for (const auto& [name, row] : r["per_label"].items()) {
      if (row.value("absent", false)) continue;
      auto& col = cols[name];
      col[0].push_back(row["mdc"].get<double>());
      col[1].push_back(row["tsens"].get<double>());
      if (!row["adhd"].is_null()) col[2].push_back(row["adhd"].get<double>());
    }
  }
  json summary = json::object();
  static constexpr const char* kNames[3] = {"mdc", "tsens", "adhd"};
  for (const auto& [name, col] : cols)
    for (int i = 0; i < 3; ++i) {
      const MeanSd ms = mean_sd(col[static_cast<std::size_t>(i)]);
      summary[name][kNames[i]] = {{"mean", ms.mean}, {"sd", ms.sd}, {"n", ms.n}};
    }
  write_text(c.out / "metrics.csv", csv);
  write_text(c.out / "summary.json", summary.dump(2) + "\n");
}

void execute(const StageContext& c) {
  if (c.kind == "phantom") return run_phantom(c);
  if (c.kind == "preprocess") return run_preprocess(c);
  if (c.kind == "suppress") return run_suppress(c);
  if (c.kind == "segment") return run_segment(c);
  if (c.kind == "evaluate") return run_evaluate(c);
  if (c.kind == "report") return run_report(c);
  fail(ErrorCode::Config, "unknown stage kind " + c.kind);
}

}  // namespace

json run(const json& config, const fs::path& base_dir) {
  const auto diags = validate_impl(config, base_dir);
  if (!diags.empty()) {
    std::string msg = "invalid pipeline config:";
    for (const auto& d : diags) msg += " [" + d.code + (d.stage.empty() ? "" : " " + d.stage) + "] " + d.message + ";";
    fail(ErrorCode::Config, msg);
  }
  const fs::path workspace = resolve(base_dir, config["workspace"].get<std::string>());
  const bool use_cache = config.value("cache", true);
  const std::uint64_t seed = config.value("seed", kDefaultSeed);
  const WorkspaceLock lock(workspace);
  const fs::path cdir = cache_dir(workspace);
  if (use_cache) fs::create_directories(cdir);

  json manifest = {{"version", kFormatVersion},
                   {"workspace", workspace.string()},
                   {"seed", seed},
                   {"cache", use_cache},
                   {"config_digest", sha256_hex(config.dump())},
                   {"stages", json::array()},
                   {"status", "running"}};
  auto write_manifest = [&] { write_text(workspace / "manifest.json", manifest.dump(2) + "\n"); };

  std::map<std::string, fs::path> stage_dirs;
  std::map<std::string, std::string> stage_digests;
  int executed = 0;
  for (const auto& st : config["stages"]) {
    StageContext c;
    c.name = stage_name(st);
    c.kind = st["kind"].get<std::string>();
    c.params = st.value("params", json::object());
    c.out = workspace / c.name;
    c.base = base_dir;
    c.seed = seed;
    json input_digests = json::object();
    const json inputs = st.value("inputs", json::object());
    for (const auto& [slot, refs] : inputs.items()) {
      json ds = json::array();
      for (const auto& r : ref_list(refs)) {
        fs::path dir;
        std::string digest;
        if (is_file_ref(r)) {
          dir = resolve(base_dir, r.substr(5));
          digest = combined_digest(directory_digests(dir));
        } else {
          dir = stage_dirs.at(r);
          digest = stage_digests.at(r);
        }
        c.inputs[slot].push_back(dir);
        ds.push_back(digest);
      }
      input_digests[slot] = ds;
    }
    const json key_doc = {{"version", kFormatVersion}, {"kind", c.kind}, {"params", c.params},
                          {"seed", c.kind == "phantom" ? json(seed) : json(nullptr)}, {"inputs", input_digests}};
    const std::string key = sha256_hex(key_doc.dump());
    json entry = {{"name", c.name}, {"kind", c.kind}, {"key", key}, {"inputs", input_digests}};

    bool hit = false;
    const fs::path record = cdir / (key + ".json");
    if (use_cache && fs::exists(record) && fs::is_directory(c.out)) {
      try {
        const json rec = read_json(record);
        hit = rec.at("outputs") == directory_digests(c.out);
      } catch (const std::exception&) {
        hit = false;
      }
    }
    const auto t0 = std::chrono::steady_clock::now();
    if (!hit) {
      try {
        fs::remove_all(c.out);
        fs::create_directories(c.out);
        execute(c);
      } catch (const std::exception& e) {
        entry["cached"] = false;
        entry["error"] = e.what();
        manifest["stages"].push_back(entry);
        manifest["status"] = "failed";
        manifest["executed"] = executed;
        write_manifest();
        fail(ErrorCode::Stage, "stage '" + c.name + "' (" + c.kind + ") failed: " + e.what());
      }
      ++executed;
    }
    const json outputs = directory_digests(c.out);
    const std::string digest = combined_digest(outputs);
    if (use_cache && !hit) write_text(record, json{{"key", key}, {"outputs", outputs}, {"output_digest", digest}}.dump(2) + "\n");
    entry["cached"] = hit;
    entry["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    entry["outputs"] = outputs;
    entry["output_digest"] = digest;
    manifest["stages"].push_back(entry);
    stage_dirs[c.name] = c.out;
    stage_digests[c.name] = digest;
  }
  manifest["status"] = "ok";
  manifest["executed"] = executed;
  write_manifest();
  return manifest;
}

}  // namespace dv::pipeline
