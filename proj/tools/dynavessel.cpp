// dynavessel command-line front end. Talks to the library only through the C API.
#include "dynavessel/dynavessel.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct CliError {
  dv_status status;
  std::string message;
};

bool g_log_json = false;

void log_event(const std::string& event, json fields = json::object()) {
  if (!g_log_json) return;
  fields["level"] = "info";
  fields["event"] = event;
  std::cerr << fields.dump() << "\n";
}

void check(dv_status s) {
  if (s != DV_OK) throw CliError{s, dv_last_error()};
}

[[noreturn]] void usage_error(const std::string& msg) { throw CliError{DV_ERR_ARGUMENT, msg}; }

struct VolumeDeleter {
  void operator()(dv_volume* v) const { dv_volume_free(v); }
};
struct LabelsDeleter {
  void operator()(dv_labels* v) const { dv_labels_free(v); }
};
struct TransformDeleter {
  void operator()(dv_transform* v) const { dv_transform_free(v); }
};
struct StringDeleter {
  void operator()(char* s) const { dv_string_free(s); }
};
using Volume = std::unique_ptr<dv_volume, VolumeDeleter>;
using Labels = std::unique_ptr<dv_labels, LabelsDeleter>;
using TransformPtr = std::unique_ptr<dv_transform, TransformDeleter>;
using CString = std::unique_ptr<char, StringDeleter>;

Volume read_volume(const std::string& path) {
  dv_volume* v = nullptr;
  check(dv_volume_read(path.c_str(), &v));
  return Volume(v);
}

Labels read_labels(const std::string& path) {
  dv_labels* v = nullptr;
  check(dv_labels_read(path.c_str(), &v));
  return Labels(v);
}

std::string read_text(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CliError{DV_ERR_IO, "cannot open " + path};
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CliError{DV_ERR_IO, "cannot write " + path.string()};
  os << text;
}

std::string file_digest(const std::string& path) {
  char* hex = nullptr;
  check(dv_file_digest(path.c_str(), &hex));
  return CString(hex).get();
}

std::pair<double, double> parse_window(const std::string& w) {
  const auto colon = w.find(':', 1);
  if (colon == std::string::npos) usage_error("window must be LO:HI, got '" + w + "'");
  try {
    return {std::stod(w.substr(0, colon)), std::stod(w.substr(colon + 1))};
  } catch (const std::exception&) {
    usage_error("window must be LO:HI, got '" + w + "'");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynavessel: dynamic CTA vessel annotation and evaluation toolkit"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Cap on internal parallelism (default: all cores)")->check(CLI::NonNegativeNumber);
  app.add_flag("--log-json", g_log_json, "Line-delimited JSON logs on stderr");
  app.set_version_flag("--version", std::string(dv_version()));

  // phantom generate
  auto* phantom = app.add_subcommand("phantom", "Synthetic dynamic CTA studies");
  phantom->require_subcommand(1);
  auto* gen = phantom->add_subcommand("generate", "Generate a phantom study directory");
  std::string spec_path, phantom_out;
  long long seed = -1;
  gen->add_option("--spec", spec_path, "phantom.json (default spec when omitted)")->check(CLI::ExistingFile);
  gen->add_option("--out,out", phantom_out, "Output directory")->required();
  gen->add_option("--seed", seed, "Overrides the spec's rng_seed")->check(CLI::NonNegativeNumber);

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "Head-ROI masking and isotropic resampling");
  std::string pre_in, pre_tpl, pre_roi, pre_out;
  double pre_spacing = 0.468;
  float pre_fill = -1024.0f;
  pre->add_option("--in,in", pre_in, "Input CTA")->required()->check(CLI::ExistingFile);
  auto* tpl_opt = pre->add_option("--template", pre_tpl, "Template CT")->check(CLI::ExistingFile);
  pre->add_option("--template-roi", pre_roi, "Template head ROI")->check(CLI::ExistingFile)->needs(tpl_opt);
  tpl_opt->needs(pre->get_option("--template-roi"));
  pre->add_option("--spacing", pre_spacing, "Isotropic spacing in mm")->capture_default_str();
  pre->add_option("--fill", pre_fill, "Value outside the ROI")->capture_default_str();
  pre->add_option("--out", pre_out, "Output directory")->required();

  // subtract
  auto* sub = app.add_subcommand("subtract", "Baseline subtraction with negative clamp");
  std::string sub_post, sub_base, sub_out;
  bool sub_register = false;
  sub->add_option("--post", sub_post, "Contrast frame")->required()->check(CLI::ExistingFile);
  sub->add_option("--baseline", sub_base, "Baseline frame")->required()->check(CLI::ExistingFile);
  sub->add_flag("--register", sub_register, "Rigidly register the baseline onto the post frame first");
  sub->add_option("--out", sub_out, "Output volume")->required();

  // separate
  auto* sep = app.add_subcommand("separate", "Artery/vein suppression of two subtracted phases");
  std::string sa, sv, xa, xv, sep_out, operand = "subtracted";
  bool no_register = false;
  sep->add_option("--sa", sa, "Subtracted arterial phase")->required()->check(CLI::ExistingFile);
  sep->add_option("--sv", sv, "Subtracted venous phase")->required()->check(CLI::ExistingFile);
  sep->add_option("--xa", xa, "Arterial CTA")->required()->check(CLI::ExistingFile);
  sep->add_option("--xv", xv, "Venous CTA")->required()->check(CLI::ExistingFile);
  sep->add_option("--alg1-operand", operand, "Images warped before comparison")
      ->check(CLI::IsMember({"subtracted", "raw"}))
      ->capture_default_str();
  sep->add_flag("--no-register", no_register, "Treat the phases as already aligned");
  sep->add_option("--out", sep_out, "Output directory")->required();

  // register
  auto* reg = app.add_subcommand("register", "Rigid or affine NCC registration");
  std::string fixed, moving, reg_out, mode = "rigid", reg_resampled;
  reg->add_option("--fixed", fixed, "Fixed volume")->required()->check(CLI::ExistingFile);
  reg->add_option("--moving", moving, "Moving volume")->required()->check(CLI::ExistingFile);
  reg->add_option("--mode", mode, "rigid or affine")->check(CLI::IsMember({"rigid", "affine"}))->capture_default_str();
  reg->add_option("--out", reg_out, "Transform JSON")->required();
  reg->add_option("--resampled", reg_resampled, "Also write the moving volume resampled onto the fixed grid");

  // segment
  auto* seg = app.add_subcommand("segment", "Threshold a volume into a vessel mask");
  std::string seg_in, seg_out, method = "phansalkar";
  int radius = 15, bins = 256, connectivity = 26;
  double alpha = 1.0;
  float threshold = 100.0f;
  std::size_t min_component = 0;
  seg->add_option("--in,in", seg_in, "Input volume")->required()->check(CLI::ExistingFile);
  seg->add_option("--method", method, "phansalkar, kapur or threshold")
      ->check(CLI::IsMember({"phansalkar", "kapur", "threshold"}))
      ->capture_default_str();
  seg->add_option("--radius", radius, "Phansalkar window radius (voxels)")->capture_default_str();
  seg->add_option("--bins", bins, "Kapur histogram bins")->capture_default_str();
  seg->add_option("--alpha", alpha, "Renyi order (1 = Shannon)")->capture_default_str();
  seg->add_option("--threshold", threshold, "Fixed threshold in HU (method threshold)")->capture_default_str();
  seg->add_option("--min-component", min_component, "Drop components smaller than this")->capture_default_str();
  seg->add_option("--connectivity", connectivity, "6 or 26")->check(CLI::IsMember({6, 26}))->capture_default_str();
  seg->add_option("--out", seg_out, "Output mask")->required();

  // skeletonize
  auto* skel = app.add_subcommand("skeletonize", "Topology-preserving thinning of a mask");
  std::string skel_in, skel_out, skel_text;
  skel->add_option("--in,in", skel_in, "Binary mask")->required()->check(CLI::ExistingFile);
  skel->add_option("--out", skel_out, "Centerline mask")->required();
  skel->add_option("--text", skel_text, "Also write voxel indices as 'i j k' lines");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "mDC, tSens and adHD per label");
  std::string gt, pred, pairing, ev_vol, ev_out, ev_csv, case_id = "case";
  ev->add_option("--gt", gt, "Ground-truth labels")->required()->check(CLI::ExistingFile);
  ev->add_option("--pred", pred, "Predicted labels")->required()->check(CLI::ExistingFile);
  ev->add_option("--pairing", pairing, "pairing.json")->required()->check(CLI::ExistingFile);
  ev->add_option("--volume", ev_vol, "CTA frame for phase classification")->check(CLI::ExistingFile);
  ev->add_option("--out", ev_out, "Report JSON")->required();
  ev->add_option("--csv", ev_csv, "Report CSV");
  ev->add_option("--case-id", case_id, "Case identifier")->capture_default_str();

  // render
  auto* ren = app.add_subcommand("render", "Maximum intensity projection to PNG");
  std::string ren_in, ren_out, axis = "z", window = "-100:600";
  ren->add_option("--in,in", ren_in, "Input volume")->required()->check(CLI::ExistingFile);
  ren->add_option("--axis", axis, "x, y or z")->check(CLI::IsMember({"x", "y", "z"}))->capture_default_str();
  ren->add_option("--window", window, "LO:HI in HU")->capture_default_str();
  ren->add_option("--out", ren_out, "Output PNG")->required();

  // pipeline run | validate
  auto* pipe = app.add_subcommand("pipeline", "Declarative batch pipeline");
  pipe->require_subcommand(1);
  std::string config;
  auto* run = pipe->add_subcommand("run", "Execute a pipeline.json");
  run->add_option("--config,config", config, "pipeline.json")->required()->check(CLI::ExistingFile);
  auto* val = pipe->add_subcommand("validate", "Check a pipeline.json without running it");
  val->add_option("--config,config", config, "pipeline.json")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    std::cerr << app.help();
    return 2;
  }

  dv_set_threads(threads);
  const auto t0 = std::chrono::steady_clock::now();
  std::string command;
  for (const auto* s : app.get_subcommands()) {
    command = s->get_name();
    for (const auto* n : s->get_subcommands()) command += " " + n->get_name();
  }
  log_event("start", {{"command", command}, {"threads", threads}});

  try {
    if (gen->parsed()) {
      std::string spec_text;
      if (!spec_path.empty()) spec_text = read_text(spec_path);
      if (seed >= 0) {
        json j = spec_text.empty() ? json::object() : json::parse(spec_text, nullptr, false);
        if (j.is_discarded()) throw CliError{DV_ERR_SPEC, "phantom spec is not valid JSON"};
        j["rng_seed"] = static_cast<unsigned long long>(seed);
        spec_text = j.dump();
      }
      check(dv_phantom_generate(spec_text.empty() ? nullptr : spec_text.c_str(), phantom_out.c_str()));
    } else if (pre->parsed()) {
      Volume vol = read_volume(pre_in);
      fs::create_directories(pre_out);
      if (!pre_tpl.empty()) {
        Volume tpl = read_volume(pre_tpl);
        Labels roi = read_labels(pre_roi);
        dv_labels* mask = nullptr;
        check(dv_head_roi_mask(vol.get(), tpl.get(), roi.get(), &mask));
        Labels m(mask);
        check(dv_labels_write(m.get(), (fs::path(pre_out) / "roi.nii.gz").c_str()));
        dv_volume* masked = nullptr;
        check(dv_apply_mask(vol.get(), m.get(), pre_fill, &masked));
        vol.reset(masked);
      }
      dv_volume* iso = nullptr;
      check(dv_resample_isotropic(vol.get(), pre_spacing, &iso));
      Volume out(iso);
      check(dv_volume_write(out.get(), (fs::path(pre_out) / "volume.nii.gz").c_str()));
    } else if (sub->parsed()) {
      Volume post = read_volume(sub_post), base = read_volume(sub_base);
      dv_volume* out = nullptr;
      check(dv_subtract_baseline(post.get(), base.get(), sub_register ? 1 : 0, &out));
      Volume o(out);
      check(dv_volume_write(o.get(), sub_out.c_str()));
    } else if (sep->parsed()) {
      Volume a = read_volume(sa), v = read_volume(sv), ra = read_volume(xa), rv = read_volume(xv);
      dv_volume *star_a = nullptr, *star_v = nullptr;
      char* tj = nullptr;
      check(dv_vessel_separate(a.get(), v.get(), ra.get(), rv.get(), operand.c_str(), no_register ? 0 : 1, &star_a,
                               &star_v, &tj));
      Volume oa(star_a), ov(star_v);
      CString transforms(tj);
      const fs::path dir(sep_out);
      fs::create_directories(dir);
      check(dv_volume_write(oa.get(), (dir / "s_star_a.nii.gz").c_str()));
      check(dv_volume_write(ov.get(), (dir / "s_star_v.nii.gz").c_str()));
      json prov = json::parse(transforms.get());
      prov["inputs"] = {{"sa", file_digest(sa)}, {"sv", file_digest(sv)}, {"xa", file_digest(xa)}, {"xv", file_digest(xv)}};
      write_text(dir / "transforms.json", prov.dump(2) + "\n");
    } else if (reg->parsed()) {
      Volume f = read_volume(fixed), m = read_volume(moving);
      dv_transform* t = nullptr;
      double ncc = 0.0;
      check(dv_register(f.get(), m.get(), mode.c_str(), &t, &ncc));
      TransformPtr tp(t);
      char* tj = nullptr;
      check(dv_transform_to_json(tp.get(), &tj));
      json j = json::parse(CString(tj).get());
      j["final_ncc"] = ncc;
      write_text(reg_out, j.dump(2) + "\n");
      if (!reg_resampled.empty()) {
        dv_volume* r = nullptr;
        check(dv_resample_with_transform(m.get(), tp.get(), f.get(), -1024.0f, &r));
        Volume rv(r);
        check(dv_volume_write(rv.get(), reg_resampled.c_str()));
      }
      log_event("registered", {{"final_ncc", ncc}});
    } else if (seg->parsed()) {
      Volume vol = read_volume(seg_in);
      dv_labels* mask = nullptr;
      if (method == "phansalkar") {
        dv_phansalkar_params p = dv_phansalkar_defaults();
        p.window_radius = radius;
        check(dv_phansalkar(vol.get(), &p, nullptr, &mask));
      } else if (method == "kapur") {
        double thr = 0.0;
        check(dv_kapur(vol.get(), bins, alpha, nullptr, &thr, &mask));
        log_event("kapur", {{"threshold", thr}});
      } else {
        check(dv_threshold_above(vol.get(), threshold, &mask));
      }
      Labels m(mask);
      if (min_component > 1) {
        dv_labels* kept = nullptr;
        check(dv_remove_small_components(m.get(), connectivity, min_component, &kept));
        m.reset(kept);
      }
      check(dv_labels_write(m.get(), seg_out.c_str()));
    } else if (skel->parsed()) {
      Labels mask = read_labels(skel_in);
      dv_labels* cl = nullptr;
      check(dv_skeletonize(mask.get(), &cl));
      Labels c(cl);
      check(dv_labels_write(c.get(), skel_out.c_str()));
      if (!skel_text.empty()) {
        char* text = nullptr;
        check(dv_labels_to_text(c.get(), &text));
        write_text(skel_text, CString(text).get());
      }
    } else if (ev->parsed()) {
      Labels g = read_labels(gt), p = read_labels(pred);
      Volume vol;
      if (!ev_vol.empty()) vol = read_volume(ev_vol);
      const std::string pj = read_text(pairing);
      char *rj = nullptr, *rc = nullptr;
      check(dv_evaluate(g.get(), p.get(), pj.c_str(), vol.get(), case_id.c_str(), &rj, ev_csv.empty() ? nullptr : &rc));
      CString report(rj), csv(rc);
      json r = json::parse(report.get());
      r["provenance"]["gt_path"] = gt;
      r["provenance"]["pred_path"] = pred;
      write_text(ev_out, r.dump(2) + "\n");
      if (!ev_csv.empty()) write_text(ev_csv, csv.get());
    } else if (ren->parsed()) {
      const auto [lo, hi] = parse_window(window);
      Volume vol = read_volume(ren_in);
      check(dv_render_mip(vol.get(), axis.c_str(), lo, hi, ren_out.c_str()));
    } else if (run->parsed()) {
      char* mj = nullptr;
      check(dv_pipeline_run(config.c_str(), &mj));
      const json manifest = json::parse(CString(mj).get());
      std::cout << "pipeline ok: " << manifest["executed"].get<int>() << " of " << manifest["stages"].size()
                << " stages executed\n";
      for (const auto& s : manifest["stages"])
        log_event("stage", {{"name", s["name"]}, {"cached", s["cached"]}, {"output_digest", s["output_digest"]}});
    } else if (val->parsed()) {
      char* dj = nullptr;
      check(dv_pipeline_validate(read_text(config).c_str(), &dj));
      const json diags = json::parse(CString(dj).get());
      std::cout << diags.dump(2) << "\n";
      if (!diags.empty()) throw CliError{DV_ERR_CONFIG, std::to_string(diags.size()) + " diagnostic(s)"};
    }
  } catch (const CliError& e) {
    std::cerr << "error: " << dv_status_name(e.status) << ": " << e.message << "\n";
    log_event("failed", {{"command", command}, {"code", dv_status_name(e.status)}});
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  log_event("done", {{"command", command},
                     {"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}});
  return 0;
}
