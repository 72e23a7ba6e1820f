#include "dynavessel/dynavessel.h"

#include "dynavessel/digest.hpp"
#include "dynavessel/error.hpp"
#include "dynavessel/imaging.hpp"
#include "dynavessel/metrics.hpp"
#include "dynavessel/nifti.hpp"
#include "dynavessel/parallel.hpp"
#include "dynavessel/phantom.hpp"
#include "dynavessel/pipeline.hpp"
#include "dynavessel/registration.hpp"
#include "dynavessel/segmentation.hpp"
#include "dynavessel/suppression.hpp"

#include <cstring>
#include <new>
#include <string>

struct dv_volume {
  dv::ScalarVolume v;
};
struct dv_labels {
  dv::LabelVolume v;
};
struct dv_transform {
  dv::Transform t;
};

namespace {

thread_local std::string g_last_error;

template <typename Fn>
dv_status guard(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return DV_OK;
  } catch (const dv::Error& e) {
    g_last_error = e.what();
    return static_cast<dv_status>(e.code());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = std::string("invalid JSON: ") + e.what();
    return DV_ERR_CONFIG;
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return DV_ERR_IO;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return DV_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return DV_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (!p) dv::fail(dv::ErrorCode::Argument, std::string(what) + " must not be NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

dv::VolumeGeometry make_geometry(const int dims[3], const double spacing[3], const double origin[3]) {
  need(dims, "dims");
  need(spacing, "spacing");
  dv::VolumeGeometry g({dims[0], dims[1], dims[2]}, dv::Vec3(spacing[0], spacing[1], spacing[2]),
                       origin ? dv::Vec3(origin[0], origin[1], origin[2]) : dv::Vec3::Zero());
  g.validate();
  return g;
}

void get_geometry(const dv::VolumeGeometry& g, int dims[3], double spacing[3], double origin[3]) {
  for (int a = 0; a < 3; ++a) {
    if (dims) dims[a] = g.dims[static_cast<std::size_t>(a)];
    if (spacing) spacing[a] = g.spacing[a];
    if (origin) origin[a] = g.origin[a];
  }
}

template <typename T, typename V>
void emit(T** out, V&& value) {
  need(out, "out");
  *out = new T{std::forward<V>(value)};
}

}  // namespace

extern "C" {

const char* dv_version(void) { return "0.1.0"; }
const char* dv_last_error(void) { return g_last_error.c_str(); }
const char* dv_status_name(dv_status status) {
  if (status == DV_OK) return "ok";
  return dv::error_code_name(static_cast<dv::ErrorCode>(status));
}
void dv_string_free(char* s) { std::free(s); }
void dv_set_threads(int n) { dv::set_thread_count(n); }

dv_status dv_volume_read(const char* path, dv_volume** out) {
  return guard([&] {
    need(path, "path");
    emit(out, dv::nifti::read_volume(path));
  });
}

dv_status dv_volume_write(const dv_volume* vol, const char* path) {
  return guard([&] {
    need(vol, "vol");
    need(path, "path");
    dv::nifti::write_volume(vol->v, path);
  });
}

dv_status dv_volume_create(const int dims[3], const double spacing[3], const double origin[3], const float* data,
                           dv_volume** out) {
  return guard([&] {
    const dv::VolumeGeometry g = make_geometry(dims, spacing, origin);
    if (data)
      emit(out, dv::ScalarVolume(g, std::vector<float>(data, data + g.voxel_count())));
    else
      emit(out, dv::ScalarVolume(g));
  });
}

void dv_volume_free(dv_volume* vol) { delete vol; }

dv_status dv_volume_geometry(const dv_volume* vol, int dims[3], double spacing[3], double origin[3]) {
  return guard([&] {
    need(vol, "vol");
    get_geometry(vol->v.geometry(), dims, spacing, origin);
  });
}

const float* dv_volume_data(const dv_volume* vol) { return vol ? vol->v.data().data() : nullptr; }

dv_status dv_volume_digest(const dv_volume* vol, char** hex) {
  return guard([&] {
    need(vol, "vol");
    need(hex, "hex");
    *hex = dup_string(dv::sha256_hex(dv::nifti::encode(vol->v)));
  });
}

dv_status dv_file_digest(const char* path, char** hex) {
  return guard([&] {
    need(path, "path");
    need(hex, "hex");
    *hex = dup_string(dv::sha256_file(path));
  });
}

dv_status dv_labels_read(const char* path, dv_labels** out) {
  return guard([&] {
    need(path, "path");
    emit(out, dv::nifti::read_labels(path));
  });
}

dv_status dv_labels_write(const dv_labels* labels, const char* path) {
  return guard([&] {
    need(labels, "labels");
    need(path, "path");
    dv::nifti::write_volume(labels->v, path);
  });
}

dv_status dv_labels_create(const int dims[3], const double spacing[3], const double origin[3],
                           const unsigned char* data, dv_labels** out) {
  return guard([&] {
    const dv::VolumeGeometry g = make_geometry(dims, spacing, origin);
    dv::LabelVolume l = data ? dv::LabelVolume(g, std::vector<std::uint8_t>(data, data + g.voxel_count()),
                                               dv::default_label_names())
                             : dv::LabelVolume(g, dv::default_label_names());
    l.ensure_names();
    emit(out, std::move(l));
  });
}

void dv_labels_free(dv_labels* labels) { delete labels; }

dv_status dv_labels_geometry(const dv_labels* labels, int dims[3], double spacing[3], double origin[3]) {
  return guard([&] {
    need(labels, "labels");
    get_geometry(labels->v.geometry(), dims, spacing, origin);
  });
}

const unsigned char* dv_labels_data(const dv_labels* labels) { return labels ? labels->v.data().data() : nullptr; }

dv_status dv_labels_to_text(const dv_labels* labels, char** text) {
  return guard([&] {
    need(labels, "labels");
    need(text, "text");
    *text = dup_string(dv::VoxelSet::from_mask(labels->v).to_text());
  });
}

dv_status dv_resample_isotropic(const dv_volume* vol, double spacing, dv_volume** out) {
  return guard([&] {
    need(vol, "vol");
    emit(out, dv::resample_isotropic(vol->v, spacing));
  });
}

dv_status dv_apply_mask(const dv_volume* vol, const dv_labels* mask, float fill, dv_volume** out) {
  return guard([&] {
    need(vol, "vol");
    need(mask, "mask");
    emit(out, dv::apply_mask(vol->v, mask->v, fill));
  });
}

dv_status dv_render_mip(const dv_volume* vol, const char* axis, double lo, double hi, const char* png_path) {
  return guard([&] {
    need(vol, "vol");
    need(axis, "axis");
    need(png_path, "png_path");
    dv::write_png(dv::mip_render(vol->v, dv::parse_axis(axis), lo, hi), png_path);
  });
}

dv_status dv_register(const dv_volume* fixed, const dv_volume* moving, const char* mode, dv_transform** out,
                      double* final_ncc) {
  return guard([&] {
    need(fixed, "fixed");
    need(moving, "moving");
    const std::string m = mode ? mode : "rigid";
    dv::RegistrationResult r;
    if (m == "rigid")
      r = dv::register_rigid(fixed->v, moving->v);
    else if (m == "affine")
      r = dv::register_affine(fixed->v, moving->v);
    else
      dv::fail(dv::ErrorCode::Argument, "registration mode must be 'rigid' or 'affine', got '" + m + "'");
    emit(out, r.transform);
    if (final_ncc) *final_ncc = r.final_ncc;
  });
}

dv_status dv_transform_to_json(const dv_transform* t, char** json) {
  return guard([&] {
    need(t, "t");
    need(json, "json");
    *json = dup_string(dv::transform_to_json(t->t).dump(2));
  });
}

dv_status dv_transform_from_json(const char* json, dv_transform** out) {
  return guard([&] {
    need(json, "json");
    emit(out, dv::transform_from_json(nlohmann::json::parse(json)));
  });
}

void dv_transform_free(dv_transform* t) { delete t; }

dv_status dv_resample_with_transform(const dv_volume* moving, const dv_transform* t, const dv_volume* reference,
                                     float fill, dv_volume** out) {
  return guard([&] {
    need(moving, "moving");
    need(t, "t");
    need(reference, "reference");
    emit(out, dv::resample_with_transform(moving->v, t->t, reference->v.geometry(), fill));
  });
}

dv_status dv_ncc(const dv_volume* a, const dv_volume* b, const dv_labels* mask, double* out) {
  return guard([&] {
    need(a, "a");
    need(b, "b");
    need(out, "out");
    *out = dv::ncc(a->v, b->v, mask ? &mask->v : nullptr);
  });
}

dv_status dv_subtract_baseline(const dv_volume* post, const dv_volume* baseline, int pre_register, dv_volume** out) {
  return guard([&] {
    need(post, "post");
    need(baseline, "baseline");
    emit(out, dv::subtract_baseline(post->v, baseline->v, pre_register != 0));
  });
}

dv_status dv_head_roi_mask(const dv_volume* patient, const dv_volume* templ, const dv_labels* template_roi,
                           dv_labels** out) {
  return guard([&] {
    need(patient, "patient");
    need(templ, "templ");
    need(template_roi, "template_roi");
    emit(out, dv::head_roi_mask(patient->v, templ->v, template_roi->v));
  });
}

dv_status dv_vessel_separate(const dv_volume* s_a, const dv_volume* s_v, const dv_volume* x_a, const dv_volume* x_v,
                             const char* operand, int register_phases, dv_volume** s_star_a, dv_volume** s_star_v,
                             char** transforms_json) {
  return guard([&] {
    need(s_a, "s_a");
    need(s_v, "s_v");
    need(x_a, "x_a");
    need(x_v, "x_v");
    need(s_star_a, "s_star_a");
    need(s_star_v, "s_star_v");
    dv::SeparationOptions opts;
    opts.operand = dv::parse_alg1_operand(operand ? operand : "subtracted");
    opts.register_phases = register_phases != 0;
    dv::SeparationResult r = dv::vessel_separate(s_a->v, s_v->v, x_a->v, x_v->v, opts);
    const nlohmann::json j = {{"g_ra", dv::transform_to_json(r.g_ra)},
                              {"g_rv", dv::transform_to_json(r.g_rv)},
                              {"ncc_ra", r.ncc_ra},
                              {"ncc_rv", r.ncc_rv},
                              {"alg1_operand", dv::alg1_operand_name(opts.operand)},
                              {"register", opts.register_phases}};
    std::string text = j.dump(2);
    char* tj = transforms_json ? dup_string(text) : nullptr;
    *s_star_a = new dv_volume{std::move(r.s_star_a)};
    *s_star_v = new dv_volume{std::move(r.s_star_v)};
    if (transforms_json) *transforms_json = tj;
  });
}

dv_phansalkar_params dv_phansalkar_defaults(void) {
  const dv::PhansalkarParams p;
  return {p.window_radius, p.k, p.r, p.p, p.q};
}

dv_status dv_phansalkar(const dv_volume* vol, const dv_phansalkar_params* params, const dv_labels* roi,
                        dv_labels** out) {
  return guard([&] {
    need(vol, "vol");
    dv::PhansalkarParams p;
    if (params) {
      p.window_radius = params->window_radius;
      p.k = params->k;
      p.r = params->r;
      p.p = params->p;
      p.q = params->q;
    }
    emit(out, dv::phansalkar_threshold(vol->v, p, roi ? &roi->v : nullptr));
  });
}

dv_status dv_kapur(const dv_volume* vol, int bins, double renyi_alpha, const dv_labels* roi, double* threshold,
                   dv_labels** out) {
  return guard([&] {
    need(vol, "vol");
    const dv::LabelVolume* r = roi ? &roi->v : nullptr;
    const dv::KapurResult res = dv::kapur_threshold(vol->v, bins, renyi_alpha, r);
    if (threshold) *threshold = res.threshold;
    if (out) *out = new dv_labels{dv::kapur_segment(vol->v, bins, renyi_alpha, r)};
  });
}

dv_status dv_threshold_above(const dv_volume* vol, float threshold, dv_labels** out) {
  return guard([&] {
    need(vol, "vol");
    emit(out, dv::threshold_above(vol->v, threshold));
  });
}

dv_status dv_connected_components(const dv_labels* mask, int connectivity, size_t* count) {
  return guard([&] {
    need(mask, "mask");
    need(count, "count");
    *count = dv::connected_components(mask->v, dv::parse_connectivity(connectivity)).count();
  });
}

dv_status dv_remove_small_components(const dv_labels* mask, int connectivity, size_t min_voxels, dv_labels** out) {
  return guard([&] {
    need(mask, "mask");
    emit(out, dv::remove_small_components(mask->v, dv::parse_connectivity(connectivity), min_voxels));
  });
}

dv_status dv_extract_surface(const dv_labels* mask, dv_labels** out) {
  return guard([&] {
    need(mask, "mask");
    emit(out, dv::extract_surface(mask->v).to_mask());
  });
}

dv_status dv_skeletonize(const dv_labels* mask, dv_labels** out) {
  return guard([&] {
    need(mask, "mask");
    emit(out, dv::skeletonize(mask->v).to_mask());
  });
}

dv_status dv_evaluate(const dv_labels* gt, const dv_labels* pred, const char* pairing_json, const dv_volume* vol,
                      const char* case_id, char** report_json, char** report_csv) {
  return guard([&] {
    need(gt, "gt");
    need(pred, "pred");
    need(pairing_json, "pairing_json");
    need(report_json, "report_json");
    const dv::Pairing pairing =
        dv::pairing_from_json(nlohmann::json::parse(pairing_json), gt->v.label_names(), pred->v.label_names());
    dv::MetricsReport r = dv::evaluate_case(gt->v, pred->v, pairing, vol ? &vol->v : nullptr);
    r.case_id = case_id ? case_id : "case";
    r.provenance["gt_digest"] = dv::sha256_hex(dv::nifti::encode(gt->v));
    r.provenance["pred_digest"] = dv::sha256_hex(dv::nifti::encode(pred->v));
    if (vol) r.provenance["volume_digest"] = dv::sha256_hex(dv::nifti::encode(vol->v));
    char* csv = report_csv ? dup_string(dv::reports_csv({r})) : nullptr;
    *report_json = dup_string(r.to_json().dump(2));
    if (report_csv) *report_csv = csv;
  });
}

dv_status dv_phantom_generate(const char* spec_json, const char* out_dir) {
  return guard([&] {
    need(out_dir, "out_dir");
    dv::phantom::PhantomSpec spec;
    try {
      spec = spec_json ? dv::phantom::spec_from_json(nlohmann::json::parse(spec_json)) : dv::phantom::default_spec();
    } catch (const nlohmann::json::exception& e) {
      dv::fail(dv::ErrorCode::Spec, std::string("phantom spec is not valid JSON: ") + e.what());
    }
    spec.validate();
    dv::phantom::write_study(dv::phantom::generate_study(spec), spec, out_dir);
  });
}

dv_status dv_pipeline_validate(const char* config_json, char** diagnostics_json) {
  return guard([&] {
    need(config_json, "config_json");
    need(diagnostics_json, "diagnostics_json");
    nlohmann::json config;
    try {
      config = nlohmann::json::parse(config_json);
    } catch (const nlohmann::json::exception& e) {
      dv::fail(dv::ErrorCode::Config, std::string("config is not valid JSON: ") + e.what());
    }
    nlohmann::json out = nlohmann::json::array();
    for (const auto& d : dv::pipeline::validate(config)) out.push_back(d.to_json());
    *diagnostics_json = dup_string(out.dump(2));
  });
}

dv_status dv_pipeline_run(const char* config_path, char** manifest_json) {
  return guard([&] {
    need(config_path, "config_path");
    const std::filesystem::path p = std::filesystem::absolute(config_path);
    const nlohmann::json manifest = dv::pipeline::run(dv::pipeline::load_config(p), p.parent_path());
    if (manifest_json) *manifest_json = dup_string(manifest.dump(2));
  });
}

}  // extern "C"
