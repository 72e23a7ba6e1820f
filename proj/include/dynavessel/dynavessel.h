/* C interface to the dynavessel toolkit. All objects are opaque handles owned by
 * the caller and released with the matching *_free function. Every fallible call
 * returns a dv_status; on failure dv_last_error() describes the problem for the
 * calling thread. Strings returned through char** are released with
 * dv_string_free. */
#ifndef DYNAVESSEL_H
#define DYNAVESSEL_H

#include <stddef.h>

#if defined(DV_BUILDING_LIBRARY)
#define DV_API __attribute__((visibility("default")))
#else
#define DV_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dv_status {
  DV_OK = 0,
  DV_ERR_ARGUMENT = 1,
  DV_ERR_FORMAT = 2,
  DV_ERR_UNSUPPORTED = 3,
  DV_ERR_DIMENSIONALITY = 4,
  DV_ERR_IO = 5,
  DV_ERR_GEOMETRY = 6,
  DV_ERR_DEGENERATE_METRIC = 7,
  DV_ERR_REGISTRATION_FAILED = 8,
  DV_ERR_SPEC = 9,
  DV_ERR_CONFIG = 10,
  DV_ERR_EMPTY_REFERENCE = 11,
  DV_ERR_EMPTY_SURFACE = 12,
  DV_ERR_NORMALIZATION = 13,
  DV_ERR_DEGENERATE_HISTOGRAM = 14,
  DV_ERR_STAGE = 15,
  DV_ERR_LOCKED = 16,
  DV_ERR_INTERNAL = 17
} dv_status;

typedef struct dv_volume dv_volume;       /* scalar HU volume */
typedef struct dv_labels dv_labels;       /* 8-bit label volume */
typedef struct dv_transform dv_transform; /* rigid or affine, pull-back */

DV_API const char* dv_version(void);
DV_API const char* dv_last_error(void);
/* snake_case name of a status, e.g. "geometry". */
DV_API const char* dv_status_name(dv_status status);
DV_API void dv_string_free(char* s);
/* n <= 0 restores the default (all cores). */
DV_API void dv_set_threads(int n);

/* ---- volumes ---- */
DV_API dv_status dv_volume_read(const char* path, dv_volume** out);
DV_API dv_status dv_volume_write(const dv_volume* vol, const char* path);
/* data may be NULL (zero fill); otherwise dims[0]*dims[1]*dims[2] floats, x fastest. */
DV_API dv_status dv_volume_create(const int dims[3], const double spacing[3], const double origin[3], const float* data,
                                  dv_volume** out);
DV_API void dv_volume_free(dv_volume* vol);
DV_API dv_status dv_volume_geometry(const dv_volume* vol, int dims[3], double spacing[3], double origin[3]);
DV_API const float* dv_volume_data(const dv_volume* vol);
DV_API dv_status dv_volume_digest(const dv_volume* vol, char** hex);
/* SHA-256 of a file's raw bytes. */
DV_API dv_status dv_file_digest(const char* path, char** hex);

DV_API dv_status dv_labels_read(const char* path, dv_labels** out);
DV_API dv_status dv_labels_write(const dv_labels* labels, const char* path);
DV_API dv_status dv_labels_create(const int dims[3], const double spacing[3], const double origin[3],
                                  const unsigned char* data, dv_labels** out);
DV_API void dv_labels_free(dv_labels* labels);
DV_API dv_status dv_labels_geometry(const dv_labels* labels, int dims[3], double spacing[3], double origin[3]);
DV_API const unsigned char* dv_labels_data(const dv_labels* labels);
/* Newline-delimited "i j k" of the nonzero voxels. */
DV_API dv_status dv_labels_to_text(const dv_labels* labels, char** text);

DV_API dv_status dv_resample_isotropic(const dv_volume* vol, double spacing, dv_volume** out);
DV_API dv_status dv_apply_mask(const dv_volume* vol, const dv_labels* mask, float fill, dv_volume** out);
/* axis is "x", "y" or "z"; writes an 8-bit grayscale PNG. */
DV_API dv_status dv_render_mip(const dv_volume* vol, const char* axis, double lo, double hi, const char* png_path);

/* ---- registration ---- */
/* mode is "rigid" or "affine". final_ncc may be NULL. */
DV_API dv_status dv_register(const dv_volume* fixed, const dv_volume* moving, const char* mode, dv_transform** out,
                             double* final_ncc);
DV_API dv_status dv_transform_to_json(const dv_transform* t, char** json);
DV_API dv_status dv_transform_from_json(const char* json, dv_transform** out);
DV_API void dv_transform_free(dv_transform* t);
DV_API dv_status dv_resample_with_transform(const dv_volume* moving, const dv_transform* t, const dv_volume* reference,
                                            float fill, dv_volume** out);
/* mask may be NULL. */
DV_API dv_status dv_ncc(const dv_volume* a, const dv_volume* b, const dv_labels* mask, double* out);

/* ---- suppression ---- */
DV_API dv_status dv_subtract_baseline(const dv_volume* post, const dv_volume* baseline, int pre_register,
                                      dv_volume** out);
DV_API dv_status dv_head_roi_mask(const dv_volume* patient, const dv_volume* templ, const dv_labels* template_roi,
                                  dv_labels** out);
/* operand is "subtracted" or "raw". transforms_json (may be NULL) receives
 * {"g_ra": ..., "g_rv": ..., "ncc_ra": .., "ncc_rv": .., ...}. */
DV_API dv_status dv_vessel_separate(const dv_volume* s_a, const dv_volume* s_v, const dv_volume* x_a,
                                    const dv_volume* x_v, const char* operand, int register_phases,
                                    dv_volume** s_star_a, dv_volume** s_star_v, char** transforms_json);

/* ---- segmentation ---- */
typedef struct dv_phansalkar_params {
  int window_radius;
  double k;
  double r;
  double p;
  double q;
} dv_phansalkar_params;

DV_API dv_phansalkar_params dv_phansalkar_defaults(void);
/* roi may be NULL. */
DV_API dv_status dv_phansalkar(const dv_volume* vol, const dv_phansalkar_params* params, const dv_labels* roi,
                               dv_labels** out);
/* threshold and out may each be NULL. */
DV_API dv_status dv_kapur(const dv_volume* vol, int bins, double renyi_alpha, const dv_labels* roi, double* threshold,
                          dv_labels** out);
DV_API dv_status dv_threshold_above(const dv_volume* vol, float threshold, dv_labels** out);
DV_API dv_status dv_connected_components(const dv_labels* mask, int connectivity, size_t* count);
DV_API dv_status dv_remove_small_components(const dv_labels* mask, int connectivity, size_t min_voxels,
                                            dv_labels** out);
DV_API dv_status dv_extract_surface(const dv_labels* mask, dv_labels** out);
DV_API dv_status dv_skeletonize(const dv_labels* mask, dv_labels** out);

/* ---- metrics ---- */
/* pairing_json as accepted by the evaluate command; vol may be NULL; csv may be NULL. */
DV_API dv_status dv_evaluate(const dv_labels* gt, const dv_labels* pred, const char* pairing_json,
                             const dv_volume* vol, const char* case_id, char** report_json, char** report_csv);

/* ---- phantom and pipeline ---- */
/* spec_json may be NULL for the default spec. */
DV_API dv_status dv_phantom_generate(const char* spec_json, const char* out_dir);
DV_API dv_status dv_pipeline_validate(const char* config_json, char** diagnostics_json);
DV_API dv_status dv_pipeline_run(const char* config_path, char** manifest_json);

#ifdef __cplusplus
}
#endif

#endif
