#ifndef CPALIGN_H
#define CPALIGN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes shared by every call.
typedef enum CpaStatus {
  CPA_STATUS_OK = 0,
  CPA_STATUS_NULL_POINTER = 1,
  CPA_STATUS_INVALID_UTF8 = 2,
  CPA_STATUS_CONFIG = 3,
  CPA_STATUS_SHAPE = 4,
  CPA_STATUS_OUT_OF_RANGE = 5,
  CPA_STATUS_ARCHIVE = 6,
  CPA_STATUS_IO = 7,
  CPA_STATUS_DEGENERATE = 8,
  CPA_STATUS_PANIC = 9,
} CpaStatus;

// Similarity accounting mode for [`cpa_count_similarity_ops`].
typedef enum CpaSimilarityMode {
  CPA_SIMILARITY_MODE_GLOBAL = 0,
  CPA_SIMILARITY_MODE_BLOCKWISE = 1,
} CpaSimilarityMode;

// Simulation configuration.
typedef struct CpaConfig CpaConfig;

// Report of one pipeline run.
typedef struct CpaReport CpaReport;

// Generated scenario.
typedef struct CpaScenario CpaScenario;

typedef struct CpaDetectionSummary {
  double ap50;
  double ap70;
  double mean_iou;
  uint64_t ground_truth;
  uint64_t detections;
} CpaDetectionSummary;

typedef struct CpaOpCounts {
  uint64_t mul;
  uint64_t add;
  uint64_t sqrt;
  uint64_t div;
} CpaOpCounts;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failing call on this thread, or an empty
// string. Valid until the next call into the library on this thread.
const char *cpa_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *cpa_version(void);

// # Safety
// `s` must come from this library and not have been freed. Null is ignored.
void cpa_string_free(char *s);

// # Safety
// `out` must be a valid pointer to write the handle to.
enum CpaStatus cpa_config_default(struct CpaConfig **out);

// Parses a TOML configuration; missing keys take their defaults.
//
// # Safety
// `toml` must be a NUL-terminated string; `out` must be writable.
enum CpaStatus cpa_config_from_toml(const char *toml, struct CpaConfig **out);

// Serialises the configuration back to TOML.
//
// # Safety
// `config` must be a live handle; `out` must be writable.
enum CpaStatus cpa_config_to_toml(const struct CpaConfig *config, char **out);

// # Safety
// `config` must come from this library and not have been freed.
void cpa_config_free(struct CpaConfig *config);

// Generates the scenario described by the configuration.
//
// # Safety
// `config` must be a live handle; `out` must be writable.
enum CpaStatus cpa_scenario_generate(const struct CpaConfig *config, struct CpaScenario **out);

// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum CpaStatus cpa_scenario_from_json(const char *json, struct CpaScenario **out);

// # Safety
// `scenario` must be a live handle; `out` must be writable.
enum CpaStatus cpa_scenario_to_json(const struct CpaScenario *scenario, char **out);

// Number of frames in the scenario.
//
// # Safety
// `scenario` must be a live handle or null (which yields 0).
size_t cpa_scenario_frames(const struct CpaScenario *scenario);

// # Safety
// `scenario` must come from this library and not have been freed.
void cpa_scenario_free(struct CpaScenario *scenario);

// One end-to-end run at `time` seconds with delay `tau_ms`, using the
// configuration's remaining run options. `ptam` switches delay
// compensation on or off.
//
// # Safety
// `config` and `scenario` must be live handles; `out` must be writable.
enum CpaStatus cpa_run_pipeline(const struct CpaConfig *config,
                                const struct CpaScenario *scenario,
                                double time,
                                double tau_ms,
                                bool ptam,
                                struct CpaReport **out);

// # Safety
// `report` must be a live handle; `out` must be writable.
enum CpaStatus cpa_report_detection(const struct CpaReport *report,
                                    struct CpaDetectionSummary *out);

// Full report as pretty-printed JSON.
//
// # Safety
// `report` must be a live handle; `out` must be writable.
enum CpaStatus cpa_report_json(const struct CpaReport *report, char **out);

// # Safety
// `report` must come from this library and not have been freed.
void cpa_report_free(struct CpaReport *report);

// Closed-form operation counts of the window cosine similarity.
//
// # Safety
// `out` must be writable.
enum CpaStatus cpa_count_similarity_ops(size_t channels,
                                        size_t height,
                                        size_t width,
                                        size_t window,
                                        enum CpaSimilarityMode mode,
                                        struct CpaOpCounts *out);

// Backward bilinear warp of a `channels × height × width` row-major
// buffer. `displacement` holds the x plane then the y plane (cells),
// scaled by `xi`; `weight` is one `height × width` plane multiplied in
// after sampling. `out` receives `channels × height × width` values.
//
// # Safety
// Every buffer must hold the number of values stated above.
enum CpaStatus cpa_warp_features(const double *features,
                                 size_t channels,
                                 size_t height,
                                 size_t width,
                                 const double *displacement,
                                 double xi,
                                 const double *weight,
                                 double *out);

// Window cosine loss of one prediction against its target, both
// `channels × height × width` buffers, with window size `window`. The
// gradient with respect to the prediction is written to `grad` unless it
// is null.
//
// # Safety
// `pred`, `target` and a non-null `grad` must hold
// `channels × height × width` values; `loss` must be writable.
enum CpaStatus cpa_temporal_loss(const double *pred,
                                 const double *target,
                                 size_t channels,
                                 size_t height,
                                 size_t width,
                                 size_t window,
                                 double *loss,
                                 double *grad);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CPALIGN_H */
