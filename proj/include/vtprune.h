/*
 * vtprune — visual-token pruning engine and experiment harness.
 *
 * C interface over the C++ core: opaque handles, integer status codes,
 * UTF-8 strings. Strings returned as char* are owned by the caller and
 * must be released with vtp_string_free. On failure functions return
 * NULL (pointers) or a nonzero status; vtp_last_error() describes the
 * most recent failure on the calling thread.
 */

#ifndef VTPRUNE_H
#define VTPRUNE_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define VTP_API __attribute__((visibility("default")))

typedef struct vtp_config vtp_config;       /* experiment configuration */
typedef struct vtp_model vtp_model;         /* seeded toy transformer */
typedef struct vtp_scene vtp_scene;         /* planted-relevance scene */
typedef struct vtp_schedule vtp_schedule;   /* pruning schedule */
typedef struct vtp_trace vtp_trace;         /* forward-pass trace */
typedef struct vtp_result vtp_result;       /* experiment result */
typedef struct vtp_flops vtp_flops;         /* FLOPS report */

enum vtp_status {
    VTP_OK = 0,
    VTP_ERR_CONFIG  = 1,
    VTP_ERR_BUDGET  = 2,
    VTP_ERR_INPUT   = 3,
    VTP_ERR_STATE   = 4,
    VTP_ERR_IO      = 5,
    VTP_ERR_RUNTIME = 6,
};

VTP_API const char * vtp_version(void);
VTP_API const char * vtp_status_name(int status);
/* message for the last failure on this thread; empty string if none */
VTP_API const char * vtp_last_error(void);
VTP_API void vtp_string_free(char * s);

/* ---- configuration ---- */

VTP_API vtp_config * vtp_config_new(void);                      /* defaults */
VTP_API vtp_config * vtp_config_load(const char * path);
VTP_API int  vtp_config_set(vtp_config * cfg, const char * key, const char * value);
VTP_API int  vtp_config_validate(const vtp_config * cfg);
/* canonical key=value text; re-parses to an identical run plan */
VTP_API char * vtp_config_dump(const vtp_config * cfg);
VTP_API void vtp_config_free(vtp_config * cfg);

/* ---- experiments ---- */

/* Runs every configured seed. workers <= 0 uses the config / environment. */
VTP_API vtp_result * vtp_run(const vtp_config * cfg, int workers);
/* Writes results.csv, summary.csv, flops.json and per-stage heatmaps.
 * heatmaps_only != 0 restricts output to the heatmap files. */
VTP_API int  vtp_result_write(const vtp_result * res, const vtp_config * cfg,
                              const char * out_dir, int heatmaps_only);
VTP_API char * vtp_result_table(const vtp_result * res);
VTP_API int    vtp_result_stage_count(const vtp_result * res);
VTP_API double vtp_result_reduction(const vtp_result * res);         /* reference constants */
VTP_API double vtp_result_run_reduction(const vtp_result * res);     /* run dims */
VTP_API double vtp_result_mean_recall(const vtp_result * res, int stage);
VTP_API double vtp_result_mean_bias(const vtp_result * res, int stage);
VTP_API void vtp_result_free(vtp_result * res);

/* Side-by-side table over configs sharing model, grid and seeds. */
VTP_API char * vtp_compare(const vtp_config * const * cfgs, size_t count, int workers);

/* ---- FLOPS model ---- */

/* 4nd² + 2n²d + 2ndm, exact integer */
VTP_API uint64_t vtp_layer_cost(uint64_t n_tokens, uint64_t d, uint64_t m);
/* analytic report for the config's schedule at its flops.* constants */
VTP_API vtp_flops * vtp_flops_from_config(const vtp_config * cfg);
VTP_API double vtp_flops_reduction(const vtp_flops * report);
VTP_API char * vtp_flops_table(const vtp_flops * report);
VTP_API char * vtp_flops_json(const vtp_flops * report);
VTP_API void vtp_flops_free(vtp_flops * report);

/* ---- engine primitives ---- */

VTP_API vtp_model * vtp_model_new(int layers, int hidden, int heads, int ffn,
                                  double rope_base, uint64_t seed);
VTP_API vtp_model * vtp_model_from_config(const vtp_config * cfg);
VTP_API void vtp_model_free(vtp_model * model);

/* planted scene: object rectangle rows [row0, row1), cols [col0, col1) */
VTP_API vtp_scene * vtp_scene_planted(int grid_h, int grid_w, int text_len,
                                      int row0, int col0, int row1, int col1,
                                      double correlation, uint64_t seed, int hidden_dim);
/* identical-content probe scene for a given model */
VTP_API vtp_scene * vtp_scene_constant(const vtp_model * model, int grid_h, int grid_w,
                                       int text_len, uint64_t seed);
VTP_API void vtp_scene_free(vtp_scene * scene);

/* name: fastv | pyramiddrop | feather | none. layers may be NULL for preset
 * defaults (fastv: 3; feather: 8,16; pyramiddrop: 8,16,24). */
VTP_API vtp_schedule * vtp_schedule_preset(const char * name, double ratio,
                                           const int * layers, size_t n_layers);
VTP_API void vtp_schedule_free(vtp_schedule * schedule);

VTP_API vtp_trace * vtp_forward(const vtp_model * model, const vtp_scene * scene,
                                const vtp_schedule * schedule, int instrument);
VTP_API int vtp_trace_stage_count(const vtp_trace * trace);
/* sorted original indices of a stage's survivors; returns the count, or -1 on
 * error. out may be NULL to query the size. */
VTP_API int vtp_trace_retained(const vtp_trace * trace, int stage, int * out, size_t capacity);
/* final hidden vector of the last text token; returns the length or -1 */
VTP_API int vtp_trace_hidden(const vtp_trace * trace, double * out, size_t capacity);
VTP_API uint64_t vtp_trace_macs(const vtp_trace * trace); /* 0 if uninstrumented */
VTP_API void vtp_trace_free(vtp_trace * trace);

#ifdef __cplusplus
}
#endif

#endif /* VTPRUNE_H */
