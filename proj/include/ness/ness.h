#ifndef NESS_NESS_H
#define NESS_NESS_H

/* C interface to the steady-state library: configurations, runs, result
 * tables, validation and acceptance reports. All objects are opaque handles
 * released with their _free function. Functions returning ness_status set a
 * thread-local message readable with ness_last_error() on failure. Strings
 * returned through char** are owned by the caller (ness_string_free). */

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ness_status {
    NESS_OK = 0,
    NESS_ERR_INTERNAL = 1,
    NESS_ERR_NONCONVERGENCE = 2,
    NESS_ERR_VALIDATION = 3,
    NESS_ERR_CONFIG = 4,
    NESS_ERR_INVALID_ARGUMENT = 5,
    NESS_ERR_IO = 6
} ness_status;

typedef struct ness_config ness_config;
typedef struct ness_result ness_result;
typedef struct ness_report ness_report;

const char* ness_version(void);
/* Message of the last failed call on this thread; empty when none. */
const char* ness_last_error(void);
/* Short name of a status ("ok", "config", ...). */
const char* ness_status_name(ness_status status);
void ness_string_free(char* s);

/* ---- configuration ---- */
ness_status ness_config_parse(const char* text, ness_config** out);
ness_status ness_config_load(const char* path, ness_config** out);
/* full != 0 selects the large-scale variant where a preset has one. */
ness_status ness_config_from_preset(const char* name, int full, ness_config** out);
/* Sets one key (same keys as the text format, plus hardcore=true). */
ness_status ness_config_set(ness_config* config, const char* key, const char* value);
ness_status ness_config_validate(const ness_config* config);
ness_status ness_config_to_text(const ness_config* config, char** out);
void ness_config_free(ness_config* config);

size_t ness_preset_count(void);
const char* ness_preset_name(size_t index);
const char* ness_preset_description(size_t index);

/* ---- runs ---- */
/* Runs every grid point. A run whose points partly failed still returns
 * NESS_OK with ness_result_exit_status() == 2. */
ness_status ness_run(const ness_config* config, ness_result** out);
/* 0, or 2 when a point failed to converge. */
int ness_result_exit_status(const ness_result* result);
size_t ness_result_point_count(const ness_result* result);
double ness_result_seconds(const ness_result* result);
/* Newline-separated numeric column names (axis first, then observables). */
ness_status ness_result_columns(const ness_result* result, char** out);
/* Copies up to `capacity` values of a column (NaN where undefined); a "se_"
 * prefix selects standard errors. *count receives the number of points. */
ness_status ness_result_column(const ness_result* result, const char* name, double* values, size_t capacity,
                               size_t* count);
ness_status ness_result_csv(const ness_result* result, char** out);
ness_status ness_result_json(const ness_result* result, char** out);
ness_status ness_result_sidecar(const ness_config* config, const ness_result* result, char** out);
/* Writes <out_dir>/<name>.csv|json and <name>.meta.json atomically. */
ness_status ness_result_write(const ness_config* config, const ness_result* result, char** path_out);
void ness_result_free(ness_result* result);

/* ---- validation and acceptance ---- */
ness_status ness_validate(int full, int corrupt_hopping_sign, int workers, ness_report** out);

typedef void (*ness_item_callback)(const char* name, int passed, const char* detail, double seconds,
                                   void* user);
/* Runs the acceptance criteria listed in `only` (all when n_only == 0). With
 * run_long == 0, a criterion whose projected runtime exceeds its budget fails
 * with the projection. `callback` (may be NULL) sees each item as it finishes. */
ness_status ness_acceptance(int run_long, int workers, const int* only, size_t n_only, ness_item_callback callback,
                            void* user, ness_report** out);

size_t ness_report_count(const ness_report* report);
/* Borrowed pointers, valid until ness_report_free. */
ness_status ness_report_item(const ness_report* report, size_t index, const char** name, int* passed,
                             const char** detail, double* seconds);
int ness_report_all_passed(const ness_report* report);
void ness_report_free(ness_report* report);

#ifdef __cplusplus
}
#endif

#endif /* NESS_NESS_H */
