#ifndef URBANLENS_H
#define URBANLENS_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define UL_API __declspec(dllexport)
#else
#define UL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. The first five mirror the service's error classes. */
typedef enum ul_status {
    UL_OK = 0,
    UL_BAD_REQUEST = 1,
    UL_NOT_FOUND = 2,
    UL_CONFLICT = 3,
    UL_UNPROCESSABLE = 4,
    UL_INTERNAL = 5,
    UL_INVALID_ARGUMENT = 6 /* null handle or pointer */
} ul_status;

typedef struct ul_store ul_store;

/* Strings returned through char** out-parameters are owned by the caller and
 * must be released with ul_free. */
UL_API void ul_free(char* text);
UL_API const char* ul_version(void);

/* Details of the last failure on the calling thread. */
UL_API const char* ul_last_error(void);      /* "Kind: message" */
UL_API const char* ul_last_error_kind(void); /* e.g. "MissingColumn" */
UL_API const char* ul_last_error_json(void); /* {code, error, message, detail} */
UL_API int ul_http_status(ul_status status);
/* Non-fatal warnings go to stderr unless disabled. */
UL_API void ul_set_warnings(int enabled);

UL_API ul_status ul_store_open(const char* directory, ul_store** out);
UL_API void ul_store_close(ul_store* store);

/* Writes a synthetic city (manifests, CSVs, regions.geojson) into directory. */
UL_API ul_status ul_generate(const char* directory, size_t regions, size_t days, uint64_t seed);

/* geojson may be NULL when the regions are already registered. */
UL_API ul_status ul_ingest(ul_store* store, const char* manifest_json, const char* csv, const char* geojson,
                           char** out_json);
UL_API ul_status ul_register_regions(ul_store* store, const char* geojson, char** out_json);

/* Read-only endpoint ("datasets", "regions", "rank", "insights",
 * "spatial/global", "spatial/lisa", "models") with a JSON object of
 * parameters (NULL for none). The output is the exact HTTP response body. */
UL_API ul_status ul_query(ul_store* store, const char* endpoint, const char* params_json, char** out_json);

/* Synchronous training; request_json has the POST /risk/train shape. */
UL_API ul_status ul_train(ul_store* store, const char* request_json, char** out_json);
UL_API ul_status ul_predict(ul_store* store, const char* request_json, char** out_json);
UL_API ul_status ul_model_export(ul_store* store, const char* model_id, const char* path);

/* Evaluates a model file on a labeled CSV (row_id?, features..., label). */
UL_API ul_status ul_evaluate_file(const char* model_path, const char* labeled_csv, char** out_json);

/* Resamples a labeled CSV; out_report receives before/after class counts. */
UL_API ul_status ul_resample_csv(const char* labeled_csv, const char* method, uint64_t seed, char** out_csv,
                                 char** out_report_json);

/* Labeled feature export; out_test is empty unless params set test_fraction. */
UL_API ul_status ul_features(ul_store* store, const char* params_json, char** out_train_csv, char** out_test_csv);

UL_API char* ul_openapi(void);

/* Serves the HTTP API until the process ends. */
UL_API ul_status ul_serve(ul_store* store, const char* host, int port);

#ifdef __cplusplus
}
#endif

#endif
