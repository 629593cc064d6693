/*
 * Copyright 2026 The predgap Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the predgap library. Objects are opaque handles created
 * and destroyed through this API. Every fallible call returns a pg_status;
 * on failure pg_last_error() describes the problem. Strings returned
 * through char** must be released with pg_string_free(). */

#ifndef PREDGAP_PREDGAP_H_
#define PREDGAP_PREDGAP_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  define PREDGAP_API __declspec(dllexport)
#else
#  define PREDGAP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values match the command-line exit codes. */
typedef enum pg_status {
  PG_OK = 0,
  PG_ERR_INVALID_ARGUMENT = 1,
  PG_ERR_CONFIG = 2,
  PG_ERR_DEPENDENCY = 3,
  PG_ERR_INVARIANT = 4,
  PG_ERR_INTERNAL = 5
} pg_status;

typedef struct pg_run pg_run;
typedef struct pg_registry pg_registry;
typedef struct pg_model pg_model;

typedef struct pg_agreement_counts {
  int64_t n;
  int64_t both_agreeing;
  int64_t both_correct;
  int64_t both_wrong;
  int64_t only_a_correct;
  int64_t only_b_correct;
} pg_agreement_counts;

typedef void (*pg_log_fn)(const char* message, void* user_data);

PREDGAP_API const char* pg_version(void);
/* Message of the last failed call on this thread; "" if none. */
PREDGAP_API const char* pg_last_error(void);
PREDGAP_API void pg_string_free(char* s);
/* Routes progress messages; fn == NULL silences them. The default writes to
 * stderr. */
PREDGAP_API void pg_set_log_callback(pg_log_fn fn, void* user_data);

/* ---- pipeline runs ---- */

/* config_path may be NULL (all defaults). Overrides are "key.path=value". */
PREDGAP_API pg_status pg_run_create(const char* config_path, const char* const* overrides, size_t n_overrides,
                                    pg_run** out);
PREDGAP_API pg_status pg_run_create_json(const char* config_json, pg_run** out);
PREDGAP_API void pg_run_destroy(pg_run* run);
PREDGAP_API pg_status pg_run_set(pg_run* run, const char* key, const char* value);
PREDGAP_API pg_status pg_run_stage(pg_run* run, const char* stage);
PREDGAP_API pg_status pg_run_all(pg_run* run);
PREDGAP_API pg_status pg_run_config_json(const pg_run* run, char** out);
PREDGAP_API size_t pg_stage_count(void);
/* NULL when i is out of range. */
PREDGAP_API const char* pg_stage_name(size_t i);

/* ---- registries ---- */

/* scenario_json is a scenario document; a "preset" key selects a preset. */
PREDGAP_API pg_status pg_registry_generate(const char* scenario_json, pg_registry** out);
PREDGAP_API pg_status pg_registry_load(const char* dir, pg_registry** out);
PREDGAP_API pg_status pg_registry_save(const pg_registry* registry, const char* dir);
PREDGAP_API void pg_registry_destroy(pg_registry* registry);
PREDGAP_API size_t pg_registry_num_children(const pg_registry* registry);
PREDGAP_API pg_status pg_registry_outcomes(const pg_registry* registry, int* out, size_t n);

/* ---- trained models ---- */

/* model_linear.json, model_gbt.json or model_gnn.bin. */
PREDGAP_API pg_status pg_model_load(const char* path, pg_model** out);
PREDGAP_API void pg_model_destroy(pg_model* model);
/* "linear", "gbt" or "gnn". */
PREDGAP_API const char* pg_model_family(const pg_model* model);
/* Builds the model's inputs from the registry and writes one probability
 * per child (registry order). n must equal the child count. Returns
 * PG_ERR_DEPENDENCY when the registry's feature schema differs from the
 * model's. */
PREDGAP_API pg_status pg_model_predict(const pg_model* model, const pg_registry* registry, double* out, size_t n);

/* ---- metrics ---- */

PREDGAP_API pg_status pg_mcc(const int* y_true, const int* y_pred, size_t n, double* out);
PREDGAP_API pg_status pg_auc(const int* y_true, const double* probabilities, size_t n, double* out);
PREDGAP_API pg_status pg_agreement(const int* y_true, const int* pred_a, const int* pred_b, size_t n,
                                   pg_agreement_counts* out);

#ifdef __cplusplus
}
#endif

#endif /* PREDGAP_PREDGAP_H_ */
