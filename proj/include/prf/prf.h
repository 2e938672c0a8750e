/* Copyright 2026 The PRF Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef PRF_PRF_H_
#define PRF_PRF_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define PRF_API __declspec(dllexport)
#else
#define PRF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes; the nonzero values double as CLI exit codes. */
typedef enum prf_status {
  PRF_OK = 0,
  PRF_ERR_USAGE = 2,
  PRF_ERR_DATA = 3,
  PRF_ERR_NUMERIC = 4,
  PRF_ERR_INTERNAL = 5
} prf_status;

PRF_API const char* prf_version(void);

/* Message of the last failed call on this thread; never NULL. */
PRF_API const char* prf_last_error(void);

/* Releases strings returned through char** out-parameters. */
PRF_API void prf_string_free(char* s);

/* Comma-separated command names understood by prf_run_command. */
PRF_API const char* prf_command_list(void);

/* Default configuration of a command as a JSON object. */
PRF_API prf_status prf_default_config(const char* command, char** config_json);

/* Configuration a prf_run_command call with this request would use, with
 * defaults filled in and validated; nothing is read or written. */
PRF_API prf_status prf_resolve_config(const char* command, const char* request_json,
                                      char** config_json);

/* Runs a command from a JSON request
 *   {"config": {...}, "overrides": {...}, "out": "<dir>", "threads": n,
 *    "inputs": {...}}
 * and returns a JSON summary. PRF_ERR_NUMERIC with a summary means the
 * outputs were written but a numerical check failed. */
PRF_API prf_status prf_run_command(const char* command, const char* request_json,
                                   char** summary_json);

/* Panoptic maps: encoded ids class * 1000 + instance, 65535 void.
 * Failed constructors leave *out NULL. A NULL ids array creates an all-void
 * map. */
typedef struct prf_panoptic_map prf_panoptic_map;

PRF_API prf_status prf_panoptic_map_create(int height, int width, const uint16_t* ids,
                                           prf_panoptic_map** out);
PRF_API prf_status prf_panoptic_map_read(const char* path, prf_panoptic_map** out);
PRF_API prf_status prf_panoptic_map_write(const prf_panoptic_map* map, const char* path);
PRF_API int prf_panoptic_map_height(const prf_panoptic_map* map);
PRF_API int prf_panoptic_map_width(const prf_panoptic_map* map);
PRF_API const uint16_t* prf_panoptic_map_data(const prf_panoptic_map* map);
PRF_API void prf_panoptic_map_free(prf_panoptic_map* map);

/* Accumulates statistics over map pairs; the report sums them before the
 * per-class ratios are formed. A NULL class table selects the default
 * street/sidewalk/person/car schema. */
typedef struct prf_pq_evaluator prf_pq_evaluator;

PRF_API prf_status prf_pq_evaluator_create(const char* class_table_json, prf_pq_evaluator** out);
PRF_API prf_status prf_pq_evaluator_add(prf_pq_evaluator* ev, const prf_panoptic_map* pred,
                                        const prf_panoptic_map* gt);
PRF_API prf_status prf_pq_evaluator_report(const prf_pq_evaluator* ev, char** report_json);
PRF_API void prf_pq_evaluator_free(prf_pq_evaluator* ev);

/* Pretraining loop over the *.ppm images of a directory. */
typedef struct prf_trainer prf_trainer;

PRF_API prf_status prf_trainer_create(const char* config_json, const char* data_dir,
                                      prf_trainer** out);
PRF_API prf_status prf_trainer_load(const char* checkpoint_path, const char* data_dir,
                                    prf_trainer** out);
/* *more is set to 0 once training is complete. */
PRF_API prf_status prf_trainer_step(prf_trainer* t, int* more);
PRF_API prf_status prf_trainer_save(const prf_trainer* t, const char* checkpoint_path);
PRF_API prf_status prf_trainer_trace_csv(const prf_trainer* t, char** csv);
PRF_API int prf_trainer_steps_done(const prf_trainer* t);
PRF_API void prf_trainer_free(prf_trainer* t);

#ifdef __cplusplus
}
#endif

#endif /* PRF_PRF_H_ */
