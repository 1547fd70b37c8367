#ifndef ESGRL_ESGRL_H_
#define ESGRL_ESGRL_H_

#include <stddef.h>

#if defined(ESGRL_BUILDING_LIBRARY)
#define ESGRL_API __attribute__((visibility("default")))
#else
#define ESGRL_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum esgrl_status {
  ESGRL_OK = 0,
  ESGRL_E_INVALID_ARGUMENT = 1,
  ESGRL_E_PARSE = 2,
  ESGRL_E_VALIDATION = 3,
  ESGRL_E_NOT_FOUND = 4,
  ESGRL_E_IO = 5,
  ESGRL_E_STATE = 6,
  ESGRL_E_NUMERIC = 7,
  ESGRL_E_CONVERGENCE = 8,
  ESGRL_E_INTERNAL = 9
} esgrl_status;

typedef struct esgrl_dataset esgrl_dataset;
typedef struct esgrl_env esgrl_env;

typedef struct esgrl_step_info {
  double raw_return;
  double regulated_return;
  double phi;
  double psi;
  double turnover;
  double cost;
} esgrl_step_info;

/* Message of the last failed call on this thread; "" after success. */
ESGRL_API const char* esgrl_last_error(void);
ESGRL_API const char* esgrl_status_name(esgrl_status status);
ESGRL_API const char* esgrl_version(void);

/* Strings returned through char** out-parameters are owned by the caller. */
ESGRL_API void esgrl_free_string(char* s);

/* Validation problems, one per line, go to *errors (may be NULL). */
ESGRL_API esgrl_status esgrl_validate_config(const char* config_path, char** errors);

/* out_dir and parallel override the config when non-NULL / > 0.
   *run_dir receives the output directory (may be NULL). */
ESGRL_API esgrl_status esgrl_run_experiment(const char* config_path, const char* out_dir, int parallel,
                                            char** run_dir);

/* Rebuilds the report of a run directory; *table gets the text table. */
ESGRL_API esgrl_status esgrl_report(const char* run_dir, char** table);

/* Writes OHLCV to out_csv and ESG scores to *esg_path (derived name). */
ESGRL_API esgrl_status esgrl_synth(const char* spec_path, const char* out_csv, char** esg_path);

/* Metrics JSON for a returns series or a returns CSV file.
   var_method: "empirical" (default when NULL) or "gaussian". */
ESGRL_API esgrl_status esgrl_metrics(const double* returns, size_t n, double periods_per_year,
                                     const char* var_method, char** json);
ESGRL_API esgrl_status esgrl_metrics_file(const char* returns_csv, double periods_per_year,
                                          const char* var_method, char** json);

ESGRL_API esgrl_status esgrl_regulate(double raw_return, double phi, double psi, double lambda, double* out);

ESGRL_API esgrl_status esgrl_dataset_load(const char* ohlcv_csv, const char* esg_csv, esgrl_dataset** out);
/* spec_json: the synth block of a config ({"days", "seed", "assets", ...}). */
ESGRL_API esgrl_status esgrl_dataset_synth(const char* spec_json, esgrl_dataset** out);
ESGRL_API esgrl_status esgrl_dataset_save(const esgrl_dataset* ds, const char* path);
ESGRL_API size_t esgrl_dataset_num_days(const esgrl_dataset* ds);
ESGRL_API size_t esgrl_dataset_num_assets(const esgrl_dataset* ds);
ESGRL_API void esgrl_dataset_free(esgrl_dataset* ds);

/* Episode over days [first_day, last_day] with default indicators.
   env_json: the env block of a config plus "regulate" and "esg_in_state";
   NULL means defaults. first_day = 0 starts at the end of the warm-up. */
ESGRL_API esgrl_status esgrl_env_create(const esgrl_dataset* ds, const char* env_json, size_t first_day,
                                        size_t last_day, esgrl_env** out);
ESGRL_API size_t esgrl_env_obs_dim(const esgrl_env* env);
ESGRL_API size_t esgrl_env_action_dim(const esgrl_env* env);
ESGRL_API esgrl_status esgrl_env_reset(esgrl_env* env, double* obs, size_t obs_len);
/* info may be NULL. */
ESGRL_API esgrl_status esgrl_env_step(esgrl_env* env, const double* action, size_t action_len, double* obs,
                                      size_t obs_len, double* reward, int* done, esgrl_step_info* info);
ESGRL_API void esgrl_env_free(esgrl_env* env);

#ifdef __cplusplus
}
#endif

#endif /* ESGRL_ESGRL_H_ */
