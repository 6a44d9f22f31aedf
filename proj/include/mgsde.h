/* C interface to the mgsde library. All functions return MGSDE_OK on success
 * or an error status; mgsde_last_error() then describes the failure for the
 * calling thread. Strings handed out by the library are released with
 * mgsde_string_free. */
#ifndef MGSDE_H
#define MGSDE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MGSDE_API __declspec(dllexport)
#else
#define MGSDE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mgsde_status {
  MGSDE_OK = 0,
  MGSDE_E_INVALID_ARGUMENT = 1,
  MGSDE_E_CONFIG = 2,
  MGSDE_E_NUMERIC = 3,
  MGSDE_E_IO = 4,
  MGSDE_E_CHECK_FAILED = 5,
  MGSDE_E_INTERNAL = 6
} mgsde_status;

typedef enum mgsde_scenario { MGSDE_SCENARIO_PRODUCER = 0, MGSDE_SCENARIO_FINITE = 1 } mgsde_scenario;

/* A sampled strategy table with its overlaps and SDE coefficients. */
typedef struct mgsde_game mgsde_game;

MGSDE_API const char* mgsde_version(void);
MGSDE_API const char* mgsde_last_error(void);
MGSDE_API void mgsde_string_free(char* s);

MGSDE_API mgsde_status mgsde_game_create(size_t n_agents, double alpha, double gamma_rate, uint64_t seed,
                                         mgsde_game** out);
MGSDE_API mgsde_status mgsde_game_load(const char* path, double gamma_rate, mgsde_game** out);
MGSDE_API void mgsde_game_destroy(mgsde_game* game);

MGSDE_API mgsde_status mgsde_game_dims(const mgsde_game* game, size_t* n_agents, size_t* n_states);
MGSDE_API mgsde_status mgsde_game_save(const mgsde_game* game, const char* path);
/* b^N(y); y and out have n_agents entries. */
MGSDE_API mgsde_status mgsde_game_drift(const mgsde_game* game, const double* y, size_t n, double* out);
/* Attendance-variance sigma^2(y). */
MGSDE_API mgsde_status mgsde_game_sigma2(const mgsde_game* game, const double* y, size_t n, double* out);
/* Smallest eigenvalue of the overlap matrix xi_xi. */
MGSDE_API mgsde_status mgsde_game_min_eigenvalue(const mgsde_game* game, double* out);

typedef struct mgsde_rescale {
  double c;
  double r;
  double r_required;
  double k_lo, k_hi;
  double l_lo, l_hi;
} mgsde_rescale;

MGSDE_API mgsde_status mgsde_rescale_constant(size_t n_agents, mgsde_scenario scenario, double beta,
                                              double gamma_frac, mgsde_rescale* out);
MGSDE_API mgsde_status mgsde_waiting_time_bound(double epsilon, double gamma_rate, double y0_norm, double c,
                                                double k, double l, double m_prime, double* out);

typedef struct mgsde_run_options {
  const char* out_dir;    /* NULL: config, then $MGSDE_OUT_ROOT/<command> */
  size_t jobs;            /* 0: keep the config value */
  const uint64_t* seeds;  /* NULL: keep the config value */
  size_t n_seeds;
  size_t seed_count;      /* 0: unused; otherwise seeds 1..seed_count */
} mgsde_run_options;

/* Runs one harness command. *exit_code gets 0 (success), 1 (check failed)
 * or 2 (configuration error); *message and *report_json (either may be NULL)
 * receive strings to be freed with mgsde_string_free. Returns MGSDE_OK
 * whenever the command ran to a verdict, including verdicts 1 and 2. */
MGSDE_API mgsde_status mgsde_run(const char* command, const char* config_json, const mgsde_run_options* options,
                                 int* exit_code, char** message, char** report_json);

#ifdef __cplusplus
}
#endif

#endif
