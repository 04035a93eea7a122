/* C interface for the hystab library.
 *
 * Hand-maintained; keep in sync with src/lib.rs. Handles are opaque and must
 * be released with their matching _free function; strings returned as char*
 * must be released with hystab_string_free. Fallible calls return a
 * HYSTAB_* code, and hystab_last_error() gives the message for the most
 * recent failure on the calling thread.
 */

#ifndef HYSTAB_H
#define HYSTAB_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Error codes. */
#define HYSTAB_OK 0
#define HYSTAB_ERR_NULL 1     /* a required pointer argument was null */
#define HYSTAB_ERR_UTF8 2     /* a string argument was not valid UTF-8 */
#define HYSTAB_ERR_CONFIG 3   /* configuration parse or validation failure */
#define HYSTAB_ERR_MODEL 4    /* the model rejected the request */
#define HYSTAB_ERR_RANGE 5    /* an index was out of range */
#define HYSTAB_ERR_INTERNAL 6 /* internal invariant failure */

/* Opaque handles. */
typedef struct hystab_scenario hystab_scenario;
typedef struct hystab_result hystab_result;

/* Message of the most recent error on the calling thread. Valid until the
 * next failing call on the same thread; do not free. */
const char *hystab_last_error(void);

/* Scenario construction and lifetime. */
int32_t hystab_scenario_from_json(const char *json, hystab_scenario **out);
int32_t hystab_scenario_preset(const char *name, hystab_scenario **out);
int32_t hystab_scenario_set_time(hystab_scenario *sc, double t_end, double dt);
char *hystab_scenario_to_json(const hystab_scenario *sc);
void hystab_scenario_free(hystab_scenario *sc);

/* Simulation. */
int32_t hystab_run(const hystab_scenario *sc, hystab_result **out);
size_t hystab_result_len(const hystab_result *res);
size_t hystab_result_dim(const hystab_result *res);
int32_t hystab_result_sample(const hystab_result *res, size_t k, double *t,
                             double *y, double *xi, double *x, size_t x_len);
int32_t hystab_result_diagnostics(const hystab_result *res, int32_t *bounded,
                                  double *growth_rate, int32_t *found,
                                  double *period, double *amplitude);
char *hystab_result_diagnostics_json(const hystab_result *res);
void hystab_result_free(hystab_result *res);

/* Stability analysis: poles, equilibrium set and the two-loop
 * frequency-domain test, serialized to JSON. */
int32_t hystab_analyze_json(const hystab_scenario *sc, char **out);

/* Releases a string returned by this library. */
void hystab_string_free(char *text);

#ifdef __cplusplus
}
#endif

#endif /* HYSTAB_H */
