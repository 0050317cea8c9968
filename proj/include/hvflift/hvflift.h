/* hvflift: lifting and nilpotent approximation toolkit for weighted
 * Hörmander vector fields.
 *
 * C API over the C++ core: opaque handles, integer status codes, UTF-8 JSON
 * strings. Every string returned through a char** must be released with
 * hvf_string_free; every handle has a matching _destroy. Error details for
 * the calling thread are available via hvf_last_error().
 */
#ifndef HVFLIFT_H
#define HVFLIFT_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hvf_status {
  HVF_OK = 0,
  HVF_ERROR_INVALID_ARGUMENT = 1,
  HVF_ERROR_PARSE = 2,
  HVF_ERROR_CONFIG = 3,
  HVF_ERROR_NUMERIC = 4,
  HVF_ERROR_PRECONDITION = 5,
  HVF_ERROR_INTERNAL = 6
} hvf_status;

typedef struct hvf_expr hvf_expr;
typedef struct hvf_system hvf_system;
typedef struct hvf_group hvf_group;
typedef struct hvf_chart hvf_chart;
typedef struct hvf_lift_result hvf_lift_result;

const char* hvf_version(void);

/* Message for the most recent failure on this thread (empty string if none). */
const char* hvf_last_error(void);

void hvf_string_free(char* s);

/* --- expressions --------------------------------------------------------- */

hvf_status hvf_expr_parse(const char* source, hvf_expr** out);
hvf_status hvf_expr_differentiate(const hvf_expr* e, int variable, hvf_expr** out);
hvf_status hvf_expr_evaluate(const hvf_expr* e, const double* x, size_t n, double* out);
hvf_status hvf_expr_print(const hvf_expr* e, char** out);
void hvf_expr_destroy(hvf_expr* e);

/* --- weighted systems ----------------------------------------------------- */

/* system_json follows the config schema's "system" object; builtin names
 * ("heisenberg", "grushin", "kolmogorov", "abelian(3)",
 * "perturbed-heisenberg(0.5)") are accepted as well. */
hvf_status hvf_system_create(const char* system_json_or_builtin, hvf_system** out);
void hvf_system_destroy(hvf_system* s);
int hvf_system_dim(const hvf_system* s);
int hvf_system_generators(const hvf_system* s);
int hvf_system_step(const hvf_system* s);

/* Freeness verdict at a point: *free_out is 1/0; when not free a JSON
 * certificate is returned through certificate_json (may be NULL). */
hvf_status hvf_system_freeness(const hvf_system* s, const double* x0, size_t n, int weight,
                               int* free_out, char** certificate_json);

/* --- lifting --------------------------------------------------------------- */

hvf_status hvf_lift(const hvf_system* s, const double* x0, size_t n, hvf_lift_result** out);
int hvf_lift_added_vars(const hvf_lift_result* l);
hvf_status hvf_lift_system(const hvf_lift_result* l, hvf_system** out);
hvf_status hvf_lift_to_json(const hvf_lift_result* l, char** json);
void hvf_lift_destroy(hvf_lift_result* l);

/* --- free nilpotent group -------------------------------------------------- */

hvf_status hvf_group_create(int n, int with_x0, int r, hvf_group** out);
void hvf_group_destroy(hvf_group* g);
int hvf_group_dim(const hvf_group* g);
int hvf_group_homogeneous_dim(const hvf_group* g);
hvf_status hvf_group_product(const hvf_group* g, const double* u, const double* v, double* out);
hvf_status hvf_group_dilate(const hvf_group* g, double lambda, const double* u, double* out);
hvf_status hvf_group_norm(const hvf_group* g, const double* u, double* out);
hvf_status hvf_group_to_json(const hvf_group* g, char** json);

/* --- charts ---------------------------------------------------------------- */

/* mode: "smooth", "regularized", or NULL for the default. */
hvf_status hvf_chart_create(const hvf_system* s, const double* xbar, size_t n, const char* mode,
                            hvf_chart** out);
void hvf_chart_destroy(hvf_chart* c);
int hvf_chart_dim(const hvf_chart* c);
hvf_status hvf_chart_exp(const hvf_chart* c, const double* u, double* x_out);
hvf_status hvf_chart_theta(const hvf_chart* c, const double* x, double* u_out);
hvf_status hvf_chart_norm(const hvf_chart* c, const double* u, double* out);
hvf_status hvf_chart_diagnostics(const hvf_chart* c, char** json);

/* --- experiments ------------------------------------------------------------ */

/* Runs the stages requested in the config; writes artifacts under out_dir
 * when the run completes (cli_exit_code 0 or 1). cli_exit_code follows the
 * command line contract: 0 pass, 1 margin failure, 2 config error,
 * 3 numerical failure. */
hvf_status hvf_run_config(const char* config_json, const char* out_dir, int* cli_exit_code,
                          char** message);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* HVFLIFT_H */
