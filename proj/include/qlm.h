#ifndef QLM_H
#define QLM_H

/* C interface to the quasi-local mass pipeline.
 *
 * Usage: create a context, submit a JSON request through qlm_run, read the
 * named text artifacts off the result handle, free both.  All pointers
 * returned from a handle stay valid until that handle is freed.  Requests
 * are validated against a strict schema (unknown keys rejected) before any
 * compute starts; outputs are deterministic for a fixed request.
 *
 * Request shape: {"command": <name>, ...command-specific keys...}
 * Commands: catalog_list, catalog_dump, mass, embed, jang, dirac_spectrum,
 * dirac_solve, dirac_verify, verify.  See the CLI --help for the key sets.
 */

#ifdef __cplusplus
extern "C" {
#endif

typedef struct qlm_ctx qlm_ctx;
typedef struct qlm_result qlm_result;

enum qlm_status {
  QLM_OK = 0,
  QLM_E_CONFIG = 1,       /* invalid request / parameters */
  QLM_E_DIMENSION = 2,    /* mismatched shapes or grids */
  QLM_E_GEOMETRY = 3,     /* geometric precondition violated */
  QLM_E_CONVERGENCE = 4,  /* iteration failed to converge */
  QLM_E_ADMISSIBILITY = 5 /* admissibility conditions failed */
};

qlm_ctx* qlm_ctx_new(void);
void qlm_ctx_free(qlm_ctx* ctx);

/* message of the last failed call on this context ("" if none) */
const char* qlm_error_message(const qlm_ctx* ctx);

/* Run a request.  On success *out holds >= 1 artifact and QLM_OK is
 * returned; on failure *out is NULL and the status encodes the error kind. */
int qlm_run(qlm_ctx* ctx, const char* request_json, qlm_result** out);

int qlm_result_count(const qlm_result* res);
const char* qlm_result_name(const qlm_result* res, int i);
const char* qlm_result_text(const qlm_result* res, int i);
void qlm_result_free(qlm_result* res);

const char* qlm_version(void);

#ifdef __cplusplus
}
#endif

#endif /* QLM_H */
