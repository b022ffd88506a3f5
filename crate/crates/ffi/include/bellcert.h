#ifndef BELLCERT_H
#define BELLCERT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum BcStatus {
  BC_STATUS_OK = 0,
  /**
   * Malformed or out-of-range input.
   */
  BC_STATUS_INVALID_INPUT = 1,
  /**
   * The computation itself failed.
   */
  BC_STATUS_NUMERICAL = 2,
  BC_STATUS_NULL_POINTER = 3,
  /**
   * A Rust panic was caught at the boundary.
   */
  BC_STATUS_PANIC = 4,
} BcStatus;

typedef struct BcCertificate BcCertificate;

typedef struct BcExpression BcExpression;

/**
 * Seesaw settings; `bc_seesaw_config_default` gives the library defaults.
 */
typedef struct BcSeesawConfig {
  size_t restarts;
  size_t max_iters;
  double tol;
  size_t inner_iters;
  uint64_t seed;
} BcSeesawConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next call into the library from the same thread.
 */
const char *bc_last_error(void);

/**
 * # Safety
 * `s` must come from this library or be null.
 */
void bc_string_free(char *s);

struct BcSeesawConfig bc_seesaw_config_default(void);

/**
 * # Safety
 * `name` must be a NUL-terminated string; `out_expr` must be writable.
 */
enum BcStatus bc_expression_builtin(const char *name, struct BcExpression **out_expr);

/**
 * # Safety
 * `json` must be a NUL-terminated string; `out_expr` must be writable.
 */
enum BcStatus bc_expression_from_json(const char *json, struct BcExpression **out_expr);

/**
 * # Safety
 * `expr` must come from this library or be null.
 */
void bc_expression_free(struct BcExpression *expr);

/**
 * Exact local bound by enumeration.
 *
 * # Safety
 * `expr` must be a live handle; `out_value` must be writable.
 */
enum BcStatus bc_classical_bound(const struct BcExpression *expr, double *out_value);

/**
 * Seesaw lower estimate of `C(I, dim, top)`.
 *
 * # Safety
 * `expr` must be a live handle; `out_value` must be writable.
 */
enum BcStatus bc_seesaw(const struct BcExpression *expr,
                        size_t dim,
                        size_t top,
                        struct BcSeesawConfig config,
                        double *out_value);

/**
 * # Safety
 * `expr` must be a live handle; `out_cert` must be writable.
 */
enum BcStatus bc_certify(const struct BcExpression *expr,
                         size_t dim,
                         struct BcSeesawConfig config,
                         struct BcCertificate **out_cert);

/**
 * # Safety
 * `json` must be a NUL-terminated string; `out_cert` must be writable.
 */
enum BcStatus bc_certificate_from_json(const char *json, struct BcCertificate **out_cert);

/**
 * # Safety
 * `cert` must be a live handle; `out_json` must be writable. The string is
 * freed with `bc_string_free`.
 */
enum BcStatus bc_certificate_to_json(const struct BcCertificate *cert, char **out_json);

/**
 * # Safety
 * `cert` must be a live handle.
 */
enum BcStatus bc_certificate_is_nondegenerate(const struct BcCertificate *cert, bool *out_flag);

/**
 * # Safety
 * `cert` must be a live handle.
 */
enum BcStatus bc_certificate_eps1_max(const struct BcCertificate *cert, double *out_value);

/**
 * # Safety
 * `cert` must come from this library or be null.
 */
void bc_certificate_free(struct BcCertificate *cert);

/**
 * Entanglement certificate JSON for a correlation given as JSON. A
 * violation outside the certified range is a success whose JSON carries
 * null bounds.
 *
 * # Safety
 * Handles must be live, `correlation_json` NUL-terminated and `out_json`
 * writable. The string is freed with `bc_string_free`.
 */
enum BcStatus bc_bound(const struct BcExpression *expr,
                       const struct BcCertificate *cert,
                       const char *correlation_json,
                       size_t dim,
                       char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BELLCERT_H */
