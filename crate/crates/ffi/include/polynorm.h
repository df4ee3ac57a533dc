#ifndef POLYNORM_H
#define POLYNORM_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PnStatus {
  PN_STATUS_OK = 0,
  PN_STATUS_NULL_POINTER = 1,
  PN_STATUS_INVALID_INPUT = 2,
  PN_STATUS_PARSE = 3,
  PN_STATUS_SOLVER = 4,
  PN_STATUS_PANIC = 5,
} PnStatus;

typedef enum PnVerdict {
  PN_VERDICT_SOS = 0,
  PN_VERDICT_NOT_SOS = 1,
  PN_VERDICT_UNDECIDED = 2,
} PnVerdict;

typedef enum PnOutcome {
  PN_OUTCOME_CERTIFIED = 0,
  PN_OUTCOME_NOT_CERTIFIED = 1,
  PN_OUTCOME_REFUTED = 2,
} PnOutcome;

// A finite set of square matrices.
typedef struct PnFamily PnFamily;

// A homogeneous polynomial.
typedef struct PnForm PnForm;

// The result of a certification run, kept as JSON plus its outcome.
typedef struct PnReport PnReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *pn_last_error(void);

// Library version as a static string.
const char *pn_version(void);

// Frees a string returned by this library.
//
// # Safety
// `s` must come from this library and not have been freed.
void pn_string_free(char *s);

// Parses a form from its JSON representation.
//
// # Safety
// `json` must be a NUL-terminated string and `out` writable.
enum PnStatus pn_form_from_json(const char *json, struct PnForm **out);

// Builds a form from `n_terms` terms; `exponents` holds `n_terms * n_vars`
// entries, row by row.
//
// # Safety
// The arrays must hold the stated number of elements and `out` be writable.
enum PnStatus pn_form_new(size_t n_vars,
                          uint32_t degree,
                          const uint32_t *exponents,
                          const double *coeffs,
                          size_t n_terms,
                          struct PnForm **out);

// # Safety
// `form` must come from this library and not have been freed.
void pn_form_free(struct PnForm *form);

// # Safety
// `form` must be a live handle or null.
size_t pn_form_n_vars(const struct PnForm *form);

// # Safety
// `form` must be a live handle or null.
uint32_t pn_form_degree(const struct PnForm *form);

// Evaluates the form at `x`, which holds `n` coordinates.
//
// # Safety
// `x` must hold `n` doubles and `out` be writable.
enum PnStatus pn_form_eval(const struct PnForm *form, const double *x, size_t n, double *out);

// JSON text of the form; free it with `pn_string_free`.
//
// # Safety
// `form` must be a live handle and `out` writable.
enum PnStatus pn_form_to_json(const struct PnForm *form, char **out);

// SOS test of `(Σx²)^r f`, or of its sos-convexity when `convex` is
// nonzero.
//
// # Safety
// `form` must be a live handle and `out` writable.
enum PnStatus pn_is_sos(const struct PnForm *form, uint32_t r, int32_t convex, enum PnVerdict *out);

// Certifies that `f^{1/d}` is a norm (`hessian == 0`) or that `f` has a
// positive definite Hessian (`hessian != 0`).
//
// # Safety
// `form` must be a live handle and `out` writable.
enum PnStatus pn_certify(const struct PnForm *form,
                         int32_t hessian,
                         uint32_t r_max,
                         uint32_t deg_q,
                         uint64_t seed,
                         struct PnReport **out);

// # Safety
// `report` must be a live handle or null.
enum PnOutcome pn_report_outcome(const struct PnReport *report);

// JSON text of the report; free it with `pn_string_free`.
//
// # Safety
// `report` must be a live handle and `out` writable.
enum PnStatus pn_report_to_json(const struct PnReport *report, char **out);

// # Safety
// `report` must come from this library and not have been freed.
void pn_report_free(struct PnReport *report);

// Builds a family of `count` matrices of size `n × n` from `data`, which
// holds them one after another in row-major order.
//
// # Safety
// `data` must hold `count * n * n` doubles and `out` be writable.
enum PnStatus pn_family_new(size_t n, size_t count, const double *data, struct PnFamily **out);

// # Safety
// `family` must come from this library and not have been freed.
void pn_family_free(struct PnFamily *family);

// Largest `ρ(product)^{1/k}` over products of length `k ≤ max_len`.
//
// # Safety
// `family` must be a live handle and `out` writable.
enum PnStatus pn_jsr_lower_bound(const struct PnFamily *family, size_t max_len, double *out);

// Searches the given even degrees for a contracting polynomial norm.
//
// # Safety
// `degrees` must hold `n_degrees` entries and `out` be writable.
enum PnStatus pn_jsr_certify(const struct PnFamily *family,
                             const uint32_t *degrees,
                             size_t n_degrees,
                             struct PnReport **out);

// Moment form of degree `d` for the `p`-norm on `R^n` (`p` may be
// infinite).
//
// # Safety
// `out` must be writable.
enum PnStatus pn_moment_form_pnorm(double p, size_t n, uint32_t d, struct PnForm **out);

// Worst-case ratio guarantee `d/(n+d) · (n/(n+d))^{n/d}` for moment forms.
double pn_approx_factor(size_t n, uint32_t d);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POLYNORM_H */
