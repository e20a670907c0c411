#ifndef LOOPGROUP_H
#define LOOPGROUP_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

// Result codes. Zero is success.
typedef enum LgStatus {
  LG_STATUS_OK = 0,
  LG_STATUS_NULL_POINTER = 1,
  LG_STATUS_INVALID_ARGUMENT = 2,
  LG_STATUS_PARSE = 3,
  // The loop is outside the big cell.
  LG_STATUS_NOT_IN_BIG_CELL = 4,
  // The constant obstruction has no real logarithm.
  LG_STATUS_LOG_BRANCH_FAILURE = 5,
  // Input or factors are not fixed by the real form.
  LG_STATUS_FORM_VIOLATION = 6,
  // Singular samples, residuals over tolerance, failed certificates.
  LG_STATUS_NUMERICAL = 7,
  LG_STATUS_PANIC = 8,
} LgStatus;

// A real form: first-kind involutions plus an optional second-kind partner.
typedef struct LgForm LgForm;

// A matrix-valued Laurent polynomial.
typedef struct LgLoop LgLoop;

// Message for the last failed call on this thread, or null after a success.
// Valid until the next `lg_` call on the same thread.
const char *lg_last_error_message(void);

// Parses a loop from its JSON text.
//
// # Safety
// `json` must be a nul-terminated string; `out` must be writable.
enum LgStatus lg_loop_from_json(const char *json, struct LgLoop **out);

// Serializes a loop. Free the result with `lg_string_free`.
//
// # Safety
// `x` must be a live handle; `out` must be writable.
enum LgStatus lg_loop_to_json(const struct LgLoop *x, char **out);

// Matrix size of a loop, or 0 for a null handle.
//
// # Safety
// `x` must be null or a live handle.
size_t lg_loop_size(const struct LgLoop *x);

// Lowest and highest stored degree.
//
// # Safety
// `x` must be a live handle; `min` and `max` must be writable.
enum LgStatus lg_loop_window(const struct LgLoop *x, int64_t *min, int64_t *max);

// # Safety
// `x` must be null or a handle not yet freed.
void lg_loop_free(struct LgLoop *x);

// # Safety
// `s` must be null or a string returned by this library and not yet freed.
void lg_string_free(char *s);

// Catalog form by name: `un(n,eps)`, `so-curved-flat(n,k)`, `glr(n)`.
//
// # Safety
// `name` must be a nul-terminated string; `out` must be writable.
enum LgStatus lg_form_builtin(const char *name, struct LgForm **out);

// Matrix size of loops in the form, or 0 for a null handle.
//
// # Safety
// `form` must be null or a live handle.
size_t lg_form_size(const struct LgForm *form);

// # Safety
// `form` must be null or a handle not yet freed.
void lg_form_free(struct LgForm *form);

// Seeded random loop fixed by the form, with degrees in [-degree, degree].
//
// # Safety
// `form` must be a live handle; `out` must be writable.
enum LgStatus lg_random_loop(const struct LgForm *form,
                             int64_t degree,
                             double amplitude,
                             uint64_t seed,
                             struct LgLoop **out);

// Splits `x = minus * plus` with `minus(inf) = I`. With a non-null `form`
// the input and both factors are checked against it.
//
// # Safety
// `x` must be a live handle, `form` null or live; outputs must be writable.
enum LgStatus lg_birkhoff_factor(const struct LgForm *form,
                                 const struct LgLoop *x,
                                 size_t truncation,
                                 double tol,
                                 struct LgLoop **out_minus,
                                 struct LgLoop **out_plus);

// Splits `x = z * y` with `z` fixed by the form's partner involution and
// `y` in the positive subgroup. The form must have a partner.
//
// # Safety
// `form` and `x` must be live handles; outputs must be writable.
enum LgStatus lg_iwasawa_factor(const struct LgForm *form,
                                const struct LgLoop *x,
                                size_t truncation,
                                double tol,
                                struct LgLoop **out_z,
                                struct LgLoop **out_y);

// Winding number of `det x` around the unit circle.
//
// # Safety
// `x` must be a live handle; `out` must be writable.
enum LgStatus lg_winding_det(const struct LgLoop *x, int64_t *out);

// Evaluates `x(re + i im)` into `out` as row-major interleaved
// `[re, im]` pairs; `len` must be at least `2 n n`.
//
// # Safety
// `x` must be a live handle; `out` must point to `len` writable doubles.
enum LgStatus lg_loop_eval(const struct LgLoop *x, double re, double im, double *out, size_t len);

#endif  /* LOOPGROUP_H */
