#ifndef MLQ_H
#define MLQ_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Status codes. Values 2 and 3 match the CLI exit classes.
 */
enum MlqStatus
#if defined(__cplusplus) || __STDC_VERSION__ >= 202311L
  : int32_t
#endif // defined(__cplusplus) || __STDC_VERSION__ >= 202311L
 {
  MlqStatus_Ok = 0,
  /*
   A required pointer was null or a string was not UTF-8.
   */
  MlqStatus_InvalidArgument = 1,
  /*
   Bad parameters, configuration or domain error.
   */
  MlqStatus_Usage = 2,
  /*
   Integration or factorization failure.
   */
  MlqStatus_Numerical = 3,
  /*
   A Rust panic was caught at the boundary.
   */
  MlqStatus_Internal = 4,
};
#ifndef __cplusplus
#if __STDC_VERSION__ >= 202311L
typedef enum MlqStatus MlqStatus;
#else
typedef int32_t MlqStatus;
#endif // __STDC_VERSION__ >= 202311L
#endif // __cplusplus

/*
 Opaque surface evaluator bound to one potential and spectral value.
 */
typedef struct MlqEvaluator MlqEvaluator;

/*
 Opaque holomorphic potential.
 */
typedef struct MlqPotential MlqPotential;

/*
 Surface data at one point.
 */
typedef struct MlqSample {
  /*
   Q₂ lift, interleaved (re, im) for 4 coordinates.
   */
  double q2[8];
  /*
   S³ pair (f_min, N) as quaternion coordinates.
   */
  double fmin[4];
  double n[4];
  /*
   S²×S² pair.
   */
  double phi[3];
  double psi[3];
  double tail_norm;
} MlqSample;

typedef struct MlqClosing {
  double mu1;
  double mu2;
  bool closes_q2;
  bool closes_s3;
} MlqClosing;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *mlq_version(void);

/*
 Message of the last failed call on this thread, or null. The pointer
 stays valid until the next failing call on the same thread.
 */
const char *mlq_last_error_message(void);

/*
 Releases a string returned by this library. Null is ignored.

 # Safety
 `s` must come from an `mlq_*` function returning an owned string.
 */
void mlq_string_free(char *s);

/*
 Parses a potential description, e.g. `{"family": "torus"}`.

 # Safety
 `json` must be a NUL-terminated string and `out` a valid pointer.
 */
MlqStatus mlq_potential_from_json(const char *json, struct MlqPotential **out);

/*
 # Safety
 `p` must be null or a handle from `mlq_potential_from_json`, freed once.
 */
void mlq_potential_free(struct MlqPotential *p);

/*
 Coefficient matrix of ξ at (z, λ), row-major with interleaved (re, im):
 8 doubles written to `out`.

 # Safety
 `p` must be a live handle and `out` must hold 8 doubles.
 */
MlqStatus mlq_potential_xi(const struct MlqPotential *p,
                           double z_re,
                           double z_im,
                           double lambda_re,
                           double lambda_im,
                           double *out);

/*
 Creates an evaluator at spectral value λ₀ (|λ₀| = 1) with truncation
 window [−N, N]. The potential is copied; it may be freed afterwards.

 # Safety
 `p` must be a live handle and `out` a valid pointer.
 */
MlqStatus mlq_evaluator_new(const struct MlqPotential *p,
                            double lambda0_re,
                            double lambda0_im,
                            int32_t truncation_n,
                            struct MlqEvaluator **out);

/*
 # Safety
 `ev` must be null or a handle from `mlq_evaluator_new`, freed once.
 */
void mlq_evaluator_free(struct MlqEvaluator *ev);

/*
 Evaluates the surface at z. Safe to call concurrently on one handle.

 # Safety
 `ev` must be a live handle and `out` a valid pointer.
 */
MlqStatus mlq_evaluator_sample(const struct MlqEvaluator *ev,
                               double z_re,
                               double z_im,
                               struct MlqSample *out);

/*
 Finite-difference residual report at z (step h) as a JSON string.
 Release it with `mlq_string_free`.

 # Safety
 `ev` must be a live handle and `out` a valid pointer.
 */
MlqStatus mlq_evaluator_report_json(const struct MlqEvaluator *ev,
                                    double z_re,
                                    double z_im,
                                    double h,
                                    char **out);

/*
 Closing prediction for the equivariant family (a, b, c) at λ₀.

 # Safety
 `out` must be a valid pointer.
 */
MlqStatus mlq_cylinder_closing(double a,
                               double b,
                               double c,
                               double lambda0_re,
                               double lambda0_im,
                               struct MlqClosing *out);

/*
 The SO(4) matrix of (p, q) ∈ SU(2)×SU(2). Inputs are 2×2 complex
 matrices (8 doubles, row-major, interleaved); output is 16 doubles,
 row-major.

 # Safety
 `p`, `q` must hold 8 doubles each and `out` 16.
 */
MlqStatus mlq_psi_so4(const double *p, const double *q, double *out);

/*
 Runs a CLI command ("generate", "verify", "closing" or "family") on a
 config file. `out_dir` may be null; `jobs` = 0 selects the default.
 Returns the CLI exit code (0 pass, 1 checks failed, 2 usage, 3
 numerical), or -1 for invalid arguments.

 # Safety
 String arguments must be NUL-terminated (or null where allowed).
 */
int32_t mlq_run_command(const char *command,
                        const char *config_path,
                        const char *out_dir,
                        uint32_t jobs);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MLQ_H */
