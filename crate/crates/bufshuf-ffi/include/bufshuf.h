#ifndef BUFSHUF_H
#define BUFSHUF_H

/* This file is generated by cbindgen from bufshuf-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum BufshufStatus {
  BUFSHUF_STATUS_OK = 0,
  // A required pointer argument was null.
  BUFSHUF_STATUS_NULL_POINTER = 1,
  // A parameter was outside its allowed range.
  BUFSHUF_STATUS_INVALID_ARGUMENT = 2,
  // The buffer size does not divide the card count.
  BUFSHUF_STATUS_DIVISIBILITY = 3,
  // Weights do not form a probability vector.
  BUFSHUF_STATUS_INVALID_WEIGHTS = 4,
  // The experiment failed to run (e.g. fewer than 2 trials).
  BUFSHUF_STATUS_EXPERIMENT_FAILED = 5,
} BufshufStatus;

// Opaque handle around a validated configuration.
typedef struct BufshufConfig BufshufConfig;

// Opaque handle around per-round experiment statistics.
typedef struct BufshufExperiment BufshufExperiment;

// All anonymity measures for one weight vector.
typedef struct BufshufMetricReport {
  double phi;
  double alpha;
  double beta;
  double anon_prime;
  double anon;
  double rel_entropy_bits;
  uint64_t k_support;
} BufshufMetricReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Validates a configuration and returns a handle through `out`.
// `binomial_assignment` selects the binomial card-to-server mode; 0 keeps
// the exact-partition mode. Free with [`bufshuf_config_free`].
//
// # Safety
// `out` must be a valid pointer to a `*mut BufshufConfig`.
enum BufshufStatus bufshuf_config_new(uint64_t n,
                                      uint64_t k,
                                      uint64_t honest,
                                      uint64_t fake,
                                      int32_t binomial_assignment,
                                      struct BufshufConfig **out);

// # Safety
// `config` must be null or a pointer returned by [`bufshuf_config_new`]
// that has not been freed yet.
void bufshuf_config_free(struct BufshufConfig *config);

// Derived server count m = n/k of a configuration.
//
// # Safety
// `config` must be a live pointer from [`bufshuf_config_new`].
uint64_t bufshuf_config_servers(const struct BufshufConfig *config);

// Per-round rate with all servers honest and no marked cards.
//
// # Safety
// `out` must be a valid pointer to a double.
enum BufshufStatus bufshuf_rate_uniform(uint64_t n, uint64_t k, double *out);

// Rate with only `s` of the n/k servers honest.
//
// # Safety
// `out` must be a valid pointer to a double.
enum BufshufStatus bufshuf_rate_corrupt_servers(uint64_t n, uint64_t k, uint64_t s, double *out);

// Marked-input rate, printed closed form (disagrees with enumeration on
// small instances; kept for comparison).
//
// # Safety
// `out` must be a valid pointer to a double.
enum BufshufStatus bufshuf_rate_fake_paper(uint64_t n, uint64_t k, uint64_t f, double *out);

// Marked-input rate, first-principles form (matches enumeration).
//
// # Safety
// `out` must be a valid pointer to a double.
enum BufshufStatus bufshuf_rate_fake_derived(uint64_t n, uint64_t k, uint64_t f, double *out);

// Combined corrupted-servers + marked-inputs rate, printed form.
//
// # Safety
// `out` must be a valid pointer to a double.
enum BufshufStatus bufshuf_rate_combined_paper(uint64_t n,
                                               uint64_t k,
                                               uint64_t s,
                                               uint64_t f,
                                               double *out);

// Combined rate, first-principles form (matches enumeration).
//
// # Safety
// `out` must be a valid pointer to a double.
enum BufshufStatus bufshuf_rate_combined_derived(uint64_t n,
                                                 uint64_t k,
                                                 uint64_t s,
                                                 uint64_t f,
                                                 double *out);

// Binomial-assignment rate. `corrected_exponent != 0` selects the exponent
// policy under which the load weights form the Binomial(n, K/n)
// distribution; 0 evaluates the sum exactly as printed.
//
// # Safety
// `out` must be a valid pointer to a double.
enum BufshufStatus bufshuf_rate_binomial(uint64_t n,
                                         uint64_t k,
                                         uint64_t s,
                                         uint64_t f,
                                         int32_t corrected_exponent,
                                         double *out);

// Rounds needed so the expected potential drops below `n^-b`.
//
// # Safety
// `out` must be a valid pointer to a uint64.
enum BufshufStatus bufshuf_rounds_for_target(double rate, uint64_t n, double b, uint64_t *out);

// Rounds after which the potential exceeds `n^-b` with probability at most
// `n^-b` (twice [`bufshuf_rounds_for_target`], by Markov's inequality).
//
// # Safety
// `out` must be a valid pointer to a uint64.
enum BufshufStatus bufshuf_markov_rounds(double rate, uint64_t n, double b, uint64_t *out);

// Evaluates every anonymity measure on a weight vector (probabilities
// summing to 1).
//
// # Safety
// `weights` must point to `len` readable doubles and `out` to a writable
// report struct.
enum BufshufStatus bufshuf_metric_report(const double *weights,
                                         size_t len,
                                         struct BufshufMetricReport *out);

// Runs `trials` seeded trials of `rounds` rounds and returns per-round
// statistics through `out`. Deterministic in (config, rounds, trials, seed).
// Free with [`bufshuf_experiment_free`].
//
// # Safety
// `config` must be a live configuration handle and `out` a valid pointer.
enum BufshufStatus bufshuf_run_experiment(const struct BufshufConfig *config,
                                          uint32_t rounds,
                                          uint64_t trials,
                                          uint64_t master_seed,
                                          struct BufshufExperiment **out);

// Number of per-round rows (rounds + 1, row 0 being the initial state).
//
// # Safety
// `experiment` must be a live experiment handle.
size_t bufshuf_experiment_len(const struct BufshufExperiment *experiment);

// Reads one per-round row. Any of the value pointers may be null to skip
// that field.
//
// # Safety
// `experiment` must be a live experiment handle; non-null value pointers
// must be writable.
enum BufshufStatus bufshuf_experiment_row(const struct BufshufExperiment *experiment,
                                          size_t round,
                                          double *mean_phi,
                                          double *sample_std,
                                          double *stderr);

// Serializes the experiment to a JSON string. Free with
// [`bufshuf_string_free`].
//
// # Safety
// `experiment` must be a live experiment handle.
char *bufshuf_experiment_to_json(const struct BufshufExperiment *experiment);

// # Safety
// `s` must be null or a string returned by [`bufshuf_experiment_to_json`].
void bufshuf_string_free(char *s);

// # Safety
// `experiment` must be null or a pointer from [`bufshuf_run_experiment`]
// that has not been freed yet.
void bufshuf_experiment_free(struct BufshufExperiment *experiment);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BUFSHUF_H */
