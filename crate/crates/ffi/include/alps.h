#ifndef ALPS_H
#define ALPS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AlpsStatus {
  ALPS_STATUS_OK = 0,
  ALPS_STATUS_NULL_POINTER = 1,
  ALPS_STATUS_INVALID_ARGUMENT = 2,
  ALPS_STATUS_CONFIG = 3,
  ALPS_STATUS_DOMAIN = 4,
  ALPS_STATUS_IO = 5,
  ALPS_STATUS_INTERNAL = 6,
} AlpsStatus;

/**
 * A running chain with its own random stream.
 */
typedef struct AlpsChain AlpsChain;

/**
 * Parsed and validated run configuration.
 */
typedef struct AlpsConfig AlpsConfig;

/**
 * Outcome of the last iteration of [`alps_chain_step`].
 */
typedef struct AlpsStep {
  size_t mode;
  size_t from_rung;
  size_t rung;
  int8_t direction;
  bool accepted;
  bool mode_refreshed;
} AlpsStep;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or an empty string. Owned by
 * the library; valid until the next call on this thread.
 */
const char *alps_last_error(void);

const char *alps_version(void);

/**
 * Releases a string returned by this library.
 */
void alps_string_free(char *s);

/**
 * Two equal Gaussian modes in 16 dimensions.
 */
enum AlpsStatus alps_config_default(struct AlpsConfig **out);

/**
 * Parses and validates a TOML configuration.
 */
enum AlpsStatus alps_config_from_toml(const char *toml, struct AlpsConfig **out);

/**
 * The configuration with all defaults filled in, as TOML. Free the result
 * with [`alps_string_free`].
 */
enum AlpsStatus alps_config_to_toml(const struct AlpsConfig *config, char **out);

void alps_config_free(struct AlpsConfig *config);

/**
 * Writes the number of rungs to `len` and, when `buf` holds at least that
 * many values, the inverse temperatures in increasing order. Passing a null
 * `buf` queries the length only.
 */
enum AlpsStatus alps_ladder_betas(const struct AlpsConfig *config,
                                  double *buf,
                                  size_t cap,
                                  size_t *len);

/**
 * Starts a chain at the configured rung, in the configured mode or one drawn
 * from the weights.
 */
enum AlpsStatus alps_chain_new(const struct AlpsConfig *config,
                               uint64_t seed,
                               struct AlpsChain **out);

/**
 * Advances the chain `n` iterations. `last` may be null.
 */
enum AlpsStatus alps_chain_step(struct AlpsChain *chain, uint64_t n, struct AlpsStep *last);

/**
 * Current mode, rung and inverse temperature. Any output pointer may be null.
 */
enum AlpsStatus alps_chain_state(const struct AlpsChain *chain,
                                 size_t *mode,
                                 size_t *rung,
                                 double *beta);

void alps_chain_free(struct AlpsChain *chain);

/**
 * Runs the configured simulation and returns its report as JSON. Free the
 * result with [`alps_string_free`].
 */
enum AlpsStatus alps_simulate_report(const struct AlpsConfig *config,
                                     uint64_t seed,
                                     size_t threads,
                                     char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ALPS_H */
