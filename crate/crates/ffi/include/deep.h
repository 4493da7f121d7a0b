#ifndef DEEP_H
#define DEEP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DeepStatus {
  DEEP_STATUS_OK = 0,
  DEEP_STATUS_NULL_POINTER = 1,
  DEEP_STATUS_INVALID_ARGUMENT = 2,
  DEEP_STATUS_IO = 3,
  DEEP_STATUS_PARSE = 4,
  DEEP_STATUS_NUMERICAL = 5,
  DEEP_STATUS_PANIC = 6,
} DeepStatus;

/**
 * Opaque network handle.
 */
typedef struct DeepNetwork DeepNetwork;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *deep_last_error_message(void);

/**
 * Creates a complete directed network with uniform random parameters in
 * `[-init_scale, init_scale]`. Neurons `0..n_input` are inputs and the
 * last `n_output` are outputs.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum DeepStatus deep_network_new_complete(size_t n_total,
                                          size_t n_input,
                                          size_t n_output,
                                          double init_scale,
                                          uint64_t seed,
                                          struct DeepNetwork **out);

/**
 * Reads a network file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum DeepStatus deep_network_load(const char *path, struct DeepNetwork **out);

/**
 * Writes a network file.
 *
 * # Safety
 * `net` must be a live handle and `path` a NUL-terminated string.
 */
enum DeepStatus deep_network_save(const struct DeepNetwork *net, const char *path);

/**
 * Releases a handle. NULL is ignored.
 *
 * # Safety
 * `net` must come from this library and must not be used afterwards.
 */
void deep_network_free(struct DeepNetwork *net);

/**
 * Number of neurons, or 0 for NULL.
 *
 * # Safety
 * `net` must be a live handle or NULL.
 */
size_t deep_network_n_total(const struct DeepNetwork *net);

/**
 * Number of input neurons, or 0 for NULL.
 *
 * # Safety
 * `net` must be a live handle or NULL.
 */
size_t deep_network_n_input(const struct DeepNetwork *net);

/**
 * Weights plus biases still present, or 0 for NULL.
 *
 * # Safety
 * `net` must be a live handle or NULL.
 */
size_t deep_network_parameter_count(const struct DeepNetwork *net);

/**
 * Fraction of the complete graph's parameters that are absent.
 *
 * # Safety
 * `net` must be a live handle and `out` a valid pointer.
 */
enum DeepStatus deep_network_sparsity(const struct DeepNetwork *net, double *out);

/**
 * Relaxes the free phase from input `x` with default hyperparameters and
 * writes the final state (`n_total` values) to `state`.
 *
 * # Safety
 * `x` must point to `x_len` values and `state` to `state_len` writable ones.
 */
enum DeepStatus deep_network_free_equilibrium(const struct DeepNetwork *net,
                                              const double *x,
                                              size_t x_len,
                                              double *state,
                                              size_t state_len);

/**
 * Sets `*certified` to 1 when every free neuron meets the stability
 * condition, else 0.
 *
 * # Safety
 * `net` must be a live handle and `certified` a valid pointer.
 */
enum DeepStatus deep_network_certified(const struct DeepNetwork *net, int32_t *certified);

/**
 * Trains the network in place on a logic gate (`"and"`, `"or"` or
 * `"xor"`) with rule `"deep"` or `"asym"` and default hyperparameters.
 * `prune` is nonzero to enable pruning; `seed` drives the pruning lottery.
 * The last epoch's MSE goes to `final_mse` when it is not NULL.
 *
 * # Safety
 * `net` must be a live handle, `task` and `rule` NUL-terminated strings and
 * `final_mse` NULL or valid.
 */
enum DeepStatus deep_train(struct DeepNetwork *net,
                           const char *task,
                           const char *rule,
                           size_t epochs,
                           int32_t prune,
                           uint64_t seed,
                           double *final_mse);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DEEP_H */
