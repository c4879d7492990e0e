#ifndef HYRELAY_H
#define HYRELAY_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Values accepted for the `bound` argument.
typedef enum HrBound {
  HR_BOUND_DIRECT = 0,
  HR_BOUND_RELAY = 1,
  HR_BOUND_AUTO = 2,
} HrBound;

// Values accepted for the `metric` argument of [`hr_select`].
typedef enum HrMetric {
  HR_METRIC_MAX_SNR = 0,
  HR_METRIC_MAX_DR = 1,
  HR_METRIC_MAX_RR = 2,
  HR_METRIC_MAX_DG = 3,
  HR_METRIC_MIN_RF = 4,
} HrMetric;

typedef enum HrStatus {
  HR_STATUS_OK = 0,
  HR_STATUS_NULL_POINTER = 1,
  HR_STATUS_INVALID_ARGUMENT = 2,
  HR_STATUS_DOMAIN = 3,
  HR_STATUS_CONTRACT = 4,
  HR_STATUS_SOLVER = 5,
  HR_STATUS_IO = 6,
  HR_STATUS_PANIC = 7,
} HrStatus;

// A validated scenario.
typedef struct HrScenario HrScenario;

// The outcome of a mode selection.
typedef struct HrSelection HrSelection;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null if none. Valid until the
// next failing call on the same thread.
const char *hr_last_error(void);

// The bundled five-relay scenario.
//
// # Safety
// `out` must be a valid pointer to write a handle into.
enum HrStatus hr_scenario_canonical(struct HrScenario **out);

// Parse a scenario from a JSON document.
//
// # Safety
// `json` must be a nul-terminated string and `out` a valid pointer.
enum HrStatus hr_scenario_from_json(const char *json, struct HrScenario **out);

// Load a scenario from a JSON file.
//
// # Safety
// `path` must be a nul-terminated string and `out` a valid pointer.
enum HrStatus hr_scenario_load(const char *path, struct HrScenario **out);

// Replace the channel seed.
//
// # Safety
// `scenario` must be a live handle or null.
enum HrStatus hr_scenario_set_seed(struct HrScenario *scenario, uint64_t seed);

// Number of relays, 0 for a null handle.
//
// # Safety
// `scenario` must be a live handle or null.
size_t hr_scenario_relay_count(const struct HrScenario *scenario);

// # Safety
// `scenario` must come from this library and not be used afterwards. Null is ignored.
void hr_scenario_free(struct HrScenario *scenario);

// Greedy mode selection with `metric` (an [`HrMetric`]) under `bound` (an [`HrBound`]).
//
// # Safety
// `scenario` must be a live handle and `out` a valid pointer.
enum HrStatus hr_select(const struct HrScenario *scenario,
                        int32_t metric_id,
                        int32_t bound,
                        struct HrSelection **out);

// Exhaustive mode selection; limited to small relay counts.
//
// # Safety
// `scenario` must be a live handle and `out` a valid pointer.
enum HrStatus hr_brute(const struct HrScenario *scenario, int32_t bound, struct HrSelection **out);

// SNR bound for a fixed assignment: `passive[i]` (zero-based) reflects at phase
// `theta[i]`. `theta` may be null for zero phases.
//
// # Safety
// `passive` and a non-null `theta` must point to `len` elements; `gamma` must be valid.
enum HrStatus hr_eval(const struct HrScenario *scenario,
                      int32_t bound,
                      const size_t *passive,
                      const double *theta,
                      size_t len,
                      double *gamma);

// Achieved SNR bound, NaN for a null handle.
//
// # Safety
// `sel` must be a live handle or null.
double hr_selection_gamma(const struct HrSelection *sel);

// All-active SNR bound of the same realization, NaN for a null handle.
//
// # Safety
// `sel` must be a live handle or null.
double hr_selection_baseline_gamma(const struct HrSelection *sel);

// Throughput `½·log2(1+γ)` in bit/s/Hz, NaN for a null handle.
//
// # Safety
// `sel` must be a live handle or null.
double hr_selection_throughput(const struct HrSelection *sel);

// Bound the selection ran under: 0 direct, 1 relay, 2 single antenna, -1 for null.
//
// # Safety
// `sel` must be a live handle or null.
int32_t hr_selection_bound(const struct HrSelection *sel);

// Copies up to `cap` zero-based passive relay indices into `buf` and returns how
// many there are in total. `buf` may be null to query the count.
//
// # Safety
// `sel` must be a live handle or null; a non-null `buf` must hold `cap` elements.
size_t hr_selection_passive(const struct HrSelection *sel, size_t *buf, size_t cap);

// Reflection phase of passive relay `relay` (zero-based).
//
// # Safety
// `sel` must be a live handle and `theta` a valid pointer.
enum HrStatus hr_selection_theta(const struct HrSelection *sel, size_t relay, double *theta);

// # Safety
// `sel` must come from this library and not be used afterwards. Null is ignored.
void hr_selection_free(struct HrSelection *sel);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HYRELAY_H */
