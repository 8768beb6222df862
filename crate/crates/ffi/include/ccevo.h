#ifndef CCEVO_H
#define CCEVO_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CcevoStatus {
  CCEVO_STATUS_OK = 0,
  CCEVO_STATUS_NULL_POINTER = 1,
  CCEVO_STATUS_INVALID_ARGUMENT = 2,
  CCEVO_STATUS_NOT_FOUND = 3,
  CCEVO_STATUS_DIMENSION = 4,
  CCEVO_STATUS_IO = 5,
  CCEVO_STATUS_PANIC = 6,
  CCEVO_STATUS_INTERNAL = 7,
} CcevoStatus;

typedef enum CcevoBackend {
  CCEVO_BACKEND_AUTO = 0,
  CCEVO_BACKEND_FFT = 1,
  CCEVO_BACKEND_DIRECT = 2,
} CcevoBackend;

// A row-major grid of cells in `[0, 1]`.
typedef struct CcevoGrid CcevoGrid;

// A validated CA rule.
typedef struct CcevoRule CcevoRule;

// A rule bound to one grid shape.
typedef struct CcevoSimulator CcevoSimulator;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. Valid until the
// next call into this library on the same thread.
const char *ccevo_last_error(void);

// Library version as a static NUL-terminated string.
const char *ccevo_version(void);

// Number of shipped presets.
size_t ccevo_preset_count(void);

// Name of preset `index` as a static NUL-terminated string, or NULL when out of range.
const char *ccevo_preset_name(size_t index);

enum CcevoStatus ccevo_rule_from_preset(const char *name, struct CcevoRule **out);

// Parses a rule from its JSON file format.
enum CcevoStatus ccevo_rule_from_json(const char *json, struct CcevoRule **out);

// Time step of the rule.
enum CcevoStatus ccevo_rule_dt(const struct CcevoRule *rule, double *out);

void ccevo_rule_free(struct CcevoRule *rule);

// All-zero grid.
enum CcevoStatus ccevo_grid_new(size_t height, size_t width, struct CcevoGrid **out);

// Grid copied from `height * width` row-major values in `[0, 1]`.
enum CcevoStatus ccevo_grid_from_cells(size_t height,
                                       size_t width,
                                       const double *cells,
                                       struct CcevoGrid **out);

size_t ccevo_grid_height(const struct CcevoGrid *grid);

size_t ccevo_grid_width(const struct CcevoGrid *grid);

enum CcevoStatus ccevo_grid_get(const struct CcevoGrid *grid, size_t row, size_t col, double *out);

// Sets one cell; the value must lie in `[0, 1]`.
enum CcevoStatus ccevo_grid_set(struct CcevoGrid *grid, size_t row, size_t col, double value);

// Copies the cells row-major into `out`, which must hold `height * width` values.
enum CcevoStatus ccevo_grid_copy_cells(const struct CcevoGrid *grid, double *out, size_t len);

void ccevo_grid_free(struct CcevoGrid *grid);

// Prepares `rule` for grids of the given shape. `backend` is a
// `CcevoBackend` value. The rule handle may be freed afterwards.
enum CcevoStatus ccevo_simulator_new(const struct CcevoRule *rule,
                                     size_t height,
                                     size_t width,
                                     int32_t backend,
                                     struct CcevoSimulator **out);

// Advances `grid` in place by `steps` updates.
enum CcevoStatus ccevo_simulator_step(struct CcevoSimulator *sim,
                                      struct CcevoGrid *grid,
                                      size_t steps);

void ccevo_simulator_free(struct CcevoSimulator *sim);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CCEVO_H */
