#ifndef TRACT_FORGE_H
#define TRACT_FORGE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

// Result of every call.
typedef enum TfStatus {
  TF_STATUS_OK = 0,
  TF_STATUS_NULL_POINTER = 1,
  TF_STATUS_INVALID_ARGUMENT = 2,
  TF_STATUS_IO = 3,
  TF_STATUS_PARSE = 4,
  TF_STATUS_CALIBRATION_MISSING = 5,
  TF_STATUS_BUFFER_TOO_SMALL = 6,
  TF_STATUS_PANIC = 7,
} TfStatus;

typedef enum TfConstrictionClass {
  TF_CONSTRICTION_CLASS_OPEN = 0,
  TF_CONSTRICTION_CLASS_FRICATIVE = 1,
  TF_CONSTRICTION_CLASS_OCCLUDED = 2,
} TfConstrictionClass;

// Opaque engine handle.
typedef struct TfEngine TfEngine;

// One control update. Out-of-range values are clamped; NaN takes the neutral value.
typedef struct TfControl {
  // Jaw opening in [0, 1].
  double r;
  // Tongue advancement in [-1, 1].
  double theta;
  // Thumb, index, middle, ring, pinky in [0, 1].
  double fingers[5];
  // Fundamental frequency in Hz.
  double f0;
  // 0 = breathy, 1 = pressed.
  double tenseness;
  // Nonzero to voice.
  uint8_t voiced;
} TfControl;

typedef struct TfConstriction {
  size_t index;
  // Minimum cross-sectional area in cm^2.
  double area;
  enum TfConstrictionClass kind;
} TfConstriction;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, e.g. "0.1.0". Static; do not free.
const char *tf_version(void);

// Message of the last failed call on this thread, or "" after a success.
// Valid until the next call on this thread; do not free.
const char *tf_last_error_message(void);

// Creates an engine at 48000 or 44100 Hz with the given noise seed.
//
// # Safety
// `out` must be a valid pointer to write the handle to.
enum TfStatus tf_engine_new(uint32_t sample_rate, uint64_t seed, struct TfEngine **out);

// Frees an engine. Null is a no-op.
//
// # Safety
// `engine` must come from `tf_engine_new` and not be used afterwards.
void tf_engine_free(struct TfEngine *engine);

// Samples per block; `tf_engine_render` lengths must be a multiple of it.
//
// # Safety
// `engine` must be null or a live handle.
size_t tf_engine_block_size(const struct TfEngine *engine);

// Number of tract sections, i.e. the length `tf_engine_area_function` fills.
//
// # Safety
// `engine` must be null or a live handle.
size_t tf_engine_sections(const struct TfEngine *engine);

// Posts a control update; the latest one wins at the next block boundary.
//
// # Safety
// Both pointers must be valid.
enum TfStatus tf_engine_push_control(struct TfEngine *engine, const struct TfControl *control);

// Renders `len` samples into `out`; `len` must be a multiple of the block size.
//
// # Safety
// `out` must be valid for `len` writes.
enum TfStatus tf_engine_render(struct TfEngine *engine, float *out, size_t len);

// Copies the current area function (cm^2, glottis first) into `out`.
// `written` receives the section count even when `cap` is too small.
//
// # Safety
// `out` must be valid for `cap` writes; `written` may be null.
enum TfStatus tf_engine_area_function(const struct TfEngine *engine,
                                      double *out,
                                      size_t cap,
                                      size_t *written);

// Location, area and class of the narrowest section.
//
// # Safety
// Both pointers must be valid.
enum TfStatus tf_engine_constriction(const struct TfEngine *engine, struct TfConstriction *out);

// Renders a gesture CSV to a 16-bit WAV with the default channel layout and voice.
// `calibration` is the JSON written by `tract-forge calibrate`.
//
// # Safety
// Paths must be nul-terminated UTF-8 strings.
enum TfStatus tf_render_gesture_file(const char *gesture,
                                     const char *calibration,
                                     const char *wav_out,
                                     uint32_t sample_rate,
                                     uint64_t seed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRACT_FORGE_H */
