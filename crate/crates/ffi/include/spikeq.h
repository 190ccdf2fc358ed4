#ifndef SPIKEQ_H
#define SPIKEQ_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum SpikeqStatus {
  SPIKEQ_STATUS_OK = 0,
  SPIKEQ_STATUS_NULL_POINTER = 1,
  SPIKEQ_STATUS_INVALID_ARGUMENT = 2,
  SPIKEQ_STATUS_SHAPE = 3,
  SPIKEQ_STATUS_CONFIG = 4,
  SPIKEQ_STATUS_MAP_INFEASIBLE = 5,
  SPIKEQ_STATUS_DIVERGENCE = 6,
  SPIKEQ_STATUS_MISSING_CHECKPOINT = 7,
  SPIKEQ_STATUS_IO = 8,
  SPIKEQ_STATUS_CORRUPT_CHECKPOINT = 9,
  SPIKEQ_STATUS_SINGULAR = 10,
  SPIKEQ_STATUS_INTERNAL = 11,
} SpikeqStatus;

// Resolved experiment configuration.
typedef struct SpikeqConfig SpikeqConfig;

// A receiver bound to the configuration it was loaded with.
typedef struct SpikeqEqualizer SpikeqEqualizer;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, a static NUL-terminated string.
const char *spikeq_version(void);

// Message of the most recent failed call on this thread, or NULL. The
// pointer stays valid until the next failing call on this thread.
const char *spikeq_last_error(void);

// Releases a string returned by this library.
//
// # Safety
// `s` must be NULL or a string returned by this library, freed once.
void spikeq_string_free(char *s);

// Preset configuration for `name` (`proakis-a|b|c`, or `identity`).
//
// # Safety
// `name` must be a NUL-terminated string; `out` must be writable.
enum SpikeqStatus spikeq_config_preset(const char *name, struct SpikeqConfig **out);

// Configuration from a TOML document overlaid on its preset.
//
// # Safety
// `toml` must be a NUL-terminated string; `out` must be writable.
enum SpikeqStatus spikeq_config_from_toml(const char *toml, struct SpikeqConfig **out);

// Resolved configuration as TOML; free with `spikeq_string_free`.
//
// # Safety
// `cfg` must be a live configuration handle; `out` must be writable.
enum SpikeqStatus spikeq_config_to_toml(const struct SpikeqConfig *cfg, char **out);

// Hex SHA-256 of the resolved configuration; free with `spikeq_string_free`.
//
// # Safety
// `cfg` must be a live configuration handle; `out` must be writable.
enum SpikeqStatus spikeq_config_hash(const struct SpikeqConfig *cfg, char **out);

// # Safety
// `cfg` must be a live configuration handle.
enum SpikeqStatus spikeq_config_set_seed(struct SpikeqConfig *cfg, uint64_t seed);

// # Safety
// `cfg` must be a live configuration handle.
enum SpikeqStatus spikeq_config_set_epochs(struct SpikeqConfig *cfg, size_t epochs);

// Selects the equalizer by name (`snn_dfe`, `zf`, `map`, ...).
//
// # Safety
// `cfg` must be a live configuration handle, `name` a NUL-terminated string.
enum SpikeqStatus spikeq_config_set_equalizer(struct SpikeqConfig *cfg, const char *name);

// Replaces the sweep grid.
//
// # Safety
// `cfg` must be a live configuration handle; `ebn0_db` must point to `len`
// doubles.
enum SpikeqStatus spikeq_config_set_sweep_grid(struct SpikeqConfig *cfg,
                                               const double *ebn0_db,
                                               size_t len);

// # Safety
// `cfg` must be NULL or a configuration handle, freed once.
void spikeq_config_free(struct SpikeqConfig *cfg);

// Simulates `n_symbols` symbols over the configured channel at `ebn0_db`.
// Writes the transmitted indices to `tx_indices[n_symbols]` and the received
// samples to `rx_pairs[2 * n_symbols]`.
//
// # Safety
// `cfg` must be a live configuration handle; the output buffers must hold
// the stated number of elements.
enum SpikeqStatus spikeq_transmit(const struct SpikeqConfig *cfg,
                                  double ebn0_db,
                                  uint64_t seed,
                                  size_t n_symbols,
                                  uint32_t *tx_indices,
                                  double *rx_pairs);

// Ternary spike code of `y`: `m_bits` entries in `{-1, 0, 1}`, MSB first.
//
// # Safety
// `out` must hold `out_len >= m_bits` bytes.
enum SpikeqStatus spikeq_ternary_encode(double y,
                                        uint32_t m_bits,
                                        double y_max,
                                        int8_t *out,
                                        size_t out_len);

// Receiver for the configured equalizer. Neural equalizers need
// `checkpoint`; classical ones ignore it and may pass NULL.
//
// # Safety
// `cfg` must be a live configuration handle, `checkpoint` NULL or a
// NUL-terminated path, `out` writable.
enum SpikeqStatus spikeq_equalizer_load(const struct SpikeqConfig *cfg,
                                        const char *checkpoint,
                                        struct SpikeqEqualizer **out);

// Equalizes `n` received samples. `out_indices[k]` estimates the symbol sent
// at `k - *out_delay`; the first `*out_delay` entries are placeholders.
// Classical receivers are designed for the noise level of `ebn0_db`.
//
// # Safety
// `eq` must be a live equalizer handle, `rx_pairs` must hold `2 n`
// doubles, `out_indices` `n` entries; `out_delay` may be NULL.
enum SpikeqStatus spikeq_equalizer_run(const struct SpikeqEqualizer *eq,
                                       double ebn0_db,
                                       const double *rx_pairs,
                                       size_t n,
                                       uint32_t *out_indices,
                                       size_t *out_delay);

// # Safety
// `eq` must be NULL or an equalizer handle, freed once.
void spikeq_equalizer_free(struct SpikeqEqualizer *eq);

// Runs the `train` command into `out_dir`. `checkpoint` (may be NULL)
// overrides the checkpoint path; `final_loss` (may be NULL) receives the
// mean loss of the last 50 epochs.
//
// # Safety
// `cfg` must be a live configuration handle, the strings NUL-terminated.
enum SpikeqStatus spikeq_train(const struct SpikeqConfig *cfg,
                               const char *out_dir,
                               const char *checkpoint,
                               double *final_loss);

// Runs the `sweep` command into `out_dir`.
//
// # Safety
// `cfg` must be a live configuration handle, the strings NUL-terminated
// (`checkpoint` may be NULL).
enum SpikeqStatus spikeq_sweep(const struct SpikeqConfig *cfg,
                               const char *checkpoint,
                               const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPIKEQ_H */
