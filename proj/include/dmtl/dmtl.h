/* C interface to the dmtl library. */
#ifndef DMTL_DMTL_H
#define DMTL_DMTL_H

#include <stddef.h>

#if defined(_WIN32)
#define DMTL_API __declspec(dllexport)
#elif defined(__GNUC__)
#define DMTL_API __attribute__((visibility("default")))
#else
#define DMTL_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dmtl_status {
  DMTL_OK = 0,
  DMTL_INVALID_ARGUMENT = 1,
  DMTL_SHAPE = 2,
  DMTL_LOSS_FLOOR = 3,
  DMTL_CONFIG = 4,
  DMTL_IO = 5,
  DMTL_DIVERGENCE = 6,
  DMTL_CHECK_FAILED = 7,
  DMTL_INTERNAL = 8
} dmtl_status;

/* Message of the last failing call on this thread; "" after a success. */
DMTL_API const char* dmtl_last_error(void);
DMTL_API const char* dmtl_status_name(dmtl_status status);

/* Receives human-readable progress text. May be NULL to discard it. */
typedef void (*dmtl_sink)(const char* text, void* user);

/* ---- run configuration ---- */

typedef struct dmtl_config dmtl_config;

DMTL_API dmtl_status dmtl_config_create(dmtl_config** out);
DMTL_API void dmtl_config_destroy(dmtl_config* config);
DMTL_API dmtl_status dmtl_config_set(dmtl_config* config, const char* key, const char* value);
/* Copies the value with its terminator into buf when it fits. *needed (if
 * non-NULL) receives the required size including the terminator. */
DMTL_API dmtl_status dmtl_config_get(const dmtl_config* config, const char* key, char* buf,
                                     size_t buf_size, size_t* needed);
DMTL_API dmtl_status dmtl_config_load_file(dmtl_config* config, const char* path);
DMTL_API dmtl_status dmtl_config_validate(const dmtl_config* config);

/* ---- commands ---- */

DMTL_API dmtl_status dmtl_cmd_generate(const dmtl_config* config, const char* out_dir, int force,
                                       dmtl_sink sink, void* user);
DMTL_API dmtl_status dmtl_cmd_train(const dmtl_config* config, const char* out_dir, int force,
                                    dmtl_sink sink, void* user);
DMTL_API dmtl_status dmtl_cmd_sweep(const dmtl_config* config, const char* out_dir, int force,
                                    dmtl_sink sink, void* user);
DMTL_API dmtl_status dmtl_cmd_compare(const dmtl_config* config, const char* out_dir, int force,
                                      dmtl_sink sink, void* user);
/* Prints a pass/fail table. Returns DMTL_CHECK_FAILED if any check fails.
 * corrupt_gradient perturbs the analytic network gradient under test. */
DMTL_API dmtl_status dmtl_cmd_verify(const dmtl_config* config, int corrupt_gradient,
                                     dmtl_sink sink, void* user);

/* ---- dynamic weight unit ---- */

typedef struct dmtl_weight_unit dmtl_weight_unit;

typedef enum dmtl_gradient_mode {
  DMTL_GRADIENT_PAPER = 0,
  DMTL_GRADIENT_FULL = 1
} dmtl_gradient_mode;

/* Zero-initialized unit with `tasks` outputs over a `dim`-wide feature. */
DMTL_API dmtl_status dmtl_weight_unit_create(size_t tasks, size_t dim, int normalize_z,
                                             dmtl_gradient_mode mode, dmtl_weight_unit** out);
DMTL_API void dmtl_weight_unit_destroy(dmtl_weight_unit* unit);
/* psi is tasks x dim, row-major. */
DMTL_API dmtl_status dmtl_weight_unit_set_psi(dmtl_weight_unit* unit, const double* psi,
                                              size_t count);
DMTL_API dmtl_status dmtl_weight_unit_get_psi(const dmtl_weight_unit* unit, double* psi,
                                              size_t count);
DMTL_API dmtl_status dmtl_weight_unit_weights(const dmtl_weight_unit* unit, const double* z,
                                              size_t dim, double* w_out, size_t tasks);
/* One descent step on sum_i w_i / L_i with the losses held constant. */
DMTL_API dmtl_status dmtl_weight_unit_step(dmtl_weight_unit* unit, const double* z, size_t dim,
                                           const double* losses, size_t tasks, double eta);

#ifdef __cplusplus
}
#endif

#endif /* DMTL_DMTL_H */
