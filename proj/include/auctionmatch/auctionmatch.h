/* C interface to the auction-mechanism learning library. All entry points
 * return am_status; on failure am_last_error() describes what went wrong
 * (per thread). Handles are opaque and freed with their matching *_free. */
#ifndef AUCTIONMATCH_H
#define AUCTIONMATCH_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#ifndef AM_API
#if defined(_WIN32)
#ifdef AM_BUILD
#define AM_API __declspec(dllexport)
#else
#define AM_API __declspec(dllimport)
#endif
#else
#define AM_API __attribute__((visibility("default")))
#endif
#endif

typedef enum am_status {
  AM_OK = 0,
  AM_ERR_CONFIG = 2,     /* bad key, value, file format, or checkpoint contract */
  AM_ERR_INFEASIBLE = 3, /* demand specification cannot be satisfied */
  AM_ERR_NUMERIC = 4,    /* non-finite values or failed convergence */
  AM_ERR_IO = 5,         /* filesystem trouble */
  AM_ERR_INVALID = 6     /* null argument, bad shape, or internal misuse */
} am_status;

typedef struct am_config am_config;       /* experiment configuration */
typedef struct am_mechanism am_mechanism; /* config + network weights + multipliers */

AM_API const char* am_version(void);
/* Message for the most recent failure on this thread; never NULL. */
AM_API const char* am_last_error(void);

AM_API am_status am_config_create(am_config** out); /* defaults */
AM_API am_status am_config_load(const char* path, am_config** out);
AM_API am_status am_config_set(am_config* cfg, const char* key, const char* value);
/* Copies the value of one key as text; fails if buf is too small. */
AM_API am_status am_config_get(const am_config* cfg, const char* key, char* buf,
                               size_t buflen);
AM_API void am_config_free(am_config* cfg);

/* Fresh mechanism with seed-derived initial weights. */
AM_API am_status am_mechanism_create(const am_config* cfg, am_mechanism** out);
AM_API am_status am_mechanism_load(const char* path, am_mechanism** out);
AM_API am_status am_mechanism_save(const am_mechanism* mech, const char* path);
/* Adjusts the embedded config of a loaded mechanism (eval knobs, threads...).
 * Keys that would change the network or auction shape are rejected. */
AM_API am_status am_mechanism_set(am_mechanism* mech, const char* key, const char* value);
AM_API void am_mechanism_free(am_mechanism* mech);

/* Full training run per the embedded config. Streams one CSV row per epoch
 * into metrics_csv_path and atomically rewrites checkpoint_path after every
 * epoch; either may be NULL to skip. */
AM_API am_status am_train(am_mechanism* mech, const char* metrics_csv_path,
                          const char* checkpoint_path);

/* Heap strings below are released with am_string_free. */
AM_API am_status am_evaluate(const am_mechanism* mech, char** json_out);
AM_API am_status am_baseline(const am_config* cfg, char** json_out);
/* Single-bidder two-item value grid as CSV. resolution = 0 takes
 * heatmap.resolution from the config; eps <= 0 takes heatmap.eps (and a zero
 * there keeps the trained temperature schedule). */
AM_API am_status am_heatmap(const am_mechanism* mech, size_t resolution, double eps,
                            char** csv_out);
AM_API void am_string_free(char* s);

/* One profile through the mechanism: bids is agents*items row-major,
 * alloc_out receives agents*items entries, pay_out receives agents. */
AM_API am_status am_mechanism_run(const am_mechanism* mech, const double* bids,
                                  double* alloc_out, double* pay_out);

#ifdef __cplusplus
}
#endif

#endif
