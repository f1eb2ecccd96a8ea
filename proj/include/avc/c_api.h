#ifndef AVC_C_API_H
#define AVC_C_API_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes shared by every call. */
#define AVC_OK 0
#define AVC_ERR_INVALID 1 /* bad argument, config or state (e.g. terminated episode) */
#define AVC_ERR_RUNTIME 2

typedef struct avc_env avc_env;

typedef struct {
    size_t n_agents;
    size_t obs_total; /* length of the concatenated observation vector */
    size_t action_dim;
    double action_low;
    double action_high;
    int episode_length;
    int layout_version;
} avc_space;

typedef struct {
    int t;
    int safety_violation;
    int in_control;
    double total_loss;    /* MW */
    double reactive_loss; /* MVAr */
} avc_step_info;

/* Builds an environment from a JSON run config (same keys as `avc run`).
   Returns NULL on failure; see avc_last_error. */
avc_env* avc_env_make(const char* config_path);

/* Message of the last failed call on this thread. */
const char* avc_last_error(void);

int avc_env_space(const avc_env* env, avc_space* out);

/* Per-agent observation lengths, `n` must equal n_agents. */
int avc_env_obs_lengths(const avc_env* env, size_t* lengths, size_t n);

/* Observation buffers must hold obs_total doubles. Agent k's block starts at
   the sum of the lengths of agents 0..k-1; each block lists its region buses
   as [p_load, q_load, v, theta] then its region PVs as [p_pv, q_pv]. */
int avc_env_reset(avc_env* env, uint64_t seed, double* obs, size_t obs_len);

int avc_env_step(avc_env* env, const double* actions, size_t n_actions, double* obs, size_t obs_len, double* reward,
                 int* terminated, avc_step_info* info);

/* Writes the current episode trajectory as line-delimited JSON. */
int avc_env_export_record(const avc_env* env, const char* path);

void avc_env_close(avc_env* env);

#ifdef __cplusplus
}
#endif

#endif
