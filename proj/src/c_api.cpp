#include "avc/c_api.h"

#include <algorithm>
#include <exception>
#include <stdexcept>
#include <string>

#include "avc/environment.hpp"
#include "avc/harness.hpp"
#include "avc/records.hpp"
#include "avc/run_config.hpp"

struct avc_env {
    explicit avc_env(avc::EnvConfig config) : env(std::move(config)) {}
    avc::Environment env;
    avc::EpisodeRecord record;
};

namespace {

thread_local std::string last_error;

int fail(int code, const std::string& message) {
    last_error = message;
    return code;
}

template <typename F>
int guarded(F&& body) {
    try {
        body();
        return AVC_OK;
    } catch (const std::invalid_argument& e) {
        return fail(AVC_ERR_INVALID, e.what());
    } catch (const std::logic_error& e) {
        return fail(AVC_ERR_INVALID, e.what());
    } catch (const avc::ConfigError& e) {
        return fail(AVC_ERR_INVALID, e.what());
    } catch (const avc::ParseError& e) {
        return fail(AVC_ERR_INVALID, e.what());
    } catch (const avc::ValidationError& e) {
        return fail(AVC_ERR_INVALID, e.what());
    } catch (const std::exception& e) {
        return fail(AVC_ERR_RUNTIME, e.what());
    } catch (...) {
        return fail(AVC_ERR_RUNTIME, "unknown error");
    }
}

void copy_obs(const avc::Environment& env, const std::vector<avc::Observation>& obs, double* out, std::size_t len) {
    const auto flat = env.flatten(obs);
    if (!out || len != flat.size()) {
        throw std::invalid_argument("observation buffer must hold " + std::to_string(flat.size()) + " values");
    }
    std::copy(flat.begin(), flat.end(), out);
}

}  // namespace

extern "C" {

avc_env* avc_env_make(const char* config_path) {
    avc_env* handle = nullptr;
    const int rc = guarded([&] {
        if (!config_path) throw std::invalid_argument("config path is null");
        handle = new avc_env(avc::build_env_config(avc::load_run_config(config_path)));
    });
    return rc == AVC_OK ? handle : nullptr;
}

const char* avc_last_error(void) { return last_error.c_str(); }

int avc_env_space(const avc_env* env, avc_space* out) {
    return guarded([&] {
        if (!env || !out) throw std::invalid_argument("null argument");
        const avc::SpaceDescriptor d = env->env.space();
        *out = {d.n_agents, d.obs_total, d.action_dim, d.action_low, d.action_high, d.episode_length, d.layout_version};
    });
}

int avc_env_obs_lengths(const avc_env* env, size_t* lengths, size_t n) {
    return guarded([&] {
        if (!env || !lengths) throw std::invalid_argument("null argument");
        const avc::SpaceDescriptor d = env->env.space();
        if (n != d.n_agents) throw std::invalid_argument("expected " + std::to_string(d.n_agents) + " entries");
        std::copy(d.obs_lengths.begin(), d.obs_lengths.end(), lengths);
    });
}

int avc_env_reset(avc_env* env, uint64_t seed, double* obs, size_t obs_len) {
    return guarded([&] {
        if (!env) throw std::invalid_argument("null environment");
        if (!obs || obs_len != env->env.space().obs_total) throw std::invalid_argument("observation buffer has the wrong size");
        const auto o = env->env.reset(seed);
        copy_obs(env->env, o, obs, obs_len);
        env->record = {};
        env->record.meta = avc::episode_meta(env->env, "external", 0);
    });
}

int avc_env_step(avc_env* env, const double* actions, size_t n_actions, double* obs, size_t obs_len, double* reward,
                 int* terminated, avc_step_info* info) {
    return guarded([&] {
        if (!env || !actions || !reward || !terminated) throw std::invalid_argument("null argument");
        if (!obs || obs_len != env->env.space().obs_total) throw std::invalid_argument("observation buffer has the wrong size");
        const avc::StepResult r = env->env.step(std::vector<double>(actions, actions + n_actions));
        copy_obs(env->env, r.observations, obs, obs_len);
        *reward = r.reward;
        *terminated = r.terminated ? 1 : 0;
        if (info) {
            *info = {r.info.t, r.info.safety_violation ? 1 : 0, r.info.in_control ? 1 : 0, r.info.total_loss,
                     r.info.reactive_loss};
        }
        env->record.steps.push_back(avc::step_record(r));
    });
}

int avc_env_export_record(const avc_env* env, const char* path) {
    return guarded([&] {
        if (!env || !path) throw std::invalid_argument("null argument");
        avc::save_record(path, env->record);
    });
}

void avc_env_close(avc_env* env) { delete env; }

}  // extern "C"
