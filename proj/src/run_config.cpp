#include "avc/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace avc {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    for (const auto& item : j.items()) {
        if (!known.contains(item.key())) throw ConfigError(where + item.key() + ": unknown key");
    }
}

template <typename T>
void read(const json& j, const char* key, T& target, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        target = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + key + ": wrong type");
    }
}

template <typename T>
void read(const json& j, const char* key, std::optional<T>& target, const std::string& where) {
    if (!j.contains(key) || j.at(key).is_null()) return;
    T value{};
    read(j, key, value, where);
    target = value;
}

}  // namespace

RunConfig parse_run_config(std::string_view document, const std::filesystem::path& base_dir) {
    json j;
    try {
        j = json::parse(document);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    reject_unknown(j,
                   {"case", "profiles", "out", "controller", "barrier", "alpha", "episodes", "seed", "threads",
                    "episode_length", "day_buffer", "obs_noise_sigma", "profile_noise_sigma", "gamma", "random_offset",
                    "check_branch_ratings", "penetration_ratio", "power_factor_seed", "droop", "opf"},
                   "");

    RunConfig c;
    c.base_dir = base_dir;
    std::string path;
    if (j.contains("case")) { read(j, "case", path, ""); c.case_path = path; }
    if (j.contains("profiles")) { read(j, "profiles", path, ""); c.profiles_dir = path; }
    if (j.contains("out")) { read(j, "out", path, ""); c.out_dir = path; }
    read(j, "controller", c.controller.name, "");
    std::string barrier;
    read(j, "barrier", barrier, "");
    if (!barrier.empty()) {
        auto shape = parse_barrier(barrier);
        if (!shape) throw ConfigError("barrier: expected l1, l2 or bowl");
        c.barrier = *shape;
    }
    read(j, "alpha", c.alpha, "");
    read(j, "episodes", c.episodes, "");
    read(j, "seed", c.seed, "");
    read(j, "threads", c.threads, "");
    read(j, "episode_length", c.episode_length, "");
    read(j, "day_buffer", c.day_buffer, "");
    read(j, "obs_noise_sigma", c.obs_noise_sigma, "");
    read(j, "profile_noise_sigma", c.profile_noise_sigma, "");
    read(j, "gamma", c.gamma, "");
    read(j, "random_offset", c.random_offset, "");
    read(j, "check_branch_ratings", c.check_branch_ratings, "");
    read(j, "penetration_ratio", c.penetration_ratio, "");
    read(j, "power_factor_seed", c.power_factor_seed, "");

    if (j.contains("droop")) {
        const json& d = j.at("droop");
        if (!d.is_object()) throw ConfigError("droop: expected an object");
        reject_unknown(d, {"v_ref", "deadband", "slope", "fixed_point", "damping", "max_iterations", "smoothing"}, "droop.");
        DroopParams& p = c.controller.droop;
        read(d, "v_ref", p.v_ref, "droop.");
        read(d, "deadband", p.deadband, "droop.");
        read(d, "slope", p.slope, "droop.");
        read(d, "fixed_point", p.fixed_point, "droop.");
        read(d, "damping", p.damping, "droop.");
        read(d, "max_iterations", p.max_iterations, "droop.");
        read(d, "smoothing", p.smoothing, "droop.");
    }
    if (j.contains("opf")) {
        const json& o = j.at("opf");
        if (!o.is_object()) throw ConfigError("opf: expected an object");
        reject_unknown(o, {"penalty", "step_tolerance", "max_sweeps", "fd_step"}, "opf.");
        OpfOptions& p = c.controller.opf;
        read(o, "penalty", p.penalty, "opf.");
        read(o, "step_tolerance", p.step_tolerance, "opf.");
        read(o, "max_sweeps", p.max_sweeps, "opf.");
        read(o, "fd_step", p.fd_step, "opf.");
    }
    if (c.episodes <= 0) throw ConfigError("episodes: must be positive");
    if (c.threads < 0) throw ConfigError("threads: must be non-negative");
    if (c.controller.droop.deadband < 0) throw ConfigError("droop.deadband: must be non-negative");
    if (c.controller.droop.slope && !(*c.controller.droop.slope > 0)) throw ConfigError("droop.slope: must be positive");
    if (!(c.controller.droop.damping > 0 && c.controller.droop.damping <= 1)) throw ConfigError("droop.damping: must lie in (0, 1]");
    if (!(c.controller.droop.smoothing > 0 && c.controller.droop.smoothing <= 1)) throw ConfigError("droop.smoothing: must lie in (0, 1]");
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str(), path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

std::filesystem::path resolve(const RunConfig& config, const std::filesystem::path& p) {
    return p.is_absolute() ? p : config.base_dir / p;
}

EnvConfig build_env_config(const RunConfig& config) {
    if (config.case_path.empty()) throw ConfigError("case: no case file given");
    if (config.profiles_dir.empty()) throw ConfigError("profiles: no profile directory given");
    auto network = std::make_shared<const NetworkCase>(load_case(resolve(config, config.case_path)));
    BundleOptions bundle;
    bundle.penetration_ratio = config.penetration_ratio;
    bundle.power_factor_seed = config.power_factor_seed;
    auto store = std::make_shared<const ProfileStore>(load_bundle(resolve(config, config.profiles_dir), *network, bundle));

    EnvConfig env;
    env.network = network;
    env.store = store;
    env.reward.barrier.shape = config.barrier;
    env.reward.barrier.v_ref = network->v_ref();
    env.reward.alpha = config.alpha;
    env.episode_length = config.episode_length;
    env.day_buffer = config.day_buffer;
    env.obs_noise_sigma = config.obs_noise_sigma;
    env.profile_noise_sigma = config.profile_noise_sigma;
    env.gamma = config.gamma;
    env.random_offset = config.random_offset;
    env.check_branch_ratings = config.check_branch_ratings;
    env.seed = config.seed;
    validate(env);
    return env;
}

}  // namespace avc
