#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>

#include "avc/barrier.hpp"
#include "avc/controllers.hpp"
#include "avc/environment.hpp"

namespace avc {

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Everything `avc run` and the C binding need to build environments.
/// Relative paths are resolved against `base_dir`.
struct RunConfig {
    std::filesystem::path base_dir = ".";
    std::filesystem::path case_path;
    std::filesystem::path profiles_dir;
    std::filesystem::path out_dir = "results";

    ControllerConfig controller;
    BarrierShape barrier = BarrierShape::L1;
    double alpha = 0.1;

    int episodes = 10;
    std::uint64_t seed = 0;
    int threads = 0;  // 0: hardware concurrency

    int episode_length = 240;
    int day_buffer = 480;
    double obs_noise_sigma = 0.0;
    double profile_noise_sigma = 0.01;
    double gamma = 0.99;
    bool random_offset = true;
    bool check_branch_ratings = false;
    std::optional<double> penetration_ratio;
    std::optional<std::uint64_t> power_factor_seed;
};

/// Reads a JSON document whose keys mirror the CLI flags. Unknown keys are
/// rejected. Throws ConfigError.
RunConfig parse_run_config(std::string_view document, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

std::filesystem::path resolve(const RunConfig& config, const std::filesystem::path& p);

/// Loads the case and profile bundle and assembles an environment config.
EnvConfig build_env_config(const RunConfig& config);

}  // namespace avc
