#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "avc/controllers.hpp"
#include "avc/environment.hpp"
#include "avc/metrics.hpp"

namespace avc {

struct EpisodeResult {
    EpisodeRecord record;
    MetricsReport metrics;
};

struct EvalResult {
    std::vector<EpisodeResult> episodes;  // in seed-list order
    MetricsSummary summary;
};

/// Per-episode seeds derived from one run seed.
std::vector<std::uint64_t> episode_seeds(std::uint64_t seed, int episodes);

/// Record header for the episode the environment was last reset into.
EpisodeMeta episode_meta(const Environment& env, const std::string& controller, int episode_index);
StepRecord step_record(const StepResult& result);

/// Runs one episode to termination and records every step.
EpisodeRecord run_episode(Environment& env, Policy& policy, std::uint64_t seed, int episode_index = 0);

/// Voltage limits used for metrics: the case's v_ref and the band of the
/// first controlled bus.
MetricsOptions metrics_options(const NetworkCase& network);

/// Episodes fan out over `threads` workers (0: hardware concurrency). Each
/// worker owns its environment and policy; results are stored by index so
/// the output does not depend on scheduling.
EvalResult run_eval(const EnvConfig& config, const ControllerConfig& controller, const std::vector<std::uint64_t>& seeds,
                    int threads = 0);

/// Writes episode_NNNN.jsonl, metrics.csv and summary.json into `dir`.
void write_outputs(const EvalResult& result, const std::filesystem::path& dir);

/// Per-episode CSV with a header row.
std::string metrics_csv(const std::vector<EpisodeRecord>& records, const std::vector<MetricsReport>& reports);
std::string summary_json(const MetricsSummary& summary, const std::string& case_name, const std::string& controller,
                         const std::string& barrier);
std::string summary_table(const MetricsSummary& summary);

}  // namespace avc
