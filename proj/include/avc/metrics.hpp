#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "avc/network.hpp"

namespace avc {

struct StepRecord {
    int t = 0;
    std::vector<double> v;        // controlled buses, per-unit
    std::vector<double> q_pv;     // MVAr per agent slot
    std::vector<double> actions;  // clamped ratios
    double reward = 0.0;
    double total_loss = 0.0;      // MW
    bool safety = false;
};

struct EpisodeMeta {
    std::string case_name;
    std::string controller;
    std::string barrier;
    std::uint64_t seed = 0;
    int episode = 0;
    std::size_t day = 0;
    std::size_t offset = 0;
    std::size_t start_index = 0;
    int episode_length = 0;
    std::vector<BusIndex> buses;  // labels of the controlled buses, matching StepRecord::v
};

struct EpisodeRecord {
    EpisodeMeta meta;
    std::vector<StepRecord> steps;
};

struct MetricsOptions {
    double v_min = 0.95;
    double v_max = 1.05;
    double v_ref = 1.0;
};

struct MetricsReport {
    double cr = 0.0;
    double pl_mean = 0.0;
    double pl_std = 0.0;
    double vr = 0.0;
    double ql_mean = 0.0;
    double pct_out = 0.0;
    double pct_below = 0.0;
    double pct_above = 0.0;
    double v_dev_mean = 0.0;
    double max_drop_dev = 0.0;
    double max_rise_dev = 0.0;
};

/// All metric functions throw std::invalid_argument on an empty record.
double metric_cr(const EpisodeRecord& record, const MetricsOptions& options = {});
/// Mean and population standard deviation of the per-step loss.
std::pair<double, double> metric_pl(const EpisodeRecord& record);
double metric_vr(const EpisodeRecord& record, const MetricsOptions& options = {});
double metric_ql(const EpisodeRecord& record);
MetricsReport metric_extended(const EpisodeRecord& record, const MetricsOptions& options = {});

/// Ordered (name, value) view used for tables and CSV columns.
std::vector<std::pair<std::string, double>> metric_fields(const MetricsReport& report);

struct MetricsSummary {
    std::size_t episodes = 0;
    MetricsReport mean;
    MetricsReport std;  // population, across episodes
};

MetricsSummary summarize(const std::vector<MetricsReport>& reports);

}  // namespace avc
