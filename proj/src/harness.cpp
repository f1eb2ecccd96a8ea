#include "avc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "avc/records.hpp"

namespace avc {

namespace {

std::string number(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

}  // namespace

std::vector<std::uint64_t> episode_seeds(std::uint64_t seed, int episodes) {
    std::mt19937_64 rng(seed);
    std::vector<std::uint64_t> out(static_cast<std::size_t>(std::max(episodes, 0)));
    for (auto& s : out) s = rng();
    return out;
}

EpisodeMeta episode_meta(const Environment& env, const std::string& controller, int episode_index) {
    const NetworkCase& net = env.network();
    const EnvState& s = env.state();
    EpisodeMeta m;
    m.case_name = net.name();
    m.controller = controller;
    m.barrier = barrier_name(env.config().reward.barrier.shape);
    m.seed = s.seed;
    m.episode = episode_index;
    m.day = s.day;
    m.offset = s.offset;
    m.start_index = s.start_index;
    m.episode_length = env.config().episode_length;
    for (std::size_t i = 1; i < net.bus_count(); ++i) m.buses.push_back(net.buses()[i].index);
    return m;
}

StepRecord step_record(const StepResult& result) {
    StepRecord step;
    step.t = result.info.t;
    step.v.assign(result.info.grid.v.begin() + 1, result.info.grid.v.end());
    step.q_pv = result.info.q_pv;
    step.actions = result.info.actions;
    step.reward = result.reward;
    step.total_loss = result.info.total_loss;
    step.safety = result.info.safety_violation;
    return step;
}

EpisodeRecord run_episode(Environment& env, Policy& policy, std::uint64_t seed, int episode_index) {
    env.reset(seed);
    policy.reset(seed);
    EpisodeRecord rec;
    rec.meta = episode_meta(env, policy.name(), episode_index);
    while (!env.terminated()) rec.steps.push_back(step_record(env.step(policy.act(env))));
    return rec;
}

MetricsOptions metrics_options(const NetworkCase& network) {
    MetricsOptions o;
    o.v_ref = network.v_ref();
    if (network.bus_count() > 1) {
        o.v_min = network.buses()[1].v_min;
        o.v_max = network.buses()[1].v_max;
    }
    return o;
}

EvalResult run_eval(const EnvConfig& config, const ControllerConfig& controller, const std::vector<std::uint64_t>& seeds,
                    int threads) {
    validate(config);
    make_policy(controller);  // fail fast on an unknown controller name
    const std::size_t n = seeds.size();
    EvalResult result;
    result.episodes.resize(n);
    std::vector<std::exception_ptr> errors(n);
    const MetricsOptions mopts = metrics_options(*config.network);

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        Environment env(config);
        auto policy = make_policy(controller);
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                EpisodeResult& out = result.episodes[i];
                out.record = run_episode(env, *policy, seeds[i], static_cast<int>(i));
                out.metrics = metric_extended(out.record, mopts);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };

    std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads) : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, std::max<std::size_t>(n, 1));
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    std::vector<MetricsReport> reports;
    for (const auto& ep : result.episodes) reports.push_back(ep.metrics);
    result.summary = summarize(reports);
    spdlog::debug("evaluated {} episodes with {} workers", n, workers);
    return result;
}

std::string metrics_csv(const std::vector<EpisodeRecord>& records, const std::vector<MetricsReport>& reports) {
    std::ostringstream out;
    out << "episode,seed,day,offset,steps";
    for (const auto& [name, value] : metric_fields(MetricsReport{})) out << ',' << name;
    out << '\n';
    for (std::size_t i = 0; i < records.size(); ++i) {
        const EpisodeMeta& m = records[i].meta;
        out << m.episode << ',' << m.seed << ',' << m.day << ',' << m.offset << ',' << records[i].steps.size();
        for (const auto& [name, value] : metric_fields(reports[i])) out << ',' << number(value);
        out << '\n';
    }
    return out.str();
}

std::string summary_json(const MetricsSummary& summary, const std::string& case_name, const std::string& controller,
                         const std::string& barrier) {
    nlohmann::ordered_json j;
    j["case"] = case_name;
    j["controller"] = controller;
    j["barrier"] = barrier;
    j["episodes"] = summary.episodes;
    const auto means = metric_fields(summary.mean);
    const auto stds = metric_fields(summary.std);
    for (std::size_t f = 0; f < means.size(); ++f) {
        j["metrics"][means[f].first] = {{"mean", means[f].second}, {"std", stds[f].second}};
    }
    return j.dump(2) + "\n";
}

std::string summary_table(const MetricsSummary& summary) {
    std::ostringstream out;
    char line[96];
    std::snprintf(line, sizeof line, "%-14s %14s %14s\n", "metric", "mean", "std");
    out << line;
    const auto means = metric_fields(summary.mean);
    const auto stds = metric_fields(summary.std);
    for (std::size_t f = 0; f < means.size(); ++f) {
        std::snprintf(line, sizeof line, "%-14s %14.6g %14.6g\n", means[f].first.c_str(), means[f].second, stds[f].second);
        out << line;
    }
    out << "episodes: " << summary.episodes << '\n';
    return out.str();
}

void write_outputs(const EvalResult& result, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<EpisodeRecord> records;
    std::vector<MetricsReport> reports;
    for (const auto& ep : result.episodes) {
        char name[32];
        std::snprintf(name, sizeof name, "episode_%04d.jsonl", ep.record.meta.episode);
        save_record(dir / name, ep.record);
        records.push_back(ep.record);
        reports.push_back(ep.metrics);
    }
    write_text(dir / "metrics.csv", metrics_csv(records, reports));
    std::string case_name, controller, barrier;
    if (!records.empty()) {
        case_name = records.front().meta.case_name;
        controller = records.front().meta.controller;
        barrier = records.front().meta.barrier;
    }
    write_text(dir / "summary.json", summary_json(result.summary, case_name, controller, barrier));
}

}  // namespace avc
