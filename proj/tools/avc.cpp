// avc: batch front end for the voltage-control simulator.
//
//   avc pf     --case F --injections F [--diagnostics]
//   avc run    [--config F] --case F --profiles DIR --controller C --barrier B
//              --episodes N --seed S --out DIR
//   avc report --records DIR [--format csv|table]
//
// Exit status: 0 success, 1 invalid input, 2 runtime failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "avc/harness.hpp"
#include "avc/power_flow.hpp"
#include "avc/records.hpp"
#include "avc/run_config.hpp"

namespace {

constexpr int kInvalid = 1;
constexpr int kRuntime = 2;

struct InvalidInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// {"injections": [{"bus": 3, "p_load": .., "q_load": .., "p_pv": .., "q_pv": ..}, ...]}
avc::InjectionSet parse_injections(const avc::NetworkCase& net, const std::string& text) {
    avc::InjectionSet inj = avc::InjectionSet::zeros(net.bus_count());
    try {
        const auto j = nlohmann::json::parse(text);
        for (const auto& e : j.at("injections")) {
            const auto bus = e.at("bus").get<avc::BusIndex>();
            if (!net.has_bus(bus)) throw InvalidInput("injections: unknown bus " + std::to_string(bus));
            const std::size_t pos = net.position(bus);
            inj.p_load[pos] += e.value("p_load", 0.0);
            inj.q_load[pos] += e.value("q_load", 0.0);
            inj.p_pv[pos] += e.value("p_pv", 0.0);
            inj.q_pv[pos] += e.value("q_pv", 0.0);
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("injections: ") + e.what());
    }
    return inj;
}

int cmd_pf(const std::string& case_path, const std::string& injections_path, bool diagnostics) {
    const avc::NetworkCase net = avc::load_case(case_path);
    const avc::GridState g = avc::solve_power_flow(net, parse_injections(net, slurp(injections_path)));
    if (diagnostics) {
        std::cout << avc::dump_diagnostics(net, g) << '\n';
    } else {
        nlohmann::ordered_json out;
        out["converged"] = g.converged;
        out["iterations"] = g.iterations;
        out["max_mismatch_pu"] = g.max_mismatch;
        out["slack_p_mw"] = g.slack_p;
        out["slack_q_mvar"] = g.slack_q;
        out["total_loss_mw"] = g.total_loss;
        for (std::size_t i = 0; i < net.bus_count(); ++i) {
            out["buses"].push_back({{"bus", net.buses()[i].index}, {"v_pu", g.v[i]}, {"theta_rad", g.theta[i]}});
        }
        std::cout << out.dump(2) << '\n';
    }
    if (!g.converged) {
        spdlog::error("power flow did not converge after {} iterations", g.iterations);
        return kRuntime;
    }
    return 0;
}

int cmd_run(const avc::RunConfig& config) {
    const avc::EnvConfig env = avc::build_env_config(config);
    const auto seeds = avc::episode_seeds(config.seed, config.episodes);
    const avc::EvalResult result = avc::run_eval(env, config.controller, seeds, config.threads);
    const auto out_dir = avc::resolve(config, config.out_dir);
    avc::write_outputs(result, out_dir);
    std::cout << avc::summary_table(result.summary);
    std::cout << "records written to " << out_dir.string() << '\n';
    return 0;
}

int cmd_report(const std::string& dir, const std::string& format, double v_ref, double v_min, double v_max) {
    const auto records = avc::load_records(dir);
    if (records.empty()) throw InvalidInput("no *.jsonl records in " + dir);
    avc::MetricsOptions opts{v_min, v_max, v_ref};
    std::vector<avc::MetricsReport> reports;
    for (const auto& r : records) reports.push_back(avc::metric_extended(r, opts));
    if (format == "csv") {
        std::cout << avc::metrics_csv(records, reports);
    } else {
        std::cout << avc::summary_table(avc::summarize(reports));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    auto logger = spdlog::stderr_color_mt("avc");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::warn);

    CLI::App app{"Active voltage control simulator"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "Debug logging");

    auto* pf = app.add_subcommand("pf", "Solve one power flow");
    std::string pf_case, pf_inj;
    bool pf_diag = false;
    pf->add_option("--case", pf_case, "Case file")->required();
    pf->add_option("--injections", pf_inj, "Injection file")->required();
    pf->add_flag("--diagnostics", pf_diag, "Dump the iteration history");

    auto* run = app.add_subcommand("run", "Evaluate a controller over episodes");
    std::string config_path, case_path, profiles, controller, barrier, out;
    int episodes = 0, threads = 0, episode_length = 0;
    std::uint64_t seed = 0;
    double alpha = 0, obs_noise = 0, profile_noise = 0, penetration = 0;
    run->add_option("--config", config_path, "JSON config; flags override its values");
    auto* o_case = run->add_option("--case", case_path, "Case file");
    auto* o_prof = run->add_option("--profiles", profiles, "Profile bundle directory");
    auto* o_ctrl = run->add_option("--controller", controller, "none, droop, opf or random")
                       ->check(CLI::IsMember({"none", "droop", "opf", "random"}));
    auto* o_bar = run->add_option("--barrier", barrier, "l1, l2 or bowl")->check(CLI::IsMember({"l1", "l2", "bowl"}));
    auto* o_eps = run->add_option("--episodes", episodes, "Episode count")->check(CLI::PositiveNumber);
    auto* o_seed = run->add_option("--seed", seed, "Run seed");
    auto* o_out = run->add_option("--out", out, "Output directory");
    auto* o_thr = run->add_option("--threads", threads, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
    auto* o_alpha = run->add_option("--alpha", alpha, "Weight of the reactive-power term");
    auto* o_len = run->add_option("--episode-length", episode_length, "Steps per episode")->check(CLI::PositiveNumber);
    auto* o_obs = run->add_option("--obs-noise", obs_noise, "Observation noise std")->check(CLI::NonNegativeNumber);
    auto* o_pn = run->add_option("--profile-noise", profile_noise, "Relative profile noise std")->check(CLI::NonNegativeNumber);
    auto* o_pr = run->add_option("--penetration", penetration, "Override the bundle penetration ratio")->check(CLI::PositiveNumber);

    auto* report = app.add_subcommand("report", "Recompute metrics from record files");
    std::string records_dir, format = "table";
    double v_ref = 1.0, v_min = 0.95, v_max = 1.05;
    report->add_option("--records", records_dir, "Directory of episode records")->required();
    report->add_option("--format", format, "csv or table")->check(CLI::IsMember({"csv", "table"}));
    report->add_option("--v-ref", v_ref, "Reference voltage");
    report->add_option("--v-min", v_min, "Lower voltage limit");
    report->add_option("--v-max", v_max, "Upper voltage limit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kInvalid;
    }
    if (verbose) spdlog::set_level(spdlog::level::debug);

    try {
        if (*pf) return cmd_pf(pf_case, pf_inj, pf_diag);
        if (*report) return cmd_report(records_dir, format, v_ref, v_min, v_max);

        avc::RunConfig cfg;
        if (!config_path.empty()) cfg = avc::load_run_config(config_path);
        if (*o_case) cfg.case_path = std::filesystem::absolute(case_path);
        if (*o_prof) cfg.profiles_dir = std::filesystem::absolute(profiles);
        if (*o_out) cfg.out_dir = std::filesystem::absolute(out);
        if (*o_ctrl) cfg.controller.name = controller;
        if (*o_bar) cfg.barrier = *avc::parse_barrier(barrier);
        if (*o_eps) cfg.episodes = episodes;
        if (*o_seed) cfg.seed = seed;
        if (*o_thr) cfg.threads = threads;
        if (*o_alpha) cfg.alpha = alpha;
        if (*o_len) cfg.episode_length = episode_length;
        if (*o_obs) cfg.obs_noise_sigma = obs_noise;
        if (*o_pn) cfg.profile_noise_sigma = profile_noise;
        if (*o_pr) cfg.penetration_ratio = penetration;
        return cmd_run(cfg);
    } catch (const InvalidInput& e) {
        spdlog::error("{}", e.what());
        return kInvalid;
    } catch (const avc::ParseError& e) {
        spdlog::error("{}", e.what());
        return kInvalid;
    } catch (const avc::ValidationError& e) {
        spdlog::error("{}", e.what());
        return kInvalid;
    } catch (const avc::ConfigError& e) {
        spdlog::error("{}", e.what());
        return kInvalid;
    } catch (const avc::ProfileError& e) {
        spdlog::error("{}", e.what());
        return kInvalid;
    } catch (const avc::RecordError& e) {
        spdlog::error("{}", e.what());
        return kInvalid;
    } catch (const std::invalid_argument& e) {
        spdlog::error("{}", e.what());
        return kInvalid;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kRuntime;
    }
}
