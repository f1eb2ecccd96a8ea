// Acceptance gate: one PASS/FAIL line per criterion.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <sys/wait.h>
#include <thread>
#include <vector>

#include "avc/controllers.hpp"
#include "avc/harness.hpp"
#include "avc/run_config.hpp"
#include "support.hpp"

using namespace avc;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(bool pass, const std::string& name, const std::string& detail) {
    std::printf("%s  %-28s %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

void skip(const std::string& name, const std::string& detail) {
    std::printf("SKIP  %-28s %s\n", name.c_str(), detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void power_flow_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    NetworkCase two = load_case(test::case_path("case2"));
    InjectionSet inj = InjectionSet::zeros(2);
    inj.p_load[1] = 0.1;
    inj.q_load[1] = 0.05;
    GridState g = solve_power_flow(two, inj);
    const double oracle_err = g.converged ? std::abs(g.v[1] - test::two_bus_fixed_point(0.1, 0.1, 0.1, 0.05)) : 1.0;

    NetworkCase net = load_case(test::case_path("case33"));
    std::mt19937_64 rng(1000);
    std::uniform_real_distribution<double> load(0.0, 0.25), ratio(0.0, 0.6), pv(0.0, 1.5), q(-0.6, 0.6);
    double worst = 0.0;
    int diverged = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        InjectionSet r = InjectionSet::zeros(net.bus_count());
        for (std::size_t i = 1; i < net.bus_count(); ++i) {
            r.p_load[i] = load(rng);
            r.q_load[i] = r.p_load[i] * ratio(rng);
        }
        for (const PvUnit& u : net.pv_units()) {
            r.p_pv[net.position(u.bus)] += pv(rng);
            r.q_pv[net.position(u.bus)] += q(rng);
        }
        GridState s = solve_power_flow(net, r);
        if (!s.converged) {
            ++diverged;
            continue;
        }
        for (double m : mismatch(net, s)) worst = std::max(worst, std::abs(m));
    }
    const double elapsed = seconds_since(t0);
    report(oracle_err <= 1e-6 && worst <= 1e-8 && diverged == 0 && elapsed < 10.0, "power-flow oracle",
           fmt("|v - oracle| = %.2e, max residual over 1000 sets = %.2e, diverged = %d, %.2f s", oracle_err, worst,
               diverged, elapsed));
}

void quadratic_accuracy() {
    NetworkCase base = load_case(test::case_path("case2"));
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> r_dist(0.01, 0.1), xr(0.5, 3.0), qp(0.0, 0.15), p(0.02, 0.2);
    const SolverOptions tight{1e-14, 60};
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const double r = r_dist(rng), x = r * xr(rng), pl = p(rng), ql = pl * qp(rng);
        NetworkCase net = NetworkCase::create(base.header(), base.buses(), {test::line(0, 1, r, x)}, base.pv_units(),
                                              base.loads(), base.regions());
        auto error = [&](double scale) {
            InjectionSet inj = InjectionSet::zeros(2);
            inj.p_load[1] = pl * scale;
            inj.q_load[1] = ql * scale;
            GridState g = solve_power_flow(net, inj, tight);
            if (!g.converged) return std::numeric_limits<double>::quiet_NaN();
            return std::abs((1.0 - g.v[1]) - two_bus::voltage_drop(r, x, pl * scale, ql * scale, 0, 0, g.v[1]));
        };
        const double ratio = error(1.0) / error(0.5);
        if (!(ratio == ratio)) {
            lo = -1;
            break;
        }
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
    }
    report(lo >= 3.5 && hi <= 4.5, "quadratic accuracy", fmt("error ratio over 100 instances in [%.4f, %.4f]", lo, hi));
}

void barrier_exactness() {
    const double pi = std::numbers::pi;
    double worst = 0.0;
    for (double v : {0.90, 0.95, 1.00, 1.05, 1.06, 1.10}) {
        const double d = v - 1.0;
        const double gauss = std::exp(-0.5 * (d / 0.1) * (d / 0.1)) / (0.1 * std::sqrt(2.0 * pi));
        const double expected[3] = {std::abs(d), d * d, std::abs(d) > 0.05 ? 2.0 * std::abs(d) - 0.095 : -0.01 * gauss + 0.04};
        const BarrierShape shapes[3] = {BarrierShape::L1, BarrierShape::L2, BarrierShape::Bowl};
        for (int s = 0; s < 3; ++s) {
            BarrierSpec spec;
            spec.shape = shapes[s];
            worst = std::max(worst, std::abs(barrier_value(spec, v) - expected[s]));
        }
    }
    BarrierSpec bowl;
    bowl.shape = BarrierShape::Bowl;
    const double h = 1e-7;
    auto slope = [&](double v) { return (barrier_value(bowl, v + h) - barrier_value(bowl, v - h)) / (2 * h); };
    const double outer = slope(1.06), inner = slope(1.001);
    report(worst <= 1e-12 && std::abs(outer - 2.0) <= 1e-6 && std::abs(inner) < 0.05, "barrier exactness",
           fmt("max value error %.2e, slope(0.06) = %.9f, slope(0.001) = %.6f", worst, outer, inner));
}

double independent_reward(const RewardSpec& spec, const std::vector<double>& v, const std::vector<double>& q) {
    double sum = 0.0;
    for (double vi : v) {
        const double d = vi - spec.barrier.v_ref;
        double l = 0.0;
        switch (spec.barrier.shape) {
            case BarrierShape::L1: l = std::abs(d); break;
            case BarrierShape::L2: l = d * d; break;
            case BarrierShape::Bowl: {
                const double z = (vi - spec.barrier.v_ref) / 0.1;
                const double gauss = std::exp(-0.5 * z * z) / (0.1 * std::sqrt(2.0 * std::numbers::pi));
                l = std::abs(d) > 0.05 ? 2.0 * std::abs(d) - 0.095 : -0.01 * gauss + 0.04;
                break;
            }
        }
        sum += l;
    }
    double lq = 0.0;
    for (double qi : q) lq += std::abs(qi);
    return -sum / static_cast<double>(v.size()) - spec.alpha * (lq / static_cast<double>(q.size()));
}

void reward_identity() {
    int mismatches = 0, positive = 0, safety = 0, steps = 0;
    for (BarrierShape shape : {BarrierShape::L1, BarrierShape::L2, BarrierShape::Bowl}) {
        EnvConfig cfg = test::bundled_env("case33");
        cfg.reward.barrier.shape = shape;
        Environment env(cfg);
        std::mt19937_64 rng(static_cast<std::uint64_t>(shape) + 40);
        std::uniform_real_distribution<double> a(-0.8, 0.8);
        env.reset(rng());
        const int quota = shape == BarrierShape::Bowl ? 334 : 333;
        for (int i = 0; i < quota; ++i, ++steps) {
            if (env.terminated()) env.reset(rng());
            std::vector<double> act(6);
            for (double& x : act) x = a(rng);
            StepResult r = env.step(act);
            if (r.info.safety_violation) {
                ++safety;
                if (r.reward != -200.0) ++mismatches;
                continue;
            }
            if (r.reward != independent_reward(cfg.reward, r.info.grid.v, r.info.q_pv)) ++mismatches;
            if (r.reward > 0.0) ++positive;
        }
    }

    auto net = test::load_shared("case2");
    ProfileStore store = test::synthetic_store(*net, 480, 0.1, 0.05, 0.1, nullptr,
                                               [](std::size_t t) { return t == 7 ? 100.0 : 1.0; });
    store.pv_s_max[0] = 0.3;
    EnvConfig crafted = test::synthetic_env(net, store);
    crafted.random_offset = false;
    crafted.profile_noise_sigma = 0.0;
    Environment env(crafted);
    env.reset(0);
    for (int i = 0; i < 6; ++i) env.step({0.2});
    const EnvState before = env.snapshot();
    StepResult r = env.step({0.4});
    const EnvState& after = env.state();
    const bool backtrack = r.info.safety_violation && r.reward == -200.0 && r.terminated && after.t == before.t &&
                           after.grid.v == before.grid.v && after.q_pv == before.q_pv && after.p_pv == before.p_pv &&
                           env.flatten(r.observations) == env.flatten(before.observations);

    report(mismatches == 0 && positive == 0 && backtrack, "reward identity",
           fmt("%d steps, %d mismatches, %d positive, %d safety events, crafted backtrack %s", steps, mismatches,
               positive, safety, backtrack ? "ok" : "broken"));
}

// Independent power flow for a three-bus feeder (slack 0, buses 1 and 2)
// by backward/forward sweep on complex voltages. parent[2] is 0 or 1.
struct Feeder {
    std::complex<double> z1, z2;
    int parent2 = 1;
    double pl[3]{}, ql[3]{}, ppv[3]{};
    double qpv_l[3]{};  // reactive load, consumed

    bool solve(double q1, double q2, std::complex<double> v[3], double& slack_p) const {
        using C = std::complex<double>;
        const C s1(pl[1] - ppv[1], ql[1] - q1), s2(pl[2] - ppv[2], ql[2] - q2);
        for (int it = 0; it < 200; ++it) {
            const C i1 = std::conj(s1 / v[1]), i2 = std::conj(s2 / v[2]);
            const C b2 = i2;
            const C b1 = parent2 == 1 ? i1 + i2 : i1;
            const C n1 = v[0] - z1 * b1;
            const C n2 = (parent2 == 1 ? n1 : v[0]) - z2 * b2;
            const double change = std::max(std::abs(n1 - v[1]), std::abs(n2 - v[2]));
            v[1] = n1;
            v[2] = n2;
            if (change < 1e-14) {
                const C root = parent2 == 1 ? b1 : b1 + b2;
                slack_p = (v[0] * std::conj(root)).real();
                return true;
            }
        }
        return false;
    }
};

NetworkCase feeder_case(const Feeder& f) {
    CaseHeader h;
    h.name = "feeder3";
    std::vector<Bus> buses{{0, 12.66}, {1, 12.66}, {2, 12.66}};
    std::vector<Branch> branches{test::line(0, 1, f.z1.real(), f.z1.imag()),
                                 test::line(f.parent2, 2, f.z2.real(), f.z2.imag())};
    std::vector<PvUnit> pvs{{1, 0, 1.0, 1}, {2, 1, 1.0, 1}};
    std::vector<LoadUnit> loads{{1, 1}, {2, 2}};
    std::vector<Region> regions{{1, {1, 2}}};
    return NetworkCase::create(h, buses, branches, pvs, loads, regions);
}

void opf_vs_brute_force() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> r(0.01, 0.06), xr(0.5, 2.0), p(0.02, 0.12), qr(0.05, 0.3), pv(0.0, 0.1),
        qmax(0.05, 0.08);
    std::bernoulli_distribution chain(0.5);
    const unsigned workers = std::max(1u, std::thread::hardware_concurrency());
    double worst_obj = 0.0, worst_q = 0.0;
    bool ok = true;
    for (int trial = 0; trial < 10; ++trial) {
        Feeder f;
        f.z1 = {r(rng), 0.0};
        f.z1.imag(f.z1.real() * xr(rng));
        f.z2 = {r(rng), 0.0};
        f.z2.imag(f.z2.real() * xr(rng));
        f.parent2 = chain(rng) ? 1 : 0;
        for (int i = 1; i <= 2; ++i) {
            f.pl[i] = p(rng);
            f.ql[i] = f.pl[i] * qr(rng);
            f.ppv[i] = pv(rng);
        }
        const double bound[2] = {qmax(rng), qmax(rng)};
        NetworkCase net = feeder_case(f);
        InjectionSet inj = InjectionSet::zeros(3);
        for (int i = 1; i <= 2; ++i) {
            inj.p_load[i] = f.pl[i];
            inj.q_load[i] = f.ql[i];
            inj.p_pv[i] = f.ppv[i];
        }
        const OpfSolution sol = opf_solve(net, inj, {bound[0], bound[1]});

        const int n0 = static_cast<int>(std::lround(bound[0] / 1e-4)), n1 = static_cast<int>(std::lround(bound[1] / 1e-4));
        std::vector<double> best(workers, std::numeric_limits<double>::infinity());
        std::vector<std::pair<double, double>> arg(workers);
        std::atomic<int> next{-n0};
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&, w]() {
                for (int a = next++; a <= n0; a = next++) {
                    std::complex<double> v[3] = {1.0, 1.0, 1.0};
                    const double q1 = a * 1e-4;
                    for (int b = -n1; b <= n1; ++b) {
                        const double q2 = b * 1e-4;
                        double slack = 0.0;
                        if (!f.solve(q1, q2, v, slack)) continue;
                        bool feasible = true;
                        for (int i = 1; i <= 2; ++i) feasible &= std::abs(v[i]) >= 0.95 && std::abs(v[i]) <= 1.05;
                        if (feasible && slack < best[w]) {
                            best[w] = slack;
                            arg[w] = {q1, q2};
                        }
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
        const auto w = static_cast<std::size_t>(std::min_element(best.begin(), best.end()) - best.begin());
        const double obj_gap = std::abs(sol.objective - best[w]);
        const double q_gap = std::max(std::abs(sol.q_pv[0] - f.ql[1]), std::abs(sol.q_pv[1] - f.ql[2]));
        worst_obj = std::max(worst_obj, obj_gap);
        worst_q = std::max(worst_q, q_gap);
        ok &= sol.feasible && obj_gap <= 1e-6 && q_gap <= 1e-3;
    }
    const double elapsed = seconds_since(t0);
    report(ok && elapsed < 120.0, "OPF vs brute force",
           fmt("max |objective gap| = %.2e, max |q* - q_L| = %.2e, %.1f s", worst_obj, worst_q, elapsed));
}

void controller_ordering() {
    EnvConfig cfg = test::bundled_env("case33");
    Environment env(cfg);
    const NetworkCase& net = env.network();
    const double c = net.action_bound();
    std::mt19937_64 rng(20);
    DroopParams droop;
    OpfOptions opf;
    int windows = 0, attempts = 0, order_fail = 0, cr_fail = 0;
    double worst_slack = -std::numeric_limits<double>::infinity();
    while (windows < 20 && attempts < 200) {
        ++attempts;
        env.reset(rng());
        const EnvState& s = env.state();
        InjectionSet inj = s.grid.injections;
        for (double& q : inj.q_pv) q = 0.0;
        const auto headroom = env.headroom();
        std::vector<double> q_max(headroom.size());
        for (std::size_t k = 0; k < q_max.size(); ++k) q_max[k] = c * headroom[k];

        const OpfSolution o = opf_solve(net, inj, q_max, opf);
        if (!o.feasible) continue;
        ++windows;
        const GridState none = solve_power_flow(net, inj, opf.solver);

        // one lagged droop response from the uncontrolled state
        InjectionSet lag = inj;
        for (std::size_t k = 0; k < q_max.size(); ++k) {
            const std::size_t pos = net.position(net.pv_units()[k].bus);
            lag.q_pv[pos] += std::clamp(droop_q(none.v[pos], s.p_pv[k], env.s_max()[k], droop), -q_max[k], q_max[k]);
        }
        const GridState lagged = solve_power_flow(net, lag, opf.solver);
        const DroopFixedPoint fp = droop_fixed_point(net, inj, s.p_pv, env.s_max(), q_max, droop, opf.solver);

        const double upper = std::max(none.total_loss, lagged.converged ? lagged.total_loss : 0.0);
        worst_slack = std::max({worst_slack, o.total_loss - fp.grid.total_loss, fp.grid.total_loss - upper});
        if (!fp.converged || o.total_loss > fp.grid.total_loss + 1e-6 || fp.grid.total_loss > upper + 1e-6) ++order_fail;
        for (std::size_t i = 1; i < net.bus_count(); ++i) {
            if (fp.grid.v[i] < net.buses()[i].v_min || fp.grid.v[i] > net.buses()[i].v_max) {
                ++cr_fail;
                break;
            }
        }
    }
    report(windows == 20 && order_fail == 0 && cr_fail == 0, "controller ordering",
           fmt("%d feasible windows, %d ordering violations (worst excess %.2e MW), %d droop windows out of band",
               windows, order_fail, worst_slack, cr_fail));
}

int cli(const std::string& args) {
    const std::string cmd = std::string(AVC_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void determinism() {
    const fs::path dir = test::scratch_dir("acceptance_determinism");
    const std::string flags = "run --case " + test::case_path("case33").string() + " --profiles " +
                              test::profiles_path("case33").string() +
                              " --controller droop --barrier bowl --episodes 4 --seed 2024 --obs-noise 0.001 --out ";
    const int a = cli(flags + (dir / "a").string());
    const int b = cli(flags + (dir / "b").string());
    int files = 0, differing = 0;
    if (a == 0 && b == 0) {
        for (const auto& e : fs::directory_iterator(dir / "a")) {
            ++files;
            const fs::path other = dir / "b" / e.path().filename();
            if (!fs::exists(other) || test::read_file(e.path()) != test::read_file(other)) ++differing;
        }
    }
    report(a == 0 && b == 0 && files > 0 && differing == 0, "determinism",
           fmt("exit codes %d/%d, %d files compared, %d differ", a, b, files, differing));
}

void benchmark_data() {
    const char* dir = std::getenv("AVC_BENCHMARK_DIR");
    if (!dir || !fs::exists(fs::path(dir) / "manifest.json")) {
        skip("benchmark no-control", "AVC_BENCHMARK_DIR not set or has no manifest.json");
        return;
    }
    RunConfig rc;
    rc.case_path = test::case_path("case33");
    rc.profiles_dir = dir;
    rc.seed = 1;
    EnvConfig cfg = build_env_config(rc);
    ControllerConfig none;
    EvalResult res = run_eval(cfg, none, episode_seeds(1, 100));
    const double cr = res.summary.mean.cr, pl = res.summary.mean.pl_mean;
    report(std::abs(cr - 0.706) <= 0.05 && std::abs(pl - 0.069) <= 0.3 * 0.069, "benchmark no-control",
           fmt("CR = %.1f%%, PL = %.4f MW over 100 episodes", 100 * cr, pl));
}

}  // namespace

int main() {
    const std::function<void()> checks[] = {power_flow_oracle, quadratic_accuracy, barrier_exactness, reward_identity,
                                            opf_vs_brute_force, controller_ordering, determinism, benchmark_data};
    for (const auto& check : checks) {
        try {
            check();
        } catch (const std::exception& e) {
            report(false, "exception", e.what());
        }
    }
    std::printf("%s\n", failures ? "ACCEPTANCE FAILED" : "ACCEPTANCE PASSED");
    return failures ? 1 : 0;
}
