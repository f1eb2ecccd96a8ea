#pragma once

#include <complex>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "avc/environment.hpp"
#include "avc/network.hpp"
#include "avc/profiles.hpp"
#include "avc/run_config.hpp"

namespace avc::test {

inline std::filesystem::path data_dir() { return AVC_DATA_DIR; }
inline std::filesystem::path case_path(const std::string& name) { return data_dir() / "cases" / (name + ".json"); }
inline std::filesystem::path profiles_path(const std::string& name) { return data_dir() / "profiles" / name; }

inline std::shared_ptr<const NetworkCase> load_shared(const std::string& name) {
    return std::make_shared<const NetworkCase>(load_case(case_path(name)));
}

inline Branch line(BusIndex from, BusIndex to, double r, double x) {
    Branch b;
    b.from_bus = from;
    b.to_bus = to;
    b.r = r;
    b.x = x;
    return b;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("avc_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline Profile series(ProfileKind kind, int id, std::vector<double> values) {
    Profile p;
    p.id = id;
    p.kind = kind;
    p.start = 1388534400;  // 2014-01-01
    p.resolution_s = 180;
    p.values = std::move(values);
    return p;
}

/// Store with one load profile per load bus (id = bus label) and one PV
/// profile per agent (id = agent id). `shape(t)` scales the base values.
inline ProfileStore synthetic_store(const NetworkCase& net, std::size_t steps, double load_p, double load_q,
                                    double pv_p, const std::function<double(std::size_t)>& pv_shape = nullptr,
                                    const std::function<double(std::size_t)>& load_shape = nullptr) {
    ProfileStore s;
    for (const LoadUnit& l : net.loads()) {
        std::vector<double> p(steps), q(steps);
        for (std::size_t t = 0; t < steps; ++t) {
            const double f = load_shape ? load_shape(t) : 1.0;
            p[t] = load_p * f;
            q[t] = load_q * f;
        }
        s.load_active[l.bus] = series(ProfileKind::LoadActive, l.bus, p);
        s.load_reactive[l.bus] = series(ProfileKind::LoadReactive, l.bus, q);
        s.load_profile[l.bus] = l.bus;
    }
    for (const PvUnit& pv : net.pv_units()) {
        std::vector<double> p(steps);
        for (std::size_t t = 0; t < steps; ++t) p[t] = pv_p * (pv_shape ? pv_shape(t) : 1.0);
        s.pv_active[pv.agent_id] = series(ProfileKind::PvActive, pv.agent_id, p);
        s.pv_profile[pv.agent_id] = pv.agent_id;
    }
    return s;
}

inline EnvConfig bundled_env(const std::string& name, std::uint64_t seed = 7) {
    RunConfig rc;
    rc.case_path = case_path(name);
    rc.profiles_dir = profiles_path(name);
    rc.seed = seed;
    return build_env_config(rc);
}

inline EnvConfig synthetic_env(std::shared_ptr<const NetworkCase> net, ProfileStore store, int episode_length = 240,
                               int day_buffer = 480) {
    EnvConfig c;
    c.network = std::move(net);
    c.store = std::make_shared<const ProfileStore>(std::move(store));
    c.episode_length = episode_length;
    c.day_buffer = day_buffer;
    return c;
}

/// Independent 2-bus oracle: |V1| from the exact branch relation
/// V1 = V0 - Z * conj(S1 / V1) iterated as a complex fixed point, with
/// S1 the net consumption at bus 1 (per-unit).
inline double two_bus_fixed_point(double r, double x, double p, double q, double v0 = 1.0) {
    using C = std::complex<double>;
    const C z(r, x);
    const C s(p, q);
    C v1(v0, 0.0);
    for (int i = 0; i < 10000; ++i) {
        const C next = C(v0, 0.0) - z * std::conj(s / v1);
        if (std::abs(next - v1) < 1e-15) {
            v1 = next;
            break;
        }
        v1 = next;
    }
    return std::abs(v1);
}

}  // namespace avc::test
