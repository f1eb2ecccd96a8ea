#include "avc/environment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <spdlog/spdlog.h>

namespace avc {

double reactive_headroom(double p_pv, double s_max) {
    return std::sqrt(std::max(0.0, s_max * s_max - p_pv * p_pv));
}

double action_to_reactive(double a, double p_pv, double s_max, double bound) {
    if (std::abs(a) > bound) {
        spdlog::warn("action {} outside [-{}, {}], clamped", a, bound, bound);
        a = std::clamp(a, -bound, bound);
    }
    return a * reactive_headroom(p_pv, s_max);
}

void validate(const EnvConfig& config) {
    if (!config.network) throw std::invalid_argument("environment needs a network case");
    if (!config.store) throw std::invalid_argument("environment needs a profile store");
    if (config.network->agent_count() == 0) throw std::invalid_argument("network has no PV agents");
    if (config.episode_length <= 0) throw std::invalid_argument("episode_length must be positive");
    if (config.day_buffer < config.episode_length) throw std::invalid_argument("episode_length exceeds day_buffer");
    if (config.obs_noise_sigma < 0 || config.profile_noise_sigma < 0) throw std::invalid_argument("noise sigma must be non-negative");
    if (!(config.gamma > 0 && config.gamma <= 1)) throw std::invalid_argument("gamma must lie in (0, 1]");
    validate(config.reward);
    config.store->validate(*config.network);
    if (config.store->steps() < static_cast<std::size_t>(config.day_buffer)) {
        throw ProfileError("profiles cover " + std::to_string(config.store->steps()) + " steps, fewer than one " +
                           std::to_string(config.day_buffer) + "-step day window");
    }
}

std::vector<double> Observation::flatten() const {
    std::vector<double> out;
    out.reserve(kBusChannels * buses.size() + kPvChannels * pvs.size());
    for (const BusMeasure& b : buses) {
        out.insert(out.end(), {b.p_load, b.q_load, b.v, b.theta});
    }
    for (const PvMeasure& p : pvs) {
        out.insert(out.end(), {p.p_pv, p.q_pv});
    }
    return out;
}

Environment::Environment(EnvConfig config) : config_(std::move(config)) {
    validate(config_);
    const NetworkCase& net = *config_.network;
    for (const PvUnit& pv : net.pv_units()) {
        s_max_.push_back(config_.store->s_max(net, pv.agent_id));
        pv_position_.push_back(net.position(pv.bus));
    }
}

std::vector<Observation> Environment::reset() { return reset(config_.seed); }

std::vector<Observation> Environment::reset(std::uint64_t seed) {
    std::seed_seq reset_seq{seed, std::uint64_t{0}};
    std::seed_seq profile_seq{seed, std::uint64_t{1}};
    std::seed_seq obs_seq{seed, std::uint64_t{2}};
    std::mt19937_64 reset_rng(reset_seq);

    EnvState s;
    s.seed = seed;
    s.profile_rng.seed(profile_seq);
    s.obs_rng.seed(obs_seq);

    const auto buffer = static_cast<std::size_t>(config_.day_buffer);
    const std::size_t days = config_.store->steps() / buffer;
    s.day = std::uniform_int_distribution<std::size_t>(0, days - 1)(reset_rng);
    s.offset = config_.random_offset
                   ? std::uniform_int_distribution<std::size_t>(0, buffer - static_cast<std::size_t>(config_.episode_length))(reset_rng)
                   : 0;
    s.start_index = s.day * buffer + s.offset;

    state_ = std::move(s);
    InjectionSet inj = read_injections(state_.start_index, state_.p_pv);
    const double c = network().action_bound();
    state_.q_pv.assign(s_max_.size(), 0.0);
    for (std::size_t k = 0; k < s_max_.size(); ++k) {
        const double limit = c * reactive_headroom(state_.p_pv[k], s_max_[k]);
        state_.q_pv[k] = limit > 0 ? std::uniform_real_distribution<double>(-limit, limit)(reset_rng) : 0.0;
        inj.q_pv[pv_position_[k]] += state_.q_pv[k];
    }
    state_.grid = solve_power_flow(network(), inj, config_.solver);
    if (!state_.grid.converged) {
        state_.active = false;
        throw std::runtime_error("initial power flow did not converge at profile step " + std::to_string(state_.start_index));
    }
    state_.observations = observe(state_.grid, state_.p_pv, state_.q_pv);
    state_.active = true;
    return state_.observations;
}

StepResult Environment::step(const std::vector<double>& actions) {
    if (!state_.active) throw std::logic_error("step called before reset");
    if (state_.terminated) throw std::logic_error("step called on a terminated episode");
    const std::size_t n = s_max_.size();
    if (actions.size() != n) {
        throw std::invalid_argument("expected " + std::to_string(n) + " actions, got " + std::to_string(actions.size()));
    }

    const double c = network().action_bound();
    StepResult result;
    result.info.t = state_.t;
    result.info.actions.resize(n);
    result.info.q_pv.resize(n);
    std::size_t clamped = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (!std::isfinite(actions[k])) throw std::invalid_argument("actions must be finite");
        if (std::abs(actions[k]) > c) ++clamped;
        result.info.actions[k] = std::clamp(actions[k], -c, c);
        result.info.q_pv[k] = result.info.actions[k] * reactive_headroom(state_.p_pv[k], s_max_[k]);
    }
    if (clamped) spdlog::warn("{} of {} actions outside [-{}, {}] clamped at step {}", clamped, n, c, c, state_.t);

    InjectionSet inj = state_.grid.injections;
    for (std::size_t k = 0; k < n; ++k) inj.q_pv[pv_position_[k]] = 0.0;
    for (std::size_t k = 0; k < n; ++k) inj.q_pv[pv_position_[k]] += result.info.q_pv[k];
    GridState solved = solve_power_flow(network(), inj, config_.solver);

    auto backtrack = [&]() {
        state_.terminated = true;
        result.reward = config_.reward.safety_penalty;
        result.terminated = true;
        result.observations = state_.observations;
        result.info.safety_violation = true;
        result.info.grid = state_.grid;
        result.info.total_loss = state_.grid.total_loss;
        return result;
    };
    if (!solved.converged || violates_ratings(solved)) return backtrack();

    result.reward = reward(config_.reward, solved.v, result.info.q_pv);
    const int next_t = state_.t + 1;
    std::vector<double> p_next = state_.p_pv;
    GridState next_grid = solved;
    if (next_t < config_.episode_length) {
        const std::mt19937_64 saved_rng = state_.profile_rng;
        InjectionSet next = read_injections(state_.start_index + static_cast<std::size_t>(next_t), p_next);
        next.q_pv = inj.q_pv;
        next_grid = solve_power_flow(network(), next, config_.solver);
        if (!next_grid.converged || violates_ratings(next_grid)) {
            state_.profile_rng = saved_rng;
            return backtrack();
        }
    }

    result.info.grid = std::move(solved);
    result.info.total_loss = result.info.grid.total_loss;
    result.info.reactive_loss = reactive_loss(result.info.q_pv);
    double barrier_sum = 0.0;
    for (double v : result.info.grid.v) barrier_sum += barrier_value(config_.reward.barrier, v);
    result.info.mean_barrier = barrier_sum / static_cast<double>(result.info.grid.v.size());
    result.info.in_control = true;
    for (std::size_t i = 1; i < network().bus_count(); ++i) {
        const Bus& bus = network().buses()[i];
        const double v = result.info.grid.v[i];
        if (v < bus.v_min || v > bus.v_max) result.info.in_control = false;
    }

    state_.t = next_t;
    state_.grid = std::move(next_grid);
    state_.p_pv = std::move(p_next);
    state_.q_pv = result.info.q_pv;
    state_.observations = observe(state_.grid, state_.p_pv, state_.q_pv);
    state_.terminated = next_t >= config_.episode_length;
    result.observations = state_.observations;
    result.terminated = state_.terminated;
    return result;
}

SpaceDescriptor Environment::space() const {
    const NetworkCase& net = network();
    SpaceDescriptor d;
    d.n_agents = net.agent_count();
    d.action_low = -net.action_bound();
    d.action_high = net.action_bound();
    d.episode_length = config_.episode_length;
    for (const PvUnit& pv : net.pv_units()) {
        const Region& region = net.region(pv.region_id);
        const auto pvs = static_cast<std::size_t>(std::count_if(
            net.pv_units().begin(), net.pv_units().end(), [&](const PvUnit& u) { return u.region_id == region.id; }));
        const std::size_t len = kBusChannels * region.buses.size() + kPvChannels * pvs;
        d.obs_offsets.push_back(d.obs_total);
        d.obs_lengths.push_back(len);
        d.obs_total += len;
    }
    return d;
}

std::vector<double> Environment::flatten(const std::vector<Observation>& observations) const {
    std::vector<double> out;
    for (const Observation& o : observations) {
        auto flat = o.flatten();
        out.insert(out.end(), flat.begin(), flat.end());
    }
    return out;
}

void Environment::restore(const EnvState& state) {
    if (state.active && (state.q_pv.size() != s_max_.size() || state.grid.v.size() != network().bus_count())) {
        throw std::invalid_argument("snapshot does not belong to this environment");
    }
    state_ = state;
}

std::vector<double> Environment::headroom() const {
    std::vector<double> out(s_max_.size(), 0.0);
    if (state_.p_pv.size() != s_max_.size()) return out;
    for (std::size_t k = 0; k < s_max_.size(); ++k) out[k] = reactive_headroom(state_.p_pv[k], s_max_[k]);
    return out;
}

InjectionSet Environment::read_injections(std::size_t profile_index, std::vector<double>& p_pv) {
    const NetworkCase& net = network();
    const ProfileStore& store = *config_.store;
    const double sigma = config_.profile_noise_sigma;
    InjectionSet inj = InjectionSet::zeros(net.bus_count());
    for (const LoadUnit& load : net.loads()) {
        const std::size_t pos = net.position(load.bus);
        inj.p_load[pos] += noisy_read(store.load_p(load.bus), profile_index, sigma, state_.profile_rng);
        inj.q_load[pos] += noisy_read(store.load_q(load.bus), profile_index, sigma, state_.profile_rng);
    }
    p_pv.assign(s_max_.size(), 0.0);
    for (std::size_t k = 0; k < s_max_.size(); ++k) {
        const int agent = net.pv_units()[k].agent_id;
        p_pv[k] = std::min(noisy_read(store.pv_p(agent), profile_index, sigma, state_.profile_rng), s_max_[k]);
        inj.p_pv[pv_position_[k]] += p_pv[k];
    }
    return inj;
}

std::vector<Observation> Environment::observe(const GridState& grid, const std::vector<double>& p_pv,
                                              const std::vector<double>& q_pv) {
    const NetworkCase& net = network();
    const double sigma = config_.obs_noise_sigma;
    auto noisy = [&](double x) {
        return sigma > 0 ? x + std::normal_distribution<double>(0.0, sigma)(state_.obs_rng) : x;
    };

    std::vector<Observation> per_region;
    per_region.reserve(net.regions().size());
    for (const Region& region : net.regions()) {
        Observation o;
        o.region_id = region.id;
        for (BusIndex bus : region.buses) {
            const std::size_t pos = net.position(bus);
            BusMeasure m;
            m.bus = bus;
            m.p_load = noisy(grid.injections.p_load[pos]);
            m.q_load = noisy(grid.injections.q_load[pos]);
            m.v = noisy(grid.v[pos]);
            m.theta = noisy(grid.theta[pos]);
            o.buses.push_back(m);
        }
        for (std::size_t k = 0; k < net.agent_count(); ++k) {
            const PvUnit& pv = net.pv_units()[k];
            if (pv.region_id != region.id) continue;
            o.pvs.push_back({pv.agent_id, noisy(p_pv[k]), noisy(q_pv[k])});
        }
        per_region.push_back(std::move(o));
    }

    std::vector<Observation> out;
    out.reserve(net.agent_count());
    for (const PvUnit& pv : net.pv_units()) {
        const auto it = std::find_if(per_region.begin(), per_region.end(),
                                     [&](const Observation& o) { return o.region_id == pv.region_id; });
        Observation o = *it;
        o.agent_id = pv.agent_id;
        out.push_back(std::move(o));
    }
    return out;
}

bool Environment::violates_ratings(const GridState& grid) const {
    if (!config_.check_branch_ratings) return false;
    const auto currents = branch_currents(network(), grid);
    for (std::size_t k = 0; k < currents.size(); ++k) {
        const auto& rating = network().branches()[k].i_max;
        if (rating && currents[k] > *rating) return true;
    }
    return false;
}

}  // namespace avc
