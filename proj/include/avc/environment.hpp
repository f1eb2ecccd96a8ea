#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "avc/barrier.hpp"
#include "avc/network.hpp"
#include "avc/power_flow.hpp"
#include "avc/profiles.hpp"

namespace avc {

inline constexpr int kObservationLayoutVersion = 1;
inline constexpr std::size_t kBusChannels = 4;  // p_load, q_load, v, theta
inline constexpr std::size_t kPvChannels = 2;   // p_pv, q_pv of the previous step

struct EnvConfig {
    std::shared_ptr<const NetworkCase> network;
    std::shared_ptr<const ProfileStore> store;
    RewardSpec reward;
    int episode_length = 240;
    int day_buffer = 480;
    double obs_noise_sigma = 0.0;      // additive, every observation channel
    double profile_noise_sigma = 0.01; // multiplicative, every load/PV read
    double gamma = 0.99;
    bool random_offset = true;
    std::uint64_t seed = 0;
    SolverOptions solver;
    bool check_branch_ratings = false;
};

/// Throws std::invalid_argument on inconsistent settings and ProfileError
/// when the store does not cover one full day window.
void validate(const EnvConfig& config);

struct BusMeasure {
    BusIndex bus = 0;
    double p_load = 0.0;
    double q_load = 0.0;
    double v = 0.0;
    double theta = 0.0;
};

struct PvMeasure {
    int agent_id = 0;
    double p_pv = 0.0;
    double q_pv = 0.0;
};

struct Observation {
    int agent_id = 0;
    int region_id = 0;
    std::vector<BusMeasure> buses;  // ascending bus index
    std::vector<PvMeasure> pvs;     // ascending agent id

    /// Layout: buses first, [p_load, q_load, v, theta] each, then PVs,
    /// [p_pv, q_pv] each.
    std::vector<double> flatten() const;
};

struct StepInfo {
    GridState grid;              // solved state the reward is computed on
    std::vector<double> actions; // after clamping, per agent slot
    std::vector<double> q_pv;    // applied reactive power, MVAr per slot
    bool safety_violation = false;
    double total_loss = 0.0;     // MW
    double reactive_loss = 0.0;  // MVAr
    double mean_barrier = 0.0;
    bool in_control = false;     // every non-slack bus within its limits
    int t = 0;                   // step index within the episode
};

struct StepResult {
    std::vector<Observation> observations;
    double reward = 0.0;
    bool terminated = false;
    StepInfo info;
};

struct SpaceDescriptor {
    std::size_t n_agents = 0;
    std::vector<std::size_t> obs_lengths;
    std::vector<std::size_t> obs_offsets;  // into the concatenated observation vector
    std::size_t obs_total = 0;
    std::size_t action_dim = 1;
    double action_low = 0.0;
    double action_high = 0.0;
    int episode_length = 0;
    int layout_version = kObservationLayoutVersion;
};

/// Complete internal state; restoring it reproduces every later step.
struct EnvState {
    bool active = false;
    bool terminated = false;
    int t = 0;
    std::uint64_t seed = 0;
    std::size_t day = 0;
    std::size_t offset = 0;
    std::size_t start_index = 0;
    GridState grid;             // current-step profiles with the last applied q
    std::vector<double> p_pv;   // MW per slot at the current step
    std::vector<double> q_pv;   // MVAr per slot, last applied
    std::vector<Observation> observations;
    std::mt19937_64 profile_rng;
    std::mt19937_64 obs_rng;
};

/// q = a * sqrt(s_max^2 - p^2). |a| beyond `bound` is clamped with a warning.
double action_to_reactive(double a, double p_pv, double s_max, double bound);
double reactive_headroom(double p_pv, double s_max);

class Environment {
  public:
    explicit Environment(EnvConfig config);

    std::vector<Observation> reset();
    std::vector<Observation> reset(std::uint64_t seed);

    /// Throws std::logic_error before reset or after termination and
    /// std::invalid_argument for a wrong action count.
    StepResult step(const std::vector<double>& actions);

    SpaceDescriptor space() const;
    std::vector<double> flatten(const std::vector<Observation>& observations) const;

    EnvState snapshot() const { return state_; }
    void restore(const EnvState& state);

    const EnvConfig& config() const { return config_; }
    const NetworkCase& network() const { return *config_.network; }
    const EnvState& state() const { return state_; }
    bool terminated() const { return state_.terminated; }

    std::vector<double> s_max() const { return s_max_; }
    std::vector<double> headroom() const;

  private:
    InjectionSet read_injections(std::size_t profile_index, std::vector<double>& p_pv);
    std::vector<Observation> observe(const GridState& grid, const std::vector<double>& p_pv,
                                     const std::vector<double>& q_pv);
    bool violates_ratings(const GridState& grid) const;

    EnvConfig config_;
    std::vector<double> s_max_;
    std::vector<std::size_t> pv_position_;  // bus position of each slot
    EnvState state_;
};

}  // namespace avc
