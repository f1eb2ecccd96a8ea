#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "avc/network.hpp"

namespace avc {

class ProfileError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum class ProfileKind { LoadActive, LoadReactive, PvActive };

std::string kind_name(ProfileKind kind);
std::optional<ProfileKind> parse_kind(std::string_view name);

/// Uniformly sampled series. Timestamps are Unix seconds (UTC).
struct Profile {
    int id = 0;
    ProfileKind kind = ProfileKind::LoadActive;
    std::int64_t start = 0;
    int resolution_s = 180;
    std::vector<double> values;  // MW or MVAr

    std::size_t size() const { return values.size(); }
    std::int64_t time_at(std::size_t i) const { return start + static_cast<std::int64_t>(i) * resolution_s; }
};

/// Parses "YYYY-MM-DDTHH:MM[:SS]" with an optional trailing 'Z'.
std::int64_t parse_timestamp(std::string_view text);
std::string format_timestamp(std::int64_t seconds);

/// Reads a CSV whose first column holds timestamps and whose other columns
/// are named `<kind>_<id>`. Empty cells and skipped rows are filled by
/// linear interpolation (nearest value at the edges). The native resolution
/// is the smallest timestamp step; every step must be a multiple of it.
/// Throws ProfileError on malformed input, non-increasing timestamps, or a
/// column with more than 20% of its samples missing.
std::vector<Profile> ingest_csv(std::string_view text);

/// Replaces samples further than `k` standard deviations (population) from
/// the mean by interpolating between the nearest retained neighbours.
Profile remove_outliers(const Profile& profile, double k = 7.0);

/// Piecewise-linear resampling onto a new uniform grid spanning the same
/// interval. Throws ProfileError if the span is not a multiple of the new
/// resolution.
Profile resample(const Profile& profile, int resolution_s);

/// Simulation-ready profiles and their device assignment. All profiles share
/// one time grid.
struct ProfileStore {
    std::map<int, Profile> load_active;
    std::map<int, Profile> load_reactive;
    std::map<int, Profile> pv_active;

    std::map<BusIndex, int> load_profile;       // load bus -> profile id (active and reactive)
    std::map<int, int> pv_profile;              // agent id -> pv profile id
    std::map<int, double> load_power_factor;    // profile id -> default power factor
    std::map<int, double> applied_power_factor; // profile id -> power factor after perturbation
    std::map<int, double> pv_s_max;             // agent id -> MVA, set by scale_penetration
    double penetration_ratio = 0.0;

    std::size_t steps() const;
    int resolution_s() const;
    std::int64_t start() const;

    /// Checks shared grids, non-negative PV output and that every device of
    /// `network` resolves to a profile. Throws ProfileError.
    void validate(const NetworkCase& network) const;

    const Profile& load_p(BusIndex bus) const;
    const Profile& load_q(BusIndex bus) const;
    const Profile& pv_p(int agent_id) const;
    double s_max(const NetworkCase& network, int agent_id) const;
};

/// Rescales every PV profile by one factor so that the peak of the summed PV
/// output over all units equals `pr` times the peak of the summed load, then
/// sizes each inverter at 1.2 times its own peak output.
ProfileStore scale_penetration(const ProfileStore& store, const NetworkCase& network, double pr);

/// Regenerates reactive load profiles from active ones with each load's
/// default power factor perturbed uniformly within +/- `spread` (relative).
ProfileStore perturb_power_factor(const ProfileStore& store, std::uint64_t seed, double spread = 0.05);

/// Reactive-to-active ratio for a power factor in (0, 1].
double reactive_ratio(double power_factor);

/// value * (1 + eps), eps ~ N(0, sigma^2). PV readings are clamped at 0.
/// Throws std::out_of_range for a bad step index.
double noisy_read(const Profile& profile, std::size_t t, double sigma, std::mt19937_64& rng);

struct BundleOptions {
    int resolution_s = 180;
    double outlier_sigma = 7.0;
    std::optional<double> penetration_ratio;  // overrides the manifest
    std::optional<std::uint64_t> power_factor_seed;
};

/// Loads `manifest.json` and the CSV it names from `dir` and runs the full
/// pipeline: ingest, outlier removal, resampling, penetration scaling and
/// power-factor generation.
ProfileStore load_bundle(const std::filesystem::path& dir, const NetworkCase& network, const BundleOptions& options = {});

}  // namespace avc
