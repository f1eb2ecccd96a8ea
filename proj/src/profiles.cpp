#include "avc/profiles.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace avc {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        std::size_t next = line.find(sep, pos);
        out.push_back(trim(line.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos)));
        if (next == std::string_view::npos) break;
        pos = next + 1;
    }
    return out;
}

template <typename T>
T parse_number(std::string_view text, std::string_view what) {
    T value{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw ProfileError(std::string(what) + ": cannot parse '" + std::string(text) + "'");
    }
    return value;
}

// Fills NaN entries by linear interpolation between known neighbours and
// with the nearest known value at either edge.
void fill_gaps(std::vector<double>& values) {
    const std::size_t n = values.size();
    std::size_t prev = n;
    for (std::size_t i = 0; i < n; ++i) {
        if (std::isnan(values[i])) continue;
        if (prev == n) {
            for (std::size_t j = 0; j < i; ++j) values[j] = values[i];
        } else if (i > prev + 1) {
            const double span = static_cast<double>(i - prev);
            for (std::size_t j = prev + 1; j < i; ++j) {
                const double w = static_cast<double>(j - prev) / span;
                values[j] = values[prev] + w * (values[i] - values[prev]);
            }
        }
        prev = i;
    }
    if (prev != n) {
        for (std::size_t j = prev + 1; j < n; ++j) values[j] = values[prev];
    }
}

double peak(const Profile& p) {
    return p.values.empty() ? 0.0 : *std::max_element(p.values.begin(), p.values.end());
}

const Profile& lookup(const std::map<int, Profile>& profiles, int id, std::string_view what) {
    auto it = profiles.find(id);
    if (it == profiles.end()) throw ProfileError(std::string(what) + " profile " + std::to_string(id) + " is missing");
    return it->second;
}

}  // namespace

std::string kind_name(ProfileKind kind) {
    switch (kind) {
        case ProfileKind::LoadActive: return "load-active";
        case ProfileKind::LoadReactive: return "load-reactive";
        case ProfileKind::PvActive: return "pv-active";
    }
    return "unknown";
}

std::optional<ProfileKind> parse_kind(std::string_view name) {
    if (name == "load-active") return ProfileKind::LoadActive;
    if (name == "load-reactive") return ProfileKind::LoadReactive;
    if (name == "pv-active") return ProfileKind::PvActive;
    return std::nullopt;
}

std::int64_t parse_timestamp(std::string_view text) {
    text = trim(text);
    if (!text.empty() && text.back() == 'Z') text.remove_suffix(1);
    // YYYY-MM-DD[T ]HH:MM[:SS]
    if (text.size() != 16 && text.size() != 19) throw ProfileError("bad timestamp '" + std::string(text) + "'");
    if (text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' ') || text[13] != ':' ||
        (text.size() == 19 && text[16] != ':')) {
        throw ProfileError("bad timestamp '" + std::string(text) + "'");
    }
    const int year = parse_number<int>(text.substr(0, 4), "timestamp year");
    const auto month = parse_number<unsigned>(text.substr(5, 2), "timestamp month");
    const auto day = parse_number<unsigned>(text.substr(8, 2), "timestamp day");
    const int hour = parse_number<int>(text.substr(11, 2), "timestamp hour");
    const int minute = parse_number<int>(text.substr(14, 2), "timestamp minute");
    const int second = text.size() == 19 ? parse_number<int>(text.substr(17, 2), "timestamp second") : 0;
    const std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
    if (!ymd.ok() || hour > 23 || minute > 59 || second > 59) {
        throw ProfileError("bad timestamp '" + std::string(text) + "'");
    }
    const auto days = std::chrono::sys_days{ymd}.time_since_epoch().count();
    return static_cast<std::int64_t>(days) * 86400 + hour * 3600 + minute * 60 + second;
}

std::string format_timestamp(std::int64_t seconds) {
    const auto days = static_cast<int>(std::floor(static_cast<double>(seconds) / 86400.0));
    const std::int64_t rem = seconds - static_cast<std::int64_t>(days) * 86400;
    const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{days}}};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<int>(rem / 3600),
                  static_cast<int>(rem / 60 % 60), static_cast<int>(rem % 60));
    return buf;
}

std::vector<Profile> ingest_csv(std::string_view text) {
    std::vector<std::string_view> lines;
    for (std::string_view line : split(text, '\n')) {
        if (!line.empty()) lines.push_back(line);
    }
    if (lines.empty()) throw ProfileError("profile CSV is empty");

    const auto header = split(lines[0], ',');
    if (header.size() < 2) throw ProfileError("profile CSV needs a timestamp column and at least one series");
    std::vector<Profile> profiles;
    std::set<std::pair<ProfileKind, int>> seen;
    for (std::size_t c = 1; c < header.size(); ++c) {
        const std::string_view name = header[c];
        const auto sep = name.rfind('_');
        if (sep == std::string_view::npos) throw ProfileError("column '" + std::string(name) + "' is not <kind>_<id>");
        auto kind = parse_kind(name.substr(0, sep));
        if (!kind) throw ProfileError("column '" + std::string(name) + "' has an unknown kind");
        Profile p;
        p.kind = *kind;
        p.id = parse_number<int>(name.substr(sep + 1), "column '" + std::string(name) + "' id");
        if (!seen.emplace(p.kind, p.id).second) throw ProfileError("duplicate column '" + std::string(name) + "'");
        profiles.push_back(std::move(p));
    }

    std::vector<std::int64_t> stamps;
    std::vector<std::vector<double>> cells(profiles.size());
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto row = split(lines[r], ',');
        if (row.size() != header.size()) {
            throw ProfileError("row " + std::to_string(r) + ": expected " + std::to_string(header.size()) + " cells");
        }
        const std::int64_t t = parse_timestamp(row[0]);
        if (!stamps.empty() && t <= stamps.back()) {
            throw ProfileError("row " + std::to_string(r) + ": timestamps must be strictly increasing");
        }
        stamps.push_back(t);
        for (std::size_t c = 1; c < row.size(); ++c) {
            cells[c - 1].push_back(row[c].empty() ? kMissing : parse_number<double>(row[c], "row " + std::to_string(r)));
        }
    }
    if (stamps.size() < 2) throw ProfileError("profile CSV needs at least two rows");

    std::int64_t resolution = std::numeric_limits<std::int64_t>::max();
    for (std::size_t i = 1; i < stamps.size(); ++i) resolution = std::min(resolution, stamps[i] - stamps[i - 1]);
    for (std::size_t i = 1; i < stamps.size(); ++i) {
        if ((stamps[i] - stamps[i - 1]) % resolution != 0) {
            throw ProfileError("timestamp step at row " + std::to_string(i + 1) + " is not a multiple of " +
                               std::to_string(resolution) + " s");
        }
    }
    const auto grid = static_cast<std::size_t>((stamps.back() - stamps.front()) / resolution + 1);

    for (std::size_t c = 0; c < profiles.size(); ++c) {
        Profile& p = profiles[c];
        p.start = stamps.front();
        p.resolution_s = static_cast<int>(resolution);
        p.values.assign(grid, kMissing);
        for (std::size_t r = 0; r < stamps.size(); ++r) {
            p.values[static_cast<std::size_t>((stamps[r] - p.start) / resolution)] = cells[c][r];
        }
        const auto missing = static_cast<std::size_t>(
            std::count_if(p.values.begin(), p.values.end(), [](double v) { return std::isnan(v); }));
        if (static_cast<double>(missing) > 0.2 * static_cast<double>(grid)) {
            throw ProfileError("column '" + std::string(header[c + 1]) + "' is missing " + std::to_string(missing) +
                               " of " + std::to_string(grid) + " samples");
        }
        fill_gaps(p.values);
        if (p.kind == ProfileKind::PvActive) {
            for (double& v : p.values) v = std::max(v, 0.0);
        }
    }
    return profiles;
}

Profile remove_outliers(const Profile& profile, double k) {
    const std::size_t n = profile.size();
    if (n < 2) throw std::invalid_argument("remove_outliers needs at least two samples");
    const double mean = std::accumulate(profile.values.begin(), profile.values.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double v : profile.values) var += (v - mean) * (v - mean);
    const double sigma = std::sqrt(var / static_cast<double>(n));
    if (sigma == 0.0) return profile;

    Profile out = profile;
    bool any = false;
    for (double& v : out.values) {
        if (std::abs(v - mean) > k * sigma) {
            v = kMissing;
            any = true;
        }
    }
    if (any) fill_gaps(out.values);
    return out;
}

Profile resample(const Profile& profile, int resolution_s) {
    if (resolution_s <= 0) throw std::invalid_argument("resolution must be positive");
    if (profile.size() < 1) throw ProfileError("cannot resample an empty profile");
    const std::int64_t span = static_cast<std::int64_t>(profile.size() - 1) * profile.resolution_s;
    if (span % resolution_s != 0) {
        throw ProfileError("span of " + std::to_string(span) + " s is not a multiple of " + std::to_string(resolution_s) + " s");
    }
    Profile out = profile;
    out.resolution_s = resolution_s;
    const auto m = static_cast<std::size_t>(span / resolution_s + 1);
    out.values.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
        const std::int64_t offset = static_cast<std::int64_t>(j) * resolution_s;
        const auto i = static_cast<std::size_t>(offset / profile.resolution_s);
        const std::int64_t rem = offset % profile.resolution_s;
        if (rem == 0) {
            out.values[j] = profile.values[i];
        } else {
            const double w = static_cast<double>(rem) / profile.resolution_s;
            out.values[j] = profile.values[i] + w * (profile.values[i + 1] - profile.values[i]);
        }
    }
    return out;
}

std::size_t ProfileStore::steps() const {
    if (!load_active.empty()) return load_active.begin()->second.size();
    if (!pv_active.empty()) return pv_active.begin()->second.size();
    return 0;
}

int ProfileStore::resolution_s() const {
    if (!load_active.empty()) return load_active.begin()->second.resolution_s;
    if (!pv_active.empty()) return pv_active.begin()->second.resolution_s;
    return 0;
}

std::int64_t ProfileStore::start() const {
    if (!load_active.empty()) return load_active.begin()->second.start;
    if (!pv_active.empty()) return pv_active.begin()->second.start;
    return 0;
}

void ProfileStore::validate(const NetworkCase& network) const {
    const std::size_t n = steps();
    const int res = resolution_s();
    const std::int64_t t0 = start();
    auto check_grid = [&](const std::map<int, Profile>& profiles) {
        for (const auto& [id, p] : profiles) {
            if (p.size() != n || p.resolution_s != res || p.start != t0) {
                throw ProfileError(kind_name(p.kind) + " profile " + std::to_string(id) + " is not on the shared time grid");
            }
        }
    };
    check_grid(load_active);
    check_grid(load_reactive);
    check_grid(pv_active);
    for (const auto& [id, p] : pv_active) {
        for (double v : p.values) {
            if (v < 0.0) throw ProfileError("pv-active profile " + std::to_string(id) + " has negative output");
        }
    }
    for (const LoadUnit& load : network.loads()) {
        load_p(load.bus);
        load_q(load.bus);
    }
    for (const PvUnit& pv : network.pv_units()) {
        const double s = s_max(network, pv.agent_id);
        if (peak(pv_p(pv.agent_id)) > s) {
            throw ProfileError("PV agent " + std::to_string(pv.agent_id) + " output exceeds its rating");
        }
    }
}

const Profile& ProfileStore::load_p(BusIndex bus) const {
    auto it = load_profile.find(bus);
    if (it == load_profile.end()) throw ProfileError("load at bus " + std::to_string(bus) + " has no profile");
    return lookup(load_active, it->second, "load-active");
}

const Profile& ProfileStore::load_q(BusIndex bus) const {
    auto it = load_profile.find(bus);
    if (it == load_profile.end()) throw ProfileError("load at bus " + std::to_string(bus) + " has no profile");
    return lookup(load_reactive, it->second, "load-reactive");
}

const Profile& ProfileStore::pv_p(int agent_id) const {
    auto it = pv_profile.find(agent_id);
    if (it == pv_profile.end()) throw ProfileError("PV agent " + std::to_string(agent_id) + " has no profile");
    return lookup(pv_active, it->second, "pv-active");
}

double ProfileStore::s_max(const NetworkCase& network, int agent_id) const {
    auto it = pv_s_max.find(agent_id);
    if (it != pv_s_max.end()) return it->second;
    return network.pv_units()[network.agent_slot(agent_id)].s_max;
}

ProfileStore scale_penetration(const ProfileStore& store, const NetworkCase& network, double pr) {
    if (!(pr > 0.0)) throw std::invalid_argument("penetration ratio must be positive");
    const std::size_t n = store.steps();
    std::vector<double> load_sum(n, 0.0);
    std::vector<double> pv_sum(n, 0.0);
    for (const LoadUnit& load : network.loads()) {
        const Profile& p = store.load_p(load.bus);
        for (std::size_t t = 0; t < n; ++t) load_sum[t] += p.values[t];
    }
    for (const PvUnit& pv : network.pv_units()) {
        const Profile& p = store.pv_p(pv.agent_id);
        for (std::size_t t = 0; t < n; ++t) pv_sum[t] += p.values[t];
    }
    const double rated_load = n ? *std::max_element(load_sum.begin(), load_sum.end()) : 0.0;
    const double rated_pv = n ? *std::max_element(pv_sum.begin(), pv_sum.end()) : 0.0;
    if (!(rated_load > 0.0)) throw ProfileError("rated load consumption is zero");
    if (!(rated_pv > 0.0)) throw ProfileError("rated PV generation is zero");

    ProfileStore out = store;
    const double factor = pr * rated_load / rated_pv;
    for (auto& [id, p] : out.pv_active) {
        for (double& v : p.values) v *= factor;
    }
    out.pv_s_max.clear();
    for (const PvUnit& pv : network.pv_units()) out.pv_s_max[pv.agent_id] = 1.2 * peak(out.pv_p(pv.agent_id));
    out.penetration_ratio = pr;
    return out;
}

double reactive_ratio(double power_factor) {
    if (!(power_factor > 0.0 && power_factor <= 1.0)) throw std::invalid_argument("power factor must lie in (0, 1]");
    return std::sqrt(1.0 - power_factor * power_factor) / power_factor;
}

ProfileStore perturb_power_factor(const ProfileStore& store, std::uint64_t seed, double spread) {
    if (store.load_active.empty()) throw ProfileError("no load-active profiles to derive reactive power from");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> draw(-spread, spread);
    ProfileStore out = store;
    out.load_reactive.clear();
    out.applied_power_factor.clear();
    for (const auto& [id, p] : store.load_active) {
        auto pf0 = store.load_power_factor.find(id);
        if (pf0 == store.load_power_factor.end()) throw ProfileError("load profile " + std::to_string(id) + " has no power factor");
        double pf = pf0->second * (1.0 + draw(rng));
        pf = std::clamp(pf, std::numeric_limits<double>::min(), 1.0);
        const double ratio = reactive_ratio(pf);
        Profile q = p;
        q.kind = ProfileKind::LoadReactive;
        for (double& v : q.values) v *= ratio;
        out.load_reactive.emplace(id, std::move(q));
        out.applied_power_factor[id] = pf;
    }
    return out;
}

double noisy_read(const Profile& profile, std::size_t t, double sigma, std::mt19937_64& rng) {
    if (t >= profile.size()) {
        throw std::out_of_range("step " + std::to_string(t) + " outside profile of " + std::to_string(profile.size()));
    }
    if (sigma < 0.0) throw std::invalid_argument("noise sigma must be non-negative");
    double value = profile.values[t];
    if (sigma > 0.0) value *= 1.0 + std::normal_distribution<double>(0.0, sigma)(rng);
    if (profile.kind == ProfileKind::PvActive && value < 0.0) value = 0.0;
    return value;
}

ProfileStore load_bundle(const std::filesystem::path& dir, const NetworkCase& network, const BundleOptions& options) {
    std::ifstream manifest_in(dir / "manifest.json");
    if (!manifest_in) throw ProfileError("cannot open " + (dir / "manifest.json").string());
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(manifest_in);
    } catch (const nlohmann::json::exception& e) {
        throw ProfileError("manifest.json: " + std::string(e.what()));
    }

    ProfileStore store;
    try {
        const auto csv_path = dir / manifest.at("csv").get<std::string>();
        std::ifstream csv_in(csv_path);
        if (!csv_in) throw ProfileError("cannot open " + csv_path.string());
        std::stringstream buf;
        buf << csv_in.rdbuf();

        std::map<std::pair<ProfileKind, int>, Profile> by_column;
        for (Profile& p : ingest_csv(buf.str())) {
            Profile clean = remove_outliers(p, options.outlier_sigma);
            if (clean.resolution_s != options.resolution_s) clean = resample(clean, options.resolution_s);
            by_column.emplace(std::make_pair(clean.kind, clean.id), std::move(clean));
        }
        auto column = [&](const std::string& name, ProfileKind expected) -> const Profile& {
            const auto sep = name.rfind('_');
            auto kind = sep == std::string::npos ? std::nullopt : parse_kind(name.substr(0, sep));
            if (!kind || *kind != expected) throw ProfileError("manifest column '" + name + "' has the wrong kind");
            auto it = by_column.find({*kind, parse_number<int>(std::string_view(name).substr(sep + 1), name)});
            if (it == by_column.end()) throw ProfileError("manifest column '" + name + "' is not in the CSV");
            return it->second;
        };

        for (const auto& entry : manifest.at("loads")) {
            const Profile& p = column(entry.at("column").get<std::string>(), ProfileKind::LoadActive);
            const BusIndex bus = entry.at("bus").get<BusIndex>();
            const double pf = entry.at("power_factor").get<double>();
            auto [it, inserted] = store.load_power_factor.emplace(p.id, pf);
            if (!inserted && it->second != pf) {
                throw ProfileError("profile " + std::to_string(p.id) + " is shared by loads with different power factors");
            }
            store.load_active.emplace(p.id, p);
            store.load_profile[bus] = p.id;
        }
        for (const auto& entry : manifest.at("pvs")) {
            const Profile& p = column(entry.at("column").get<std::string>(), ProfileKind::PvActive);
            store.pv_active.emplace(p.id, p);
            store.pv_profile[entry.at("agent_id").get<int>()] = p.id;
        }

        const double pr = options.penetration_ratio.value_or(manifest.at("penetration_ratio").get<double>());
        const auto seed = options.power_factor_seed.value_or(manifest.value("power_factor_seed", std::uint64_t{0}));
        store = scale_penetration(store, network, pr);
        store = perturb_power_factor(store, seed);
    } catch (const nlohmann::json::exception& e) {
        throw ProfileError("manifest.json: " + std::string(e.what()));
    }
    store.validate(network);
    return store;
}

}  // namespace avc
