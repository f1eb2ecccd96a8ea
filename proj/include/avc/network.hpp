#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace avc {

/// Raised when a case document does not follow the schema. The message
/// starts with the JSON path of the offending field.
class ParseError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Raised when a structurally well-formed case breaks a network invariant.
class ValidationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class DegenerateBranchError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

using BusIndex = int;

struct Bus {
    BusIndex index = 0;
    double nominal_kv = 0.0;
    double v_min = 0.95;
    double v_max = 1.05;
};

struct Branch {
    BusIndex from_bus = 0;
    BusIndex to_bus = 0;
    double r = 0.0;  // per-unit
    double x = 0.0;  // per-unit
    double tap_ratio = 1.0;
    // Optional series current rating (per-unit); only used by the
    // branch-rating safety check.
    std::optional<double> i_max;
};

struct PvUnit {
    BusIndex bus = 0;
    int agent_id = 0;
    double s_max = 0.0;  // MVA
    int region_id = 0;
};

struct LoadUnit {
    BusIndex bus = 0;
    int profile_id = 0;
};

struct Region {
    int id = 0;
    std::vector<BusIndex> buses;  // sorted ascending
};

struct Admittance {
    double g = 0.0;
    double b = 0.0;
};

enum class StructuralFault { Cycle, Disconnected, OrphanBus, BadEndpoint };

struct StructuralError {
    StructuralFault fault;
    std::string message;
};

struct CaseHeader {
    std::string name;
    double base_power = 1.0;  // MVA
    double v_ref = 1.0;       // per-unit
    double action_bound = 0.8;
};

/// Immutable radial network description. Bus indices are labels: they need
/// not be contiguous, but the slack must carry index 0. Per-bus vectors used
/// throughout the library are ordered by bus position, i.e. by ascending
/// index, so the slack is always at position 0.
class NetworkCase {
  public:
    /// Builds a case and checks every structural invariant.
    /// Throws ValidationError on the first violation found.
    static NetworkCase create(CaseHeader header, std::vector<Bus> buses, std::vector<Branch> branches,
                              std::vector<PvUnit> pvs, std::vector<LoadUnit> loads,
                              std::vector<Region> regions);

    const std::string& name() const { return header_.name; }
    double base_power() const { return header_.base_power; }
    double v_ref() const { return header_.v_ref; }
    double action_bound() const { return header_.action_bound; }
    const CaseHeader& header() const { return header_; }

    const std::vector<Bus>& buses() const { return buses_; }
    const std::vector<Branch>& branches() const { return branches_; }
    /// PV units sorted by agent id; the position in this vector is the
    /// agent's slot in every action / reactive-power vector.
    const std::vector<PvUnit>& pv_units() const { return pvs_; }
    const std::vector<LoadUnit>& loads() const { return loads_; }
    const std::vector<Region>& regions() const { return regions_; }

    std::size_t bus_count() const { return buses_.size(); }
    std::size_t agent_count() const { return pvs_.size(); }
    BusIndex slack_bus() const { return 0; }

    bool has_bus(BusIndex index) const { return position_.contains(index); }
    /// Position of a bus label in per-bus vectors. Throws std::out_of_range.
    std::size_t position(BusIndex index) const;

    /// Region containing `bus`, or nullptr for unassigned buses.
    /// Throws std::out_of_range for unknown bus labels.
    const Region* region_of(BusIndex bus) const;
    const Region& region(int id) const;
    /// Slot of the PV unit with the given agent id. Throws std::out_of_range.
    std::size_t agent_slot(int agent_id) const;

  private:
    NetworkCase() = default;

    CaseHeader header_;
    std::vector<Bus> buses_;
    std::vector<Branch> branches_;
    std::vector<PvUnit> pvs_;
    std::vector<LoadUnit> loads_;
    std::vector<Region> regions_;
    std::unordered_map<BusIndex, std::size_t> position_;
    std::unordered_map<BusIndex, std::size_t> region_by_bus_;
    std::unordered_map<int, std::size_t> region_by_id_;
    std::unordered_map<int, std::size_t> slot_by_agent_;
};

/// Parses the JSON case document. Throws ParseError (schema) or
/// ValidationError (invariants).
NetworkCase parse_case(std::string_view document);
NetworkCase load_case(const std::filesystem::path& path);
std::string serialize_case(const NetworkCase& network);

/// Checks that the branch set is a spanning tree over the buses rooted at
/// bus 0. Returns the first fault found, or nullopt when radial.
std::optional<StructuralError> validate_radial(const std::vector<Bus>& buses, const std::vector<Branch>& branches);
std::optional<StructuralError> validate_radial(const NetworkCase& network);

/// Series admittance y = 1 / (r + jx).
Admittance branch_admittance(const Branch& branch);

const Region* region_of(const NetworkCase& network, BusIndex bus);

// Physical-unit view of a branch, used for import/export of ohmic data.
// The impedance base is taken from the receiving-end nominal voltage.
struct PhysicalBranch {
    BusIndex from_bus = 0;
    BusIndex to_bus = 0;
    double r_ohm = 0.0;
    double x_ohm = 0.0;
    double tap_ratio = 1.0;
};

double impedance_base_ohm(const NetworkCase& network, const Branch& branch);
PhysicalBranch to_physical(const NetworkCase& network, const Branch& branch);
Branch to_per_unit(const NetworkCase& network, const PhysicalBranch& branch);

inline double mw_to_pu(const NetworkCase& network, double mw) { return mw / network.base_power(); }
inline double pu_to_mw(const NetworkCase& network, double pu) { return pu * network.base_power(); }

}  // namespace avc
