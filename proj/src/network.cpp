#include "avc/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace avc {

namespace {

using nlohmann::json;

std::string bus_name(BusIndex b) { return "bus " + std::to_string(b); }

// Disjoint-set forest over bus positions.
class UnionFind {
  public:
    explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }

    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    bool unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        parent_[b] = a;
        return true;
    }

  private:
    std::vector<std::size_t> parent_;
};

const json& require(const json& obj, const char* key, const std::string& path) {
    if (!obj.is_object()) throw ParseError(path + ": expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(path + "." + key + ": missing field");
    return *it;
}

double number(const json& obj, const char* key, const std::string& path) {
    const json& v = require(obj, key, path);
    if (!v.is_number()) throw ParseError(path + "." + key + ": expected a number");
    return v.get<double>();
}

double number_or(const json& obj, const char* key, const std::string& path, double fallback) {
    if (!obj.contains(key)) return fallback;
    return number(obj, key, path);
}

int integer(const json& obj, const char* key, const std::string& path) {
    const json& v = require(obj, key, path);
    if (!v.is_number_integer()) throw ParseError(path + "." + key + ": expected an integer");
    return v.get<int>();
}

const json& array(const json& obj, const char* key, const std::string& path) {
    const json& v = require(obj, key, path);
    if (!v.is_array()) throw ParseError(path + "." + key + ": expected an array");
    return v;
}

std::string item_path(const char* key, std::size_t i) { return std::string(key) + "[" + std::to_string(i) + "]"; }

}  // namespace

std::optional<StructuralError> validate_radial(const std::vector<Bus>& buses, const std::vector<Branch>& branches) {
    std::unordered_map<BusIndex, std::size_t> pos;
    for (std::size_t i = 0; i < buses.size(); ++i) pos.emplace(buses[i].index, i);
    if (!pos.contains(0)) return StructuralError{StructuralFault::Disconnected, "no slack bus with index 0"};

    std::vector<int> degree(buses.size(), 0);
    UnionFind forest(buses.size());
    for (const Branch& br : branches) {
        auto f = pos.find(br.from_bus);
        auto t = pos.find(br.to_bus);
        if (f == pos.end() || t == pos.end()) {
            BusIndex missing = f == pos.end() ? br.from_bus : br.to_bus;
            return StructuralError{StructuralFault::BadEndpoint, "branch references unknown " + bus_name(missing)};
        }
        if (f->second == t->second) {
            return StructuralError{StructuralFault::BadEndpoint, "branch connects " + bus_name(br.from_bus) + " to itself"};
        }
        if (!forest.unite(f->second, t->second)) {
            return StructuralError{StructuralFault::Cycle, "not a tree: branch " + std::to_string(br.from_bus) + "-" +
                                                              std::to_string(br.to_bus) + " closes a cycle"};
        }
        ++degree[f->second];
        ++degree[t->second];
    }
    if (buses.size() > 1) {
        for (std::size_t i = 0; i < buses.size(); ++i) {
            if (degree[i] == 0) {
                return StructuralError{StructuralFault::OrphanBus, "orphan " + bus_name(buses[i].index) + " has no branch"};
            }
        }
    }
    std::size_t root = forest.find(pos.at(0));
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (forest.find(i) != root) {
            return StructuralError{StructuralFault::Disconnected,
                                   bus_name(buses[i].index) + " is in a component disconnected from the slack"};
        }
    }
    return std::nullopt;
}

std::optional<StructuralError> validate_radial(const NetworkCase& network) {
    return validate_radial(network.buses(), network.branches());
}

NetworkCase NetworkCase::create(CaseHeader header, std::vector<Bus> buses, std::vector<Branch> branches,
                                std::vector<PvUnit> pvs, std::vector<LoadUnit> loads, std::vector<Region> regions) {
    if (!(header.base_power > 0)) throw ValidationError("base_power must be positive");
    if (!(header.v_ref > 0)) throw ValidationError("v_ref must be positive");
    if (!(header.action_bound > 0)) throw ValidationError("action bound c must be positive");
    if (buses.empty()) throw ValidationError("case has no buses");

    std::sort(buses.begin(), buses.end(), [](const Bus& a, const Bus& b) { return a.index < b.index; });
    for (std::size_t i = 1; i < buses.size(); ++i) {
        if (buses[i].index == buses[i - 1].index) throw ValidationError("duplicate " + bus_name(buses[i].index));
    }
    if (buses.front().index != 0) throw ValidationError("slack bus must have index 0 and be the lowest index");
    for (const Bus& b : buses) {
        if (!(b.nominal_kv > 0)) throw ValidationError(bus_name(b.index) + ": nominal_kv must be positive");
        if (!(b.v_min < header.v_ref && header.v_ref < b.v_max)) {
            throw ValidationError(bus_name(b.index) + ": requires v_min < v_ref < v_max");
        }
    }
    for (const Branch& br : branches) {
        std::string id = "branch " + std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus);
        if (!(br.r >= 0)) throw ValidationError(id + ": r must be >= 0");
        if (!(br.x > 0)) throw ValidationError(id + ": x must be > 0");
        if (!(br.tap_ratio > 0)) throw ValidationError(id + ": tap_ratio must be > 0");
        if (br.i_max && !(*br.i_max > 0)) throw ValidationError(id + ": i_max must be > 0");
    }
    if (branches.size() + 1 != buses.size() && buses.size() > 0) {
        if (auto err = validate_radial(buses, branches)) throw ValidationError(err->message);
        throw ValidationError("not a tree: " + std::to_string(branches.size()) + " branches for " +
                              std::to_string(buses.size()) + " buses");
    }
    if (auto err = validate_radial(buses, branches)) throw ValidationError(err->message);

    NetworkCase nc;
    nc.header_ = std::move(header);
    for (std::size_t i = 0; i < buses.size(); ++i) nc.position_.emplace(buses[i].index, i);

    std::sort(regions.begin(), regions.end(), [](const Region& a, const Region& b) { return a.id < b.id; });
    for (std::size_t r = 0; r < regions.size(); ++r) {
        Region& reg = regions[r];
        if (reg.buses.empty()) throw ValidationError("region " + std::to_string(reg.id) + " is empty");
        if (!nc.region_by_id_.emplace(reg.id, r).second) {
            throw ValidationError("duplicate region id " + std::to_string(reg.id));
        }
        std::sort(reg.buses.begin(), reg.buses.end());
        for (BusIndex b : reg.buses) {
            if (!nc.position_.contains(b)) {
                throw ValidationError("region " + std::to_string(reg.id) + " references unknown " + bus_name(b));
            }
            if (b == 0) throw ValidationError("region " + std::to_string(reg.id) + " contains the slack bus");
            if (!nc.region_by_bus_.emplace(b, r).second) {
                throw ValidationError(bus_name(b) + " belongs to more than one region");
            }
        }
    }

    std::set<BusIndex> load_buses;
    for (const LoadUnit& l : loads) {
        if (!nc.position_.contains(l.bus)) throw ValidationError("load references unknown " + bus_name(l.bus));
        if (!load_buses.insert(l.bus).second) throw ValidationError("more than one load on " + bus_name(l.bus));
    }
    std::sort(loads.begin(), loads.end(), [](const LoadUnit& a, const LoadUnit& b) { return a.bus < b.bus; });

    std::sort(pvs.begin(), pvs.end(), [](const PvUnit& a, const PvUnit& b) { return a.agent_id < b.agent_id; });
    for (std::size_t k = 0; k < pvs.size(); ++k) {
        const PvUnit& pv = pvs[k];
        std::string id = "pv agent " + std::to_string(pv.agent_id);
        if (!nc.slot_by_agent_.emplace(pv.agent_id, k).second) throw ValidationError("duplicate " + id);
        if (!nc.position_.contains(pv.bus)) throw ValidationError(id + " references unknown " + bus_name(pv.bus));
        if (!(pv.s_max > 0)) throw ValidationError(id + ": s_max must be positive");
        auto reg = nc.region_by_bus_.find(pv.bus);
        if (reg == nc.region_by_bus_.end()) throw ValidationError(id + ": " + bus_name(pv.bus) + " is in no region");
        if (regions[reg->second].id != pv.region_id) {
            throw ValidationError(id + ": declared region " + std::to_string(pv.region_id) + " but " +
                                  bus_name(pv.bus) + " is in region " + std::to_string(regions[reg->second].id));
        }
    }

    nc.buses_ = std::move(buses);
    nc.branches_ = std::move(branches);
    nc.pvs_ = std::move(pvs);
    nc.loads_ = std::move(loads);
    nc.regions_ = std::move(regions);
    return nc;
}

std::size_t NetworkCase::position(BusIndex index) const {
    auto it = position_.find(index);
    if (it == position_.end()) throw std::out_of_range("unknown " + bus_name(index));
    return it->second;
}

const Region* NetworkCase::region_of(BusIndex bus) const {
    if (!has_bus(bus)) throw std::out_of_range("unknown " + bus_name(bus));
    auto it = region_by_bus_.find(bus);
    return it == region_by_bus_.end() ? nullptr : &regions_[it->second];
}

const Region& NetworkCase::region(int id) const {
    auto it = region_by_id_.find(id);
    if (it == region_by_id_.end()) throw std::out_of_range("unknown region " + std::to_string(id));
    return regions_[it->second];
}

std::size_t NetworkCase::agent_slot(int agent_id) const {
    auto it = slot_by_agent_.find(agent_id);
    if (it == slot_by_agent_.end()) throw std::out_of_range("unknown agent " + std::to_string(agent_id));
    return it->second;
}

const Region* region_of(const NetworkCase& network, BusIndex bus) { return network.region_of(bus); }

Admittance branch_admittance(const Branch& branch) {
    double z2 = branch.r * branch.r + branch.x * branch.x;
    if (!(z2 > 0)) throw DegenerateBranchError("zero-impedance branch");
    return {branch.r / z2, -branch.x / z2};
}

double impedance_base_ohm(const NetworkCase& network, const Branch& branch) {
    double kv = network.buses()[network.position(branch.to_bus)].nominal_kv;
    return kv * kv / network.base_power();
}

PhysicalBranch to_physical(const NetworkCase& network, const Branch& branch) {
    double z = impedance_base_ohm(network, branch);
    return {branch.from_bus, branch.to_bus, branch.r * z, branch.x * z, branch.tap_ratio};
}

Branch to_per_unit(const NetworkCase& network, const PhysicalBranch& branch) {
    Branch out;
    out.from_bus = branch.from_bus;
    out.to_bus = branch.to_bus;
    out.tap_ratio = branch.tap_ratio;
    double z = impedance_base_ohm(network, out);
    out.r = branch.r_ohm / z;
    out.x = branch.x_ohm / z;
    return out;
}

NetworkCase parse_case(std::string_view document) {
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("document: ") + e.what());
    }
    const std::string root = "case";
    CaseHeader header;
    const json& name = require(doc, "name", root);
    if (!name.is_string()) throw ParseError("case.name: expected a string");
    header.name = name.get<std::string>();
    header.base_power = number_or(doc, "base_power_mva", root, 1.0);
    header.v_ref = number(doc, "v_ref_pu", root);
    header.action_bound = number_or(doc, "action_bound", root, 0.8);

    std::vector<Bus> buses;
    const json& jb = array(doc, "buses", root);
    for (std::size_t i = 0; i < jb.size(); ++i) {
        std::string p = item_path("buses", i);
        Bus b;
        b.index = integer(jb[i], "index", p);
        b.nominal_kv = number(jb[i], "nominal_kv", p);
        b.v_min = number_or(jb[i], "v_min_pu", p, 0.95);
        b.v_max = number_or(jb[i], "v_max_pu", p, 1.05);
        buses.push_back(b);
    }

    std::vector<Branch> branches;
    const json& jl = array(doc, "branches", root);
    for (std::size_t i = 0; i < jl.size(); ++i) {
        std::string p = item_path("branches", i);
        Branch br;
        br.from_bus = integer(jl[i], "from", p);
        br.to_bus = integer(jl[i], "to", p);
        br.r = number(jl[i], "r_pu", p);
        br.x = number(jl[i], "x_pu", p);
        br.tap_ratio = number_or(jl[i], "tap_ratio", p, 1.0);
        if (jl[i].contains("i_max_pu")) br.i_max = number(jl[i], "i_max_pu", p);
        branches.push_back(br);
    }

    std::vector<PvUnit> pvs;
    const json& jp = array(doc, "pvs", root);
    for (std::size_t i = 0; i < jp.size(); ++i) {
        std::string p = item_path("pvs", i);
        PvUnit pv;
        pv.bus = integer(jp[i], "bus", p);
        pv.agent_id = integer(jp[i], "agent_id", p);
        pv.s_max = number(jp[i], "s_max_mva", p);
        pv.region_id = integer(jp[i], "region", p);
        pvs.push_back(pv);
    }

    std::vector<LoadUnit> loads;
    const json& jd = array(doc, "loads", root);
    for (std::size_t i = 0; i < jd.size(); ++i) {
        std::string p = item_path("loads", i);
        loads.push_back({integer(jd[i], "bus", p), integer(jd[i], "profile_id", p)});
    }

    std::vector<Region> regions;
    const json& jr = array(doc, "regions", root);
    for (std::size_t i = 0; i < jr.size(); ++i) {
        std::string p = item_path("regions", i);
        Region reg;
        reg.id = integer(jr[i], "id", p);
        const json& members = array(jr[i], "buses", p);
        for (std::size_t k = 0; k < members.size(); ++k) {
            if (!members[k].is_number_integer()) {
                throw ParseError(p + ".buses[" + std::to_string(k) + "]: expected an integer");
            }
            reg.buses.push_back(members[k].get<int>());
        }
        regions.push_back(std::move(reg));
    }

    return NetworkCase::create(std::move(header), std::move(buses), std::move(branches), std::move(pvs),
                               std::move(loads), std::move(regions));
}

NetworkCase load_case(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string() + ": cannot open case file");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_case(buf.str());
}

std::string serialize_case(const NetworkCase& network) {
    json doc;
    doc["name"] = network.name();
    doc["base_power_mva"] = network.base_power();
    doc["v_ref_pu"] = network.v_ref();
    doc["action_bound"] = network.action_bound();
    doc["buses"] = json::array();
    for (const Bus& b : network.buses()) {
        doc["buses"].push_back({{"index", b.index}, {"nominal_kv", b.nominal_kv}, {"v_min_pu", b.v_min}, {"v_max_pu", b.v_max}});
    }
    doc["branches"] = json::array();
    for (const Branch& br : network.branches()) {
        json j = {{"from", br.from_bus}, {"to", br.to_bus}, {"r_pu", br.r}, {"x_pu", br.x}, {"tap_ratio", br.tap_ratio}};
        if (br.i_max) j["i_max_pu"] = *br.i_max;
        doc["branches"].push_back(j);
    }
    doc["pvs"] = json::array();
    for (const PvUnit& pv : network.pv_units()) {
        doc["pvs"].push_back({{"bus", pv.bus}, {"agent_id", pv.agent_id}, {"s_max_mva", pv.s_max}, {"region", pv.region_id}});
    }
    doc["loads"] = json::array();
    for (const LoadUnit& l : network.loads()) doc["loads"].push_back({{"bus", l.bus}, {"profile_id", l.profile_id}});
    doc["regions"] = json::array();
    for (const Region& r : network.regions()) doc["regions"].push_back({{"id", r.id}, {"buses", r.buses}});
    return doc.dump(1);
}

}  // namespace avc
