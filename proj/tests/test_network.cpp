#include <doctest.h>

#include <nlohmann/json.hpp>

#include "avc/network.hpp"
#include "support.hpp"

using namespace avc;
using nlohmann::json;

namespace {

json two_bus_doc() {
    return json::parse(R"({
      "name": "tiny", "base_power_mva": 1.0, "v_ref_pu": 1.0,
      "buses": [{"index": 0, "nominal_kv": 12.66, "v_min_pu": 0.95, "v_max_pu": 1.05},
                {"index": 1, "nominal_kv": 12.66, "v_min_pu": 0.95, "v_max_pu": 1.05}],
      "branches": [{"from": 0, "to": 1, "r_pu": 0.1, "x_pu": 0.1, "tap_ratio": 1.0}],
      "pvs": [{"bus": 1, "agent_id": 0, "s_max_mva": 0.3, "region": 1}],
      "loads": [{"bus": 1, "profile_id": 1}],
      "regions": [{"id": 1, "buses": [1]}]
    })");
}

}  // namespace

TEST_CASE("minimal two-bus document parses") {
    NetworkCase net = parse_case(two_bus_doc().dump());
    CHECK(net.bus_count() == 2);
    CHECK(net.branches().size() == 1);
    CHECK(net.agent_count() == 1);
    CHECK(net.action_bound() == doctest::Approx(0.8));
    CHECK_FALSE(validate_radial(net).has_value());
}

TEST_CASE("bundled 33-bus case matches the published dimensions") {
    NetworkCase net = load_case(test::case_path("case33"));
    CHECK(net.bus_count() == 33);
    CHECK(net.branches().size() == 32);
    CHECK(net.agent_count() == 6);
    CHECK(net.regions().size() == 4);
    CHECK(net.loads().size() == 32);
}

TEST_CASE("bundled 141-bus case is radial") {
    NetworkCase net = load_case(test::case_path("case141"));
    CHECK(net.bus_count() == 141);
    CHECK(net.branches().size() == 140);
    CHECK(net.agent_count() == 22);
    CHECK_FALSE(validate_radial(net).has_value());
}

TEST_CASE("duplicated branch closing a loop is rejected") {
    json doc = two_bus_doc();
    doc["buses"].push_back({{"index", 2}, {"nominal_kv", 12.66}, {"v_min_pu", 0.95}, {"v_max_pu", 1.05}});
    doc["branches"].push_back({{"from", 1}, {"to", 2}, {"r_pu", 0.1}, {"x_pu", 0.1}, {"tap_ratio", 1.0}});
    doc["branches"].push_back({{"from", 2}, {"to", 0}, {"r_pu", 0.1}, {"x_pu", 0.1}, {"tap_ratio", 1.0}});
    try {
        parse_case(doc.dump());
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("not a tree") != std::string::npos);
    }
}

TEST_CASE("validate_radial classifies structural faults") {
    std::vector<Bus> buses{{0, 12.66}, {1, 12.66}, {2, 12.66}};
    std::vector<Branch> cycle{test::line(0, 1, 0.1, 0.1), test::line(1, 2, 0.1, 0.1), test::line(2, 0, 0.1, 0.1)};
    auto err = validate_radial(buses, cycle);
    REQUIRE(err);
    CHECK(err->fault == StructuralFault::Cycle);

    std::vector<Branch> orphan{test::line(0, 1, 0.1, 0.1)};
    err = validate_radial(buses, orphan);
    REQUIRE(err);
    CHECK(err->fault == StructuralFault::OrphanBus);

    std::vector<Branch> dangling{test::line(0, 1, 0.1, 0.1), test::line(1, 7, 0.1, 0.1)};
    err = validate_radial(buses, dangling);
    REQUIRE(err);
    CHECK(err->fault == StructuralFault::BadEndpoint);

    std::vector<Branch> tree{test::line(0, 1, 0.1, 0.1), test::line(1, 2, 0.1, 0.1)};
    CHECK_FALSE(validate_radial(buses, tree));
}

TEST_CASE("schema errors name the offending field") {
    json doc = two_bus_doc();
    doc["branches"][0].erase("x_pu");
    try {
        parse_case(doc.dump());
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("x_pu") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_case("{not json"), ParseError);
    CHECK_THROWS_AS(load_case("/nonexistent/case.json"), ParseError);
}

TEST_CASE("a bus listed in two regions is rejected") {
    json doc = two_bus_doc();
    doc["regions"].push_back({{"id", 2}, {"buses", {1}}});
    CHECK_THROWS_AS(parse_case(doc.dump()), ValidationError);
}

TEST_CASE("branch admittance") {
    Admittance y = branch_admittance(test::line(0, 1, 0.0, 1.0));
    CHECK(y.g == doctest::Approx(0.0));
    CHECK(y.b == doctest::Approx(-1.0));

    y = branch_admittance(test::line(0, 1, 1.0, 1e-4));
    CHECK(y.g == doctest::Approx(1.0).epsilon(1e-6));

    y = branch_admittance(test::line(0, 1, 0.1, 0.1));
    CHECK(y.g == doctest::Approx(5.0));
    CHECK(y.b == doctest::Approx(-5.0));

    CHECK_THROWS_AS(branch_admittance(test::line(0, 1, 0.0, 0.0)), DegenerateBranchError);
}

TEST_CASE("region lookup on the 33-bus case") {
    NetworkCase net = load_case(test::case_path("case33"));
    const Region* r = region_of(net, 18);
    REQUIRE(r);
    CHECK(r->id == 1);
    REQUIRE(region_of(net, 13));
    CHECK(region_of(net, 13)->id == 1);
    CHECK(region_of(net, 0) == nullptr);
    CHECK_THROWS_AS(region_of(net, 1), std::out_of_range);
}

TEST_CASE("every PV agent resolves to exactly one region") {
    for (const char* name : {"case33", "case141"}) {
        NetworkCase net = load_case(test::case_path(name));
        for (const PvUnit& pv : net.pv_units()) {
            const Region* r = region_of(net, pv.bus);
            REQUIRE(r);
            CHECK(r->id == pv.region_id);
        }
    }
}

TEST_CASE("parse, serialize, parse round-trips") {
    for (const char* name : {"case2", "case33", "case141"}) {
        NetworkCase a = load_case(test::case_path(name));
        NetworkCase b = parse_case(serialize_case(a));
        CHECK(serialize_case(b) == serialize_case(a));
        REQUIRE(a.bus_count() == b.bus_count());
        for (std::size_t i = 0; i < a.branches().size(); ++i) {
            CHECK(a.branches()[i].r == b.branches()[i].r);
            CHECK(a.branches()[i].x == b.branches()[i].x);
            CHECK(a.branches()[i].tap_ratio == b.branches()[i].tap_ratio);
        }
        CHECK(a.pv_units().size() == b.pv_units().size());
        CHECK(a.regions().size() == b.regions().size());
    }
}

TEST_CASE("per-unit to physical and back is identity") {
    NetworkCase net = load_case(test::case_path("case141"));
    for (const Branch& br : net.branches()) {
        Branch back = to_per_unit(net, to_physical(net, br));
        CHECK(std::abs(back.r - br.r) <= 1e-12 * std::max(1.0, std::abs(br.r)));
        CHECK(std::abs(back.x - br.x) <= 1e-12 * std::max(1.0, std::abs(br.x)));
    }
    CHECK(pu_to_mw(net, mw_to_pu(net, 3.7)) == doctest::Approx(3.7).epsilon(1e-12));
}

TEST_CASE("non-contiguous bus labels keep the slack at position 0") {
    NetworkCase net = load_case(test::case_path("case33"));
    CHECK(net.buses().front().index == 0);
    CHECK_FALSE(net.has_bus(1));
    CHECK(net.position(2) == 1);
    for (std::size_t i = 1; i < net.bus_count(); ++i) CHECK(net.buses()[i - 1].index < net.buses()[i].index);
}
