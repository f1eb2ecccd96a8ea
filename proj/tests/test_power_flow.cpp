#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "avc/power_flow.hpp"
#include "support.hpp"

using namespace avc;

namespace {

InjectionSet two_bus_load(double p, double q) {
    InjectionSet inj = InjectionSet::zeros(2);
    inj.p_load[1] = p;
    inj.q_load[1] = q;
    return inj;
}

InjectionSet random_injections(const NetworkCase& net, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> load(0.0, 0.25);
    std::uniform_real_distribution<double> pf(0.0, 0.6);
    std::uniform_real_distribution<double> pv(0.0, 1.2);
    std::uniform_real_distribution<double> q(-0.5, 0.5);
    InjectionSet inj = InjectionSet::zeros(net.bus_count());
    for (std::size_t i = 1; i < net.bus_count(); ++i) {
        inj.p_load[i] = load(rng);
        inj.q_load[i] = inj.p_load[i] * pf(rng);
    }
    for (const PvUnit& u : net.pv_units()) {
        inj.p_pv[net.position(u.bus)] += pv(rng);
        inj.q_pv[net.position(u.bus)] += q(rng);
    }
    return inj;
}

}  // namespace

TEST_CASE("zero injections give the flat solution in one iteration") {
    NetworkCase net = load_case(test::case_path("case33"));
    GridState g = solve_power_flow(net, InjectionSet::zeros(net.bus_count()));
    REQUIRE(g.converged);
    CHECK(g.iterations == 1);
    for (std::size_t i = 0; i < net.bus_count(); ++i) {
        CHECK(g.v[i] == doctest::Approx(net.v_ref()));
        CHECK(g.theta[i] == doctest::Approx(0.0));
    }
    CHECK(total_loss(net, g) == doctest::Approx(0.0));
    for (double r : mismatch(net, g)) CHECK(std::abs(r) <= 1e-12);
}

TEST_CASE("two-bus voltage matches the fixed-point oracle") {
    NetworkCase net = load_case(test::case_path("case2"));
    GridState g = solve_power_flow(net, two_bus_load(0.1, 0.05));
    REQUIRE(g.converged);
    const double oracle = test::two_bus_fixed_point(0.1, 0.1, 0.1, 0.05);
    CHECK(std::abs(g.v[1] - oracle) <= 1e-6);
    CHECK(g.max_mismatch <= 1e-8);
}

TEST_CASE("loading far beyond loadability does not converge") {
    NetworkCase net = load_case(test::case_path("case2"));
    GridState g = solve_power_flow(net, two_bus_load(10.0, 5.0));
    CHECK_FALSE(g.converged);
    CHECK(g.v.size() == 2);
    CHECK_THROWS_AS(total_loss(net, g), std::logic_error);
}

TEST_CASE("flat-state residual equals the unserved load") {
    NetworkCase net = load_case(test::case_path("case2"));
    GridState flat;
    flat.v = {1.0, 1.0};
    flat.theta = {0.0, 0.0};
    flat.injections = two_bus_load(0.1, 0.0);
    const auto r = mismatch(net, flat);
    REQUIRE(r.size() == 2);
    CHECK(r[0] == doctest::Approx(-0.1));
    CHECK(r[1] == doctest::Approx(0.0));

    flat.injections = InjectionSet::zeros(3);
    CHECK_THROWS_AS(mismatch(net, flat), std::invalid_argument);
}

TEST_CASE("randomized 33-bus injections: residual, balance, loss sign") {
    NetworkCase net = load_case(test::case_path("case33"));
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        InjectionSet inj = random_injections(net, rng);
        GridState g = solve_power_flow(net, inj);
        REQUIRE(g.converged);
        double worst = 0.0;
        for (double r : mismatch(net, g)) worst = std::max(worst, std::abs(r));
        CHECK(worst <= 1e-8);
        CHECK(g.total_loss >= 0.0);

        double p_pv = 0, p_load = 0;
        for (std::size_t i = 0; i < net.bus_count(); ++i) {
            p_pv += inj.p_pv[i];
            p_load += inj.p_load[i];
        }
        CHECK(std::abs(g.slack_p + p_pv - p_load - g.total_loss) <= 1e-6);
    }
}

TEST_CASE("reactive balance with series reactive losses") {
    NetworkCase net = load_case(test::case_path("case33"));
    std::mt19937_64 rng(5);
    InjectionSet inj = random_injections(net, rng);
    GridState g = solve_power_flow(net, inj);
    REQUIRE(g.converged);
    const auto currents = branch_currents(net, g);
    double q_loss = 0.0;
    for (std::size_t k = 0; k < currents.size(); ++k) q_loss += currents[k] * currents[k] * net.branches()[k].x;
    q_loss *= net.base_power();
    double q_pv = 0, q_load = 0;
    for (std::size_t i = 0; i < net.bus_count(); ++i) {
        q_pv += inj.q_pv[i];
        q_load += inj.q_load[i];
    }
    CHECK(std::abs(g.slack_q + q_pv - q_load - q_loss) <= 1e-6);
}

TEST_CASE("solves are bit-identical across runs") {
    NetworkCase net = load_case(test::case_path("case141"));
    std::mt19937_64 rng(9);
    InjectionSet inj = InjectionSet::zeros(net.bus_count());
    for (std::size_t i = 1; i < net.bus_count(); ++i) inj.p_load[i] = std::uniform_real_distribution<double>(0, 0.1)(rng);
    GridState a = solve_power_flow(net, inj);
    GridState b = solve_power_flow(net, inj);
    REQUIRE(a.converged);
    CHECK(a.v == b.v);
    CHECK(a.theta == b.theta);
    CHECK(a.total_loss == b.total_loss);
}

TEST_CASE("two-bus loss agrees with the closed form and grows with resistance") {
    NetworkCase net = load_case(test::case_path("case2"));
    GridState g = solve_power_flow(net, two_bus_load(0.1, 0.05));
    REQUIRE(g.converged);
    const double closed = two_bus::power_loss(0.1, 0.1, 0.05, 0.0, 0.0, 1.0);
    const double dv = 1.0 - g.v[1];
    CHECK(std::abs(total_loss(net, g) - closed) <= 10 * dv * dv);

    NetworkCase doubled = NetworkCase::create(net.header(), net.buses(), {test::line(0, 1, 0.2, 0.1)}, net.pv_units(),
                                              net.loads(), net.regions());
    GridState h = solve_power_flow(doubled, two_bus_load(0.1, 0.05));
    REQUIRE(h.converged);
    CHECK(total_loss(doubled, h) > total_loss(net, g));
}

TEST_CASE("off-nominal tap shifts the downstream voltage") {
    NetworkCase net = load_case(test::case_path("case2"));
    Branch tapped = test::line(0, 1, 0.01, 0.05);
    tapped.tap_ratio = 1.05;
    NetworkCase t = NetworkCase::create(net.header(), net.buses(), {tapped}, net.pv_units(), net.loads(), net.regions());
    GridState g = solve_power_flow(t, InjectionSet::zeros(2));
    REQUIRE(g.converged);
    CHECK(g.v[1] == doctest::Approx(1.0 / 1.05).epsilon(1e-9));
}

TEST_CASE("closed-form two-bus relations") {
    CHECK(two_bus::voltage_drop(0.1, 0.1, 0, 0, 0, 0, 1.0) == 0.0);
    CHECK(two_bus::voltage_drop(0.1, 0.1, 0.1, 0.05, 0, 0, 1.0) == doctest::Approx(0.015));
    CHECK(two_bus::voltage_drop(0.1, 0.1, 0.1, 0.05, 0.1, 0.05, 1.0) == 0.0);

    CHECK(two_bus::power_loss(0.1, 0.2, 0.1, 0.2, 0.1, 1.0) == 0.0);
    CHECK(two_bus::power_loss(0.1, 0.1, 0.05, 0, 0, 1.0) == doctest::Approx(0.00125));

    CHECK(two_bus::zero_deviation_reactive(0.1, 0.2, 0.3, 0.3, 0.07) == doctest::Approx(0.07));
    const double q = two_bus::zero_deviation_reactive(0.1, 0.1, 0.1, 0.5, 0.05);
    CHECK(q == doctest::Approx(-0.35));
    CHECK(two_bus::voltage_drop(0.1, 0.1, 0.1, 0.05, 0.5, q, 1.0) == doctest::Approx(0.0));
}

TEST_CASE("approximate drop error shrinks quadratically") {
    NetworkCase base = load_case(test::case_path("case2"));
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> xr(0.5, 3.0), qp(0.0, 0.15), p(0.05, 0.2);
    const SolverOptions tight{1e-13, 50};
    for (int trial = 0; trial < 20; ++trial) {
        const double r = 0.05;
        const double x = r * xr(rng);
        const double pl = p(rng);
        const double ql = pl * qp(rng);
        NetworkCase net = NetworkCase::create(base.header(), base.buses(), {test::line(0, 1, r, x)}, base.pv_units(),
                                              base.loads(), base.regions());
        auto error = [&](double scale) {
            GridState g = solve_power_flow(net, two_bus_load(pl * scale, ql * scale), tight);
            REQUIRE(g.converged);
            const double exact = 1.0 - g.v[1];
            return std::abs(exact - two_bus::voltage_drop(r, x, pl * scale, ql * scale, 0, 0, g.v[1]));
        };
        const double ratio = error(1.0) / error(0.5);
        CHECK(ratio >= 3.5);
        CHECK(ratio <= 4.5);
    }
}

TEST_CASE("diagnostics dump is structured") {
    NetworkCase net = load_case(test::case_path("case2"));
    GridState g = solve_power_flow(net, two_bus_load(0.1, 0.05));
    auto doc = nlohmann::json::parse(dump_diagnostics(net, g));
    CHECK(doc.contains("converged"));
    CHECK(doc.at("converged").get<bool>());
}
