#pragma once

#include <string>
#include <vector>

#include "avc/network.hpp"

namespace avc {

/// Device injections, one entry per bus position (ascending bus index).
/// Powers are physical: MW and MVAr. Several PVs on a bus are summed.
struct InjectionSet {
    std::vector<double> p_pv;
    std::vector<double> q_pv;
    std::vector<double> p_load;
    std::vector<double> q_load;

    static InjectionSet zeros(std::size_t bus_count);
    std::size_t size() const { return p_load.size(); }
};

struct SolverOptions {
    double tolerance = 1e-8;  // per-unit, max |mismatch|
    int max_iterations = 30;
};

struct GridState {
    std::vector<double> v;      // per-unit
    std::vector<double> theta;  // radians
    InjectionSet injections;
    double slack_p = 0.0;     // MW
    double slack_q = 0.0;     // MVAr
    double total_loss = 0.0;  // MW, series I^2 r over all branches
    bool converged = false;
    int iterations = 0;
    double max_mismatch = 0.0;  // per-unit
    std::vector<double> mismatch_history;
};

/// Newton-Raphson in polar coordinates from a flat start. Non-convergence
/// is reported through `converged == false`; the returned voltages are the
/// iterate with the smallest mismatch.
GridState solve_power_flow(const NetworkCase& network, const InjectionSet& injections, const SolverOptions& options = {});

/// Specified injection minus network-side injection for every non-slack
/// bus, laid out as [dP_1, dQ_1, dP_2, dQ_2, ...] in per-unit.
/// Throws std::invalid_argument on dimension mismatch.
std::vector<double> mismatch(const NetworkCase& network, const GridState& state);

/// Total series loss in MW. Throws std::logic_error for unconverged states.
double total_loss(const NetworkCase& network, const GridState& state);

/// Series current magnitude (per-unit) through every branch, in branch order.
std::vector<double> branch_currents(const NetworkCase& network, const GridState& state);

/// JSON dump of the iteration history and final residuals.
std::string dump_diagnostics(const NetworkCase& network, const GridState& state);

/// Closed-form relations for a single feeder section between a parent bus
/// and bus i. All quantities per-unit.
namespace two_bus {

/// Approximate voltage drop v_parent - v_i, normalised by the
/// receiving-end voltage `v`.
double voltage_drop(double r, double x, double p_load, double q_load, double p_pv, double q_pv, double v);

/// Series loss with the net flow normalised by the parent voltage.
double power_loss(double r, double p_load, double q_load, double p_pv, double q_pv, double v_parent);

/// PV reactive power that cancels the approximate voltage drop.
double zero_deviation_reactive(double r, double x, double p_load, double p_pv, double q_load);

}  // namespace two_bus

}  // namespace avc
