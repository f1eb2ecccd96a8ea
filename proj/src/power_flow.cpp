#include "avc/power_flow.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <nlohmann/json.hpp>

namespace avc {

namespace {

using Complex = std::complex<double>;
using YMatrix = Eigen::SparseMatrix<Complex, Eigen::RowMajor>;

YMatrix build_admittance(const NetworkCase& network) {
    const std::size_t n = network.bus_count();
    std::vector<Eigen::Triplet<Complex>> entries;
    entries.reserve(4 * network.branches().size());
    for (const Branch& br : network.branches()) {
        Admittance a = branch_admittance(br);
        Complex y(a.g, a.b);
        auto f = static_cast<int>(network.position(br.from_bus));
        auto t = static_cast<int>(network.position(br.to_bus));
        double tap = br.tap_ratio;
        entries.emplace_back(f, f, y / (tap * tap));
        entries.emplace_back(t, t, y);
        entries.emplace_back(f, t, -y / tap);
        entries.emplace_back(t, f, -y / tap);
    }
    YMatrix ybus(static_cast<int>(n), static_cast<int>(n));
    ybus.setFromTriplets(entries.begin(), entries.end());
    return ybus;
}

// Network-side complex injections S_i = V_i conj(sum_k Y_ik V_k), per-unit.
std::vector<Complex> network_injection(const YMatrix& ybus, const std::vector<double>& v, const std::vector<double>& theta) {
    const auto n = static_cast<std::size_t>(ybus.rows());
    std::vector<Complex> volt(n);
    for (std::size_t i = 0; i < n; ++i) volt[i] = std::polar(v[i], theta[i]);
    std::vector<Complex> s(n);
    for (int i = 0; i < ybus.outerSize(); ++i) {
        Complex current(0.0, 0.0);
        for (YMatrix::InnerIterator it(ybus, i); it; ++it) current += it.value() * volt[static_cast<std::size_t>(it.col())];
        s[static_cast<std::size_t>(i)] = volt[static_cast<std::size_t>(i)] * std::conj(current);
    }
    return s;
}

void check_dimensions(const NetworkCase& network, const InjectionSet& inj) {
    const std::size_t n = network.bus_count();
    if (inj.p_pv.size() != n || inj.q_pv.size() != n || inj.p_load.size() != n || inj.q_load.size() != n) {
        throw std::invalid_argument("injection vectors must have one entry per bus");
    }
}

struct Specified {
    std::vector<double> p;
    std::vector<double> q;
};

Specified specified_injection(const NetworkCase& network, const InjectionSet& inj) {
    const std::size_t n = network.bus_count();
    Specified s{std::vector<double>(n), std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        s.p[i] = mw_to_pu(network, inj.p_pv[i] - inj.p_load[i]);
        s.q[i] = mw_to_pu(network, inj.q_pv[i] - inj.q_load[i]);
    }
    return s;
}

double max_abs_mismatch(const Specified& spec, const std::vector<Complex>& calc) {
    double worst = 0.0;
    for (std::size_t i = 1; i < calc.size(); ++i) {
        worst = std::max(worst, std::abs(spec.p[i] - calc[i].real()));
        worst = std::max(worst, std::abs(spec.q[i] - calc[i].imag()));
    }
    return worst;
}

void finalize(const NetworkCase& network, const YMatrix& ybus, GridState& state) {
    auto s = network_injection(ybus, state.v, state.theta);
    state.slack_p = pu_to_mw(network, s[0].real());
    state.slack_q = pu_to_mw(network, s[0].imag());
    double loss = 0.0;
    auto currents = branch_currents(network, state);
    for (std::size_t k = 0; k < currents.size(); ++k) loss += currents[k] * currents[k] * network.branches()[k].r;
    state.total_loss = pu_to_mw(network, loss);
}

}  // namespace

InjectionSet InjectionSet::zeros(std::size_t bus_count) {
    return {std::vector<double>(bus_count, 0.0), std::vector<double>(bus_count, 0.0),
            std::vector<double>(bus_count, 0.0), std::vector<double>(bus_count, 0.0)};
}

GridState solve_power_flow(const NetworkCase& network, const InjectionSet& injections, const SolverOptions& options) {
    check_dimensions(network, injections);
    for (std::size_t i = 0; i < injections.size(); ++i) {
        if (!std::isfinite(injections.p_pv[i]) || !std::isfinite(injections.q_pv[i]) ||
            !std::isfinite(injections.p_load[i]) || !std::isfinite(injections.q_load[i])) {
            throw std::invalid_argument("injections must be finite");
        }
    }

    const std::size_t n = network.bus_count();
    const YMatrix ybus = build_admittance(network);
    const Specified spec = specified_injection(network, injections);

    GridState state;
    state.injections = injections;
    state.v.assign(n, network.v_ref());
    state.theta.assign(n, 0.0);

    // Unknowns: theta for buses 1..n-1, then v for buses 1..n-1.
    const int m = static_cast<int>(n) - 1;
    if (m == 0) {
        state.converged = true;
        state.iterations = 1;
        finalize(network, ybus, state);
        return state;
    }
    auto theta_row = [](std::size_t bus) { return static_cast<int>(bus) - 1; };
    auto v_row = [m](std::size_t bus) { return m + static_cast<int>(bus) - 1; };

    Eigen::SparseMatrix<double> jac(2 * m, 2 * m);
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    bool pattern_ready = false;
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(static_cast<std::size_t>(4 * ybus.nonZeros()));
    Eigen::VectorXd rhs(2 * m);

    std::vector<double> best_v = state.v;
    std::vector<double> best_theta = state.theta;
    double best_mismatch = std::numeric_limits<double>::infinity();

    for (int iter = 1; iter <= options.max_iterations + 1; ++iter) {
        auto calc = network_injection(ybus, state.v, state.theta);
        double worst = max_abs_mismatch(spec, calc);
        state.mismatch_history.push_back(worst);
        state.iterations = iter;
        if (!std::isfinite(worst)) break;
        if (worst < best_mismatch) {
            best_mismatch = worst;
            best_v = state.v;
            best_theta = state.theta;
        }
        if (worst <= options.tolerance) {
            state.converged = true;
            break;
        }
        if (iter > options.max_iterations || worst > 1e6) break;

        entries.clear();
        for (std::size_t i = 1; i < n; ++i) {
            const double vi = state.v[i];
            const double p = calc[i].real();
            const double q = calc[i].imag();
            rhs(theta_row(i)) = spec.p[i] - p;
            rhs(v_row(i)) = spec.q[i] - q;
            for (YMatrix::InnerIterator it(ybus, static_cast<int>(i)); it; ++it) {
                const auto k = static_cast<std::size_t>(it.col());
                const double g = it.value().real();
                const double b = it.value().imag();
                if (k == i) {
                    entries.emplace_back(theta_row(i), theta_row(i), -q - b * vi * vi);
                    entries.emplace_back(theta_row(i), v_row(i), p / vi + g * vi);
                    entries.emplace_back(v_row(i), theta_row(i), p - g * vi * vi);
                    entries.emplace_back(v_row(i), v_row(i), q / vi - b * vi);
                } else if (k != 0) {
                    const double t = state.theta[i] - state.theta[k];
                    const double vk = state.v[k];
                    const double gs_bc = g * std::sin(t) - b * std::cos(t);
                    const double gc_bs = g * std::cos(t) + b * std::sin(t);
                    entries.emplace_back(theta_row(i), theta_row(k), vi * vk * gs_bc);
                    entries.emplace_back(theta_row(i), v_row(k), vi * gc_bs);
                    entries.emplace_back(v_row(i), theta_row(k), -vi * vk * gc_bs);
                    entries.emplace_back(v_row(i), v_row(k), vi * gs_bc);
                }
            }
        }
        jac.setFromTriplets(entries.begin(), entries.end());
        if (!pattern_ready) {
            lu.analyzePattern(jac);
            pattern_ready = true;
        }
        lu.factorize(jac);
        if (lu.info() != Eigen::Success) break;
        Eigen::VectorXd dx = lu.solve(rhs);
        if (lu.info() != Eigen::Success || !dx.allFinite()) break;

        bool collapsed = false;
        for (std::size_t i = 1; i < n; ++i) {
            state.theta[i] += dx(theta_row(i));
            state.v[i] += dx(v_row(i));
            if (!(state.v[i] > 0.0)) collapsed = true;
        }
        if (collapsed) break;
    }

    state.max_mismatch = state.converged ? state.mismatch_history.back() : best_mismatch;
    if (!state.converged) {
        state.v = best_v;
        state.theta = best_theta;
    }
    finalize(network, ybus, state);
    return state;
}

std::vector<double> mismatch(const NetworkCase& network, const GridState& state) {
    const std::size_t n = network.bus_count();
    if (state.v.size() != n || state.theta.size() != n) throw std::invalid_argument("state does not match the case");
    check_dimensions(network, state.injections);
    const YMatrix ybus = build_admittance(network);
    const Specified spec = specified_injection(network, state.injections);
    auto calc = network_injection(ybus, state.v, state.theta);
    std::vector<double> out;
    out.reserve(2 * (n - 1));
    for (std::size_t i = 1; i < n; ++i) {
        out.push_back(spec.p[i] - calc[i].real());
        out.push_back(spec.q[i] - calc[i].imag());
    }
    return out;
}

std::vector<double> branch_currents(const NetworkCase& network, const GridState& state) {
    std::vector<double> out;
    out.reserve(network.branches().size());
    for (const Branch& br : network.branches()) {
        Admittance a = branch_admittance(br);
        std::size_t f = network.position(br.from_bus);
        std::size_t t = network.position(br.to_bus);
        Complex vf = std::polar(state.v[f], state.theta[f]) / br.tap_ratio;
        Complex vt = std::polar(state.v[t], state.theta[t]);
        out.push_back(std::abs(Complex(a.g, a.b) * (vf - vt)));
    }
    return out;
}

double total_loss(const NetworkCase& network, const GridState& state) {
    if (!state.converged) throw std::logic_error("total_loss requires a converged power-flow state");
    double loss = 0.0;
    auto currents = branch_currents(network, state);
    for (std::size_t k = 0; k < currents.size(); ++k) loss += currents[k] * currents[k] * network.branches()[k].r;
    return pu_to_mw(network, loss);
}

std::string dump_diagnostics(const NetworkCase& network, const GridState& state) {
    nlohmann::json j;
    j["case"] = network.name();
    j["converged"] = state.converged;
    j["iterations"] = state.iterations;
    j["max_mismatch_pu"] = state.max_mismatch;
    j["mismatch_history"] = state.mismatch_history;
    j["residuals"] = mismatch(network, state);
    j["v_pu"] = state.v;
    j["theta_rad"] = state.theta;
    j["slack_p_mw"] = state.slack_p;
    j["slack_q_mvar"] = state.slack_q;
    j["total_loss_mw"] = state.total_loss;
    return j.dump(1);
}

namespace two_bus {

double voltage_drop(double r, double x, double p_load, double q_load, double p_pv, double q_pv, double v) {
    if (!(v > 0)) throw std::invalid_argument("voltage must be positive");
    return (r * (p_load - p_pv) + x * (q_load - q_pv)) / v;
}

double power_loss(double r, double p_load, double q_load, double p_pv, double q_pv, double v_parent) {
    if (!(v_parent > 0)) throw std::invalid_argument("voltage must be positive");
    const double dp = p_load - p_pv;
    const double dq = q_load - q_pv;
    return (dp * dp + dq * dq) / (v_parent * v_parent) * r;
}

double zero_deviation_reactive(double r, double x, double p_load, double p_pv, double q_load) {
    if (!(x > 0)) throw std::invalid_argument("reactance must be positive");
    return r / x * (p_load - p_pv) + q_load;
}

}  // namespace two_bus

}  // namespace avc
