#include "avc/controllers.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <optional>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace avc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

InjectionSet with_reactive(const NetworkCase& network, InjectionSet inj, const std::vector<double>& q_pv) {
    const auto& pvs = network.pv_units();
    for (const PvUnit& pv : pvs) inj.q_pv[network.position(pv.bus)] = 0.0;
    for (std::size_t k = 0; k < pvs.size(); ++k) inj.q_pv[network.position(pvs[k].bus)] += q_pv[k];
    return inj;
}

double voltage_violation(const NetworkCase& network, const GridState& grid, double* squared_sum) {
    double worst = 0.0;
    double sum = 0.0;
    for (std::size_t i = 1; i < network.bus_count(); ++i) {
        const Bus& bus = network.buses()[i];
        const double viol = std::max({0.0, grid.v[i] - bus.v_max, bus.v_min - grid.v[i]});
        worst = std::max(worst, viol);
        sum += viol * viol;
    }
    if (squared_sum) *squared_sum = sum;
    return worst;
}

void check_slots(const NetworkCase& network, std::size_t size, const char* what) {
    if (size != network.agent_count()) {
        throw std::invalid_argument(std::string(what) + " needs one entry per PV agent");
    }
}

}  // namespace

double droop_q(double v, double p_pv, double s_max, const DroopParams& params) {
    if (!(v > 0)) throw std::invalid_argument("droop_q needs a positive voltage");
    const double q_max = reactive_headroom(p_pv, s_max);
    const double slope = params.slope.value_or(q_max / 0.05);
    const double delta = v - params.v_ref;
    if (std::abs(delta) <= params.deadband) return 0.0;
    const double excess = delta > 0 ? delta - params.deadband : delta + params.deadband;
    return std::clamp(-slope * excess, -q_max, q_max);
}

DroopFixedPoint droop_fixed_point(const NetworkCase& network, const InjectionSet& injections,
                                  const std::vector<double>& p_pv, const std::vector<double>& s_max,
                                  const std::vector<double>& q_max, const DroopParams& params,
                                  const SolverOptions& solver) {
    check_slots(network, p_pv.size(), "droop_fixed_point p_pv");
    check_slots(network, s_max.size(), "droop_fixed_point s_max");
    check_slots(network, q_max.size(), "droop_fixed_point q_max");
    const auto& pvs = network.pv_units();
    const auto n = static_cast<Eigen::Index>(pvs.size());

    auto solve = [&](const Eigen::VectorXd& q) {
        return solve_power_flow(network, with_reactive(network, injections, {q.data(), q.data() + q.size()}), solver);
    };
    auto target = [&](Eigen::Index k, double v) {
        return std::clamp(droop_q(v, p_pv[k], s_max[k], params), -q_max[k], q_max[k]);
    };
    auto residual = [&](const Eigen::VectorXd& q, const GridState& g) {
        Eigen::VectorXd r(n);
        for (Eigen::Index k = 0; k < n; ++k) r[k] = target(k, g.v[network.position(pvs[k].bus)]) - q[k];
        return r;
    };
    auto sensitivity = [&](const Eigen::VectorXd& q, const GridState& g) {
        constexpr double h = 1e-4;
        Eigen::MatrixXd s(n, n);
        for (Eigen::Index j = 0; j < n; ++j) {
            Eigen::VectorXd qj = q;
            qj[j] += h;
            const GridState gj = solve(qj);
            if (!gj.converged) return std::optional<Eigen::MatrixXd>{};
            for (Eigen::Index k = 0; k < n; ++k) {
                const std::size_t pos = network.position(pvs[k].bus);
                s(k, j) = (gj.v[pos] - g.v[pos]) / h;
            }
        }
        return std::optional<Eigen::MatrixXd>{s};
    };

    DroopFixedPoint out;
    Eigen::VectorXd q = Eigen::VectorXd::Zero(n);
    out.grid = solve(q);
    if (!out.grid.converged) {
        out.q_pv.assign(pvs.size(), 0.0);
        return out;
    }
    Eigen::VectorXd r = residual(q, out.grid);
    std::optional<Eigen::MatrixXd> dv_dq;
    bool stale = true;
    for (int it = 1; it <= params.max_iterations; ++it) {
        if (r.lpNorm<Eigen::Infinity>() < params.tolerance) {
            out.converged = true;
            break;
        }
        out.iterations = it;
        if (stale) {
            dv_dq = sensitivity(q, out.grid);
            if (!dv_dq) break;
            stale = false;
        }
        Eigen::MatrixXd jac = -Eigen::MatrixXd::Identity(n, n);
        for (Eigen::Index k = 0; k < n; ++k) {
            const double v = out.grid.v[network.position(pvs[k].bus)];
            constexpr double e = 1e-7;
            const double slope = (target(k, v + e) - target(k, v - e)) / (2 * e);
            jac.row(k) += slope * dv_dq->row(k);
        }
        const Eigen::VectorXd step = jac.partialPivLu().solve(-r);

        const double norm = r.lpNorm<Eigen::Infinity>();
        double t = params.damping;
        bool accepted = false;
        for (; t > 1e-6; t *= 0.5) {
            const Eigen::VectorXd trial = q + t * step;
            GridState g = solve(trial);
            if (!g.converged) continue;
            const Eigen::VectorXd rt = residual(trial, g);
            if (rt.lpNorm<Eigen::Infinity>() < (1.0 - 1e-4 * t) * norm) {
                q = trial;
                r = rt;
                out.grid = std::move(g);
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            if (stale) break;
            stale = true;
            continue;
        }
        stale = t < params.damping;
    }
    if (!out.converged && r.lpNorm<Eigen::Infinity>() < params.tolerance) out.converged = true;
    out.q_pv.assign(q.data(), q.data() + n);
    return out;
}

OpfSolution opf_solve(const NetworkCase& network, const InjectionSet& injections, const std::vector<double>& q_max,
                      const OpfOptions& options) {
    check_slots(network, q_max.size(), "opf_solve q_max");
    for (double b : q_max) {
        if (!(b >= 0)) throw std::invalid_argument("q_max must be non-negative");
    }
    const std::size_t n = q_max.size();

    auto evaluate = [&](const std::vector<double>& q, GridState* keep) {
        GridState g = solve_power_flow(network, with_reactive(network, injections, q), options.solver);
        if (!g.converged) return kInf;
        double squared = 0.0;
        voltage_violation(network, g, &squared);
        const double f = g.slack_p + options.penalty * squared;
        if (keep) *keep = std::move(g);
        return f;
    };

    OpfSolution sol;
    sol.q_pv.assign(n, 0.0);
    double f = evaluate(sol.q_pv, &sol.grid);
    if (!std::isfinite(f)) {
        sol.objective = kInf;
        sol.slack_violation = kInf;
        return sol;
    }

    std::vector<double> q = sol.q_pv;
    for (int sweep = 1; sweep <= options.max_sweeps; ++sweep) {
        sol.sweeps = sweep;
        double largest = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            if (q_max[k] <= 0) continue;
            const double h = options.fd_step;
            const double qk = q[k];
            q[k] = qk + h;
            const double fp = evaluate(q, nullptr);
            q[k] = qk - h;
            const double fm = evaluate(q, nullptr);
            q[k] = qk;

            double d = 0.0;
            if (std::isfinite(fp) && std::isfinite(fm)) {
                const double grad = (fp - fm) / (2 * h);
                const double curv = (fp - 2 * f + fm) / (h * h);
                d = curv > 0 ? -grad / curv : (grad > 0 ? -2 * q_max[k] : 2 * q_max[k]);
            } else if (std::isfinite(fp) && fp < f) {
                d = h;
            } else if (std::isfinite(fm) && fm < f) {
                d = -h;
            }
            d = std::clamp(qk + d, -q_max[k], q_max[k]) - qk;

            for (int tries = 0; tries < 40 && d != 0.0; ++tries) {
                q[k] = qk + d;
                const double trial = evaluate(q, nullptr);
                if (trial <= f) {
                    f = trial;
                    break;
                }
                d *= 0.5;
                if (std::abs(d) < 1e-14) d = 0.0;
            }
            q[k] = qk + d;
            largest = std::max(largest, std::abs(d));
        }
        if (largest < options.step_tolerance) break;
    }

    sol.q_pv = q;
    evaluate(sol.q_pv, &sol.grid);
    sol.objective = sol.grid.slack_p;
    sol.total_loss = sol.grid.total_loss;
    sol.slack_violation = voltage_violation(network, sol.grid, nullptr);
    sol.feasible = sol.slack_violation <= options.feasibility_tolerance;
    return sol;
}

std::vector<double> NoControl::act(const Environment& env) {
    return std::vector<double>(env.network().agent_count(), 0.0);
}

std::vector<double> DroopPolicy::act(const Environment& env) {
    const NetworkCase& net = env.network();
    const EnvState& s = env.state();
    const double c = net.action_bound();
    const auto s_max = env.s_max();
    const auto headroom = env.headroom();
    const std::size_t n = net.agent_count();
    std::vector<double> actions(n, 0.0);

    if (params_.fixed_point) {
        std::vector<double> q_max(n);
        for (std::size_t k = 0; k < n; ++k) q_max[k] = c * headroom[k];
        auto fp = droop_fixed_point(net, s.grid.injections, s.p_pv, s_max, q_max, params_, env.config().solver);
        for (std::size_t k = 0; k < n; ++k) {
            if (headroom[k] > 0) actions[k] = std::clamp(fp.q_pv[k] / headroom[k], -c, c);
        }
        return actions;
    }

    for (std::size_t k = 0; k < n; ++k) {
        const PvUnit& pv = net.pv_units()[k];
        const Observation& obs = s.observations[k];
        auto bus = std::find_if(obs.buses.begin(), obs.buses.end(), [&](const BusMeasure& m) { return m.bus == pv.bus; });
        if (bus == obs.buses.end() || headroom[k] <= 0) continue;
        const double target = droop_q(std::max(bus->v, 1e-6), s.p_pv[k], s_max[k], params_);
        const double q = (1.0 - params_.smoothing) * s.q_pv[k] + params_.smoothing * target;
        actions[k] = std::clamp(q / headroom[k], -c, c);
    }
    return actions;
}

std::vector<double> OpfPolicy::act(const Environment& env) {
    const NetworkCase& net = env.network();
    const double c = net.action_bound();
    const auto headroom = env.headroom();
    const std::size_t n = net.agent_count();
    std::vector<double> q_max(n);
    for (std::size_t k = 0; k < n; ++k) q_max[k] = c * headroom[k];
    const OpfSolution sol = opf_solve(net, env.state().grid.injections, q_max, options_);
    std::vector<double> actions(n, 0.0);
    if (!std::isfinite(sol.objective)) return actions;
    for (std::size_t k = 0; k < n; ++k) {
        if (headroom[k] > 0) actions[k] = std::clamp(sol.q_pv[k] / headroom[k], -c, c);
    }
    return actions;
}

std::vector<double> RandomPolicy::act(const Environment& env) {
    const double c = env.network().action_bound();
    std::uniform_real_distribution<double> draw(-c, c);
    std::vector<double> actions(env.network().agent_count());
    for (double& a : actions) a = draw(rng_);
    return actions;
}

std::unique_ptr<Policy> make_policy(const ControllerConfig& config) {
    if (config.name == "none") return std::make_unique<NoControl>();
    if (config.name == "droop") return std::make_unique<DroopPolicy>(config.droop);
    if (config.name == "opf") return std::make_unique<OpfPolicy>(config.opf);
    if (config.name == "random") return std::make_unique<RandomPolicy>();
    throw std::invalid_argument("unknown controller '" + config.name + "'");
}

}  // namespace avc
