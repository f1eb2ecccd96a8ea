#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "avc/environment.hpp"
#include "avc/network.hpp"
#include "avc/power_flow.hpp"

namespace avc {

struct DroopParams {
    double v_ref = 1.0;
    double deadband = 0.0;        // half-width around v_ref, per-unit
    std::optional<double> slope;  // MVAr per per-unit volt; default q_max / 0.05
    bool fixed_point = false;     // iterate droop and power flow within a step
    double smoothing = 1.0;       // lag mode: q <- (1 - s) q_prev + s droop(v); 1 applies the law directly
    double damping = 1.0;         // fixed-point mode: largest fraction of each Newton step taken
    int max_iterations = 50;
    double tolerance = 1e-8;      // MVAr, on |droop(v(q)) - q|
};

/// Piecewise-linear volt/var law, continuous at the deadband edges and
/// saturated at +/- sqrt(s_max^2 - p_pv^2).
double droop_q(double v, double p_pv, double s_max, const DroopParams& params);

struct DroopFixedPoint {
    std::vector<double> q_pv;  // MVAr per agent slot
    GridState grid;
    int iterations = 0;
    bool converged = false;
};

/// Solves q = droop(v(q)) from q = 0 by Newton steps on the residual, using a
/// finite-difference dv/dq sensitivity and backtracking on its max norm.
/// `injections` supplies loads and PV active power; its q_pv is ignored at
/// PV buses. `q_max` caps |q| per slot on top of the droop saturation.
DroopFixedPoint droop_fixed_point(const NetworkCase& network, const InjectionSet& injections,
                                  const std::vector<double>& p_pv, const std::vector<double>& s_max,
                                  const std::vector<double>& q_max, const DroopParams& params,
                                  const SolverOptions& solver = {});

struct OpfOptions {
    double penalty = 1e6;          // weight on squared voltage violation, MW per pu^2
    double step_tolerance = 1e-5;  // stop when every coordinate update is smaller
    int max_sweeps = 200;
    double fd_step = 1e-3;         // MVAr
    double feasibility_tolerance = 1e-6;
    SolverOptions solver{1e-10, 30};
};

struct OpfSolution {
    std::vector<double> q_pv;  // MVAr per agent slot
    double objective = 0.0;    // slack active power, MW
    double total_loss = 0.0;   // MW
    bool feasible = false;
    double slack_violation = 0.0;  // largest voltage-bound violation, per-unit
    GridState grid;
    int sweeps = 0;
};

/// Minimises slack active power over the PV reactive setpoints subject to
/// |q_k| <= q_max[k] and the bus voltage bounds (quadratic penalty). Uses
/// projected coordinate descent with finite-difference Newton steps.
OpfSolution opf_solve(const NetworkCase& network, const InjectionSet& injections, const std::vector<double>& q_max,
                      const OpfOptions& options = {});

/// Decision rule consumed by the evaluation harness. Actions are ratios of
/// each PV's reactive headroom, within the case action bound.
class Policy {
  public:
    virtual ~Policy() = default;
    virtual std::string name() const = 0;
    virtual void reset(std::uint64_t /*seed*/) {}
    virtual std::vector<double> act(const Environment& env) = 0;
};

class NoControl : public Policy {
  public:
    std::string name() const override { return "none"; }
    std::vector<double> act(const Environment& env) override;
};

/// Uses each agent's own observed bus voltage from the previous step, or the
/// within-step fixed point when `params.fixed_point` is set.
class DroopPolicy : public Policy {
  public:
    explicit DroopPolicy(DroopParams params = {}) : params_(params) {}
    std::string name() const override { return "droop"; }
    std::vector<double> act(const Environment& env) override;

  private:
    DroopParams params_;
};

class OpfPolicy : public Policy {
  public:
    explicit OpfPolicy(OpfOptions options = {}) : options_(options) {}
    std::string name() const override { return "opf"; }
    std::vector<double> act(const Environment& env) override;

  private:
    OpfOptions options_;
};

class RandomPolicy : public Policy {
  public:
    std::string name() const override { return "random"; }
    void reset(std::uint64_t seed) override { rng_.seed(seed); }
    std::vector<double> act(const Environment& env) override;

  private:
    std::mt19937_64 rng_;
};

struct ControllerConfig {
    std::string name = "none";
    DroopParams droop;
    OpfOptions opf;
};

/// Throws std::invalid_argument for an unknown controller name.
std::unique_ptr<Policy> make_policy(const ControllerConfig& config);

}  // namespace avc
