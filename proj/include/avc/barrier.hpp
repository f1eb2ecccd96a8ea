#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace avc {

enum class BarrierShape { L1, L2, Bowl };

struct BowlParams {
    double a = 2.0;
    double b = 0.095;
    double c = 0.01;
    double d = 0.04;
    double sigma = 0.1;  // std of the Gaussian density in the inner branch
};

struct BarrierSpec {
    BarrierShape shape = BarrierShape::L1;
    BowlParams bowl;
    double v_ref = 1.0;
    double safe_halfwidth = 0.05;
};

struct RewardSpec {
    BarrierSpec barrier;
    double alpha = 0.1;
    double safety_penalty = -200.0;
};

std::optional<BarrierShape> parse_barrier(std::string_view name);
std::string barrier_name(BarrierShape shape);

/// Throws std::invalid_argument when parameters are out of range.
void validate(const BarrierSpec& spec);
void validate(const RewardSpec& spec);

/// Penalty l_v(v) >= 0. The bowl shape has a small jump at the edge of the
/// safe band, where the Gaussian branch hands over to the linear one.
double barrier_value(const BarrierSpec& spec, double v);

/// d l_v / dv. Undefined at the kinks; returns the one-sided value for
/// delta > 0 at the L1 cusp and the outer branch at the bowl boundary.
double barrier_slope(const BarrierSpec& spec, double v);

/// Mean absolute reactive power over agents. Throws on an empty vector.
double reactive_loss(const std::vector<double>& q_pv);

/// Global reward: -(mean barrier over buses) - alpha * reactive_loss.
double reward(const RewardSpec& spec, const std::vector<double>& v, const std::vector<double>& q_pv);

}  // namespace avc
