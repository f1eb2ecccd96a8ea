#include "avc/barrier.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace avc {

namespace {

double gaussian_density(double x, double mean, double sigma) {
    const double z = (x - mean) / sigma;
    return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

}  // namespace

std::optional<BarrierShape> parse_barrier(std::string_view name) {
    if (name == "l1") return BarrierShape::L1;
    if (name == "l2") return BarrierShape::L2;
    if (name == "bowl") return BarrierShape::Bowl;
    return std::nullopt;
}

std::string barrier_name(BarrierShape shape) {
    switch (shape) {
        case BarrierShape::L1: return "l1";
        case BarrierShape::L2: return "l2";
        case BarrierShape::Bowl: return "bowl";
    }
    return "unknown";
}

void validate(const BarrierSpec& spec) {
    const BowlParams& p = spec.bowl;
    if (!(p.a > 0 && p.b > 0 && p.c > 0 && p.d > 0 && p.sigma > 0)) {
        throw std::invalid_argument("bowl parameters must be positive");
    }
    if (!(spec.safe_halfwidth > 0)) throw std::invalid_argument("safe_halfwidth must be positive");
    if (!(spec.v_ref > 0)) throw std::invalid_argument("v_ref must be positive");
}

void validate(const RewardSpec& spec) {
    validate(spec.barrier);
    if (!(spec.alpha > 0 && spec.alpha < 1)) throw std::invalid_argument("alpha must lie in (0, 1)");
}

double barrier_value(const BarrierSpec& spec, double v) {
    const double delta = v - spec.v_ref;
    switch (spec.shape) {
        case BarrierShape::L1: return std::abs(delta);
        case BarrierShape::L2: return delta * delta;
        case BarrierShape::Bowl: {
            const BowlParams& p = spec.bowl;
            if (std::abs(delta) > spec.safe_halfwidth) return p.a * std::abs(delta) - p.b;
            return -p.c * gaussian_density(v, spec.v_ref, p.sigma) + p.d;
        }
    }
    return 0.0;
}

double barrier_slope(const BarrierSpec& spec, double v) {
    const double delta = v - spec.v_ref;
    const double sign = delta < 0 ? -1.0 : 1.0;
    switch (spec.shape) {
        case BarrierShape::L1: return sign;
        case BarrierShape::L2: return 2.0 * delta;
        case BarrierShape::Bowl: {
            const BowlParams& p = spec.bowl;
            if (std::abs(delta) >= spec.safe_halfwidth) return sign * p.a;
            return p.c * gaussian_density(v, spec.v_ref, p.sigma) * delta / (p.sigma * p.sigma);
        }
    }
    return 0.0;
}

double reactive_loss(const std::vector<double>& q_pv) {
    if (q_pv.empty()) throw std::invalid_argument("reactive_loss needs at least one agent");
    double total = 0.0;
    for (double q : q_pv) total += std::abs(q);
    return total / static_cast<double>(q_pv.size());
}

double reward(const RewardSpec& spec, const std::vector<double>& v, const std::vector<double>& q_pv) {
    if (v.empty()) throw std::invalid_argument("reward needs at least one bus voltage");
    double penalty = 0.0;
    for (double vi : v) penalty += barrier_value(spec.barrier, vi);
    return -penalty / static_cast<double>(v.size()) - spec.alpha * reactive_loss(q_pv);
}

}  // namespace avc
