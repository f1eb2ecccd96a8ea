#include "avc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

namespace avc {

namespace {

void require_steps(const EpisodeRecord& record) {
    if (record.steps.empty()) throw std::invalid_argument("metrics need at least one step");
}

double mean_abs(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    double s = 0.0;
    for (double x : xs) s += std::abs(x);
    return s / static_cast<double>(xs.size());
}

struct StepCounts {
    std::size_t below = 0;
    std::size_t above = 0;
};

StepCounts count_out(const StepRecord& step, const MetricsOptions& o) {
    StepCounts c;
    for (double v : step.v) {
        if (v < o.v_min) ++c.below;
        if (v > o.v_max) ++c.above;
    }
    return c;
}

double fraction(std::size_t count, std::size_t total) {
    return total ? static_cast<double>(count) / static_cast<double>(total) : 0.0;
}

}  // namespace

double metric_cr(const EpisodeRecord& record, const MetricsOptions& options) {
    require_steps(record);
    std::size_t ok = 0;
    for (const StepRecord& s : record.steps) {
        const StepCounts c = count_out(s, options);
        if (c.below + c.above == 0) ++ok;
    }
    return fraction(ok, record.steps.size());
}

std::pair<double, double> metric_pl(const EpisodeRecord& record) {
    require_steps(record);
    const auto n = static_cast<double>(record.steps.size());
    double mean = 0.0;
    for (const StepRecord& s : record.steps) mean += s.total_loss;
    mean /= n;
    double var = 0.0;
    for (const StepRecord& s : record.steps) var += (s.total_loss - mean) * (s.total_loss - mean);
    return {mean, std::sqrt(var / n)};
}

double metric_vr(const EpisodeRecord& record, const MetricsOptions& options) {
    require_steps(record);
    double sum = 0.0;
    for (const StepRecord& s : record.steps) {
        const StepCounts c = count_out(s, options);
        sum += fraction(c.below + c.above, s.v.size());
    }
    return sum / static_cast<double>(record.steps.size());
}

double metric_ql(const EpisodeRecord& record) {
    require_steps(record);
    double sum = 0.0;
    for (const StepRecord& s : record.steps) sum += mean_abs(s.q_pv);
    return sum / static_cast<double>(record.steps.size());
}

MetricsReport metric_extended(const EpisodeRecord& record, const MetricsOptions& options) {
    require_steps(record);
    MetricsReport r;
    r.cr = metric_cr(record, options);
    std::tie(r.pl_mean, r.pl_std) = metric_pl(record);
    r.vr = metric_vr(record, options);
    r.ql_mean = metric_ql(record);

    const auto steps = static_cast<double>(record.steps.size());
    double dev_sum = 0.0;
    std::size_t dev_count = 0;
    for (const StepRecord& s : record.steps) {
        const StepCounts c = count_out(s, options);
        r.pct_below += fraction(c.below, s.v.size());
        r.pct_above += fraction(c.above, s.v.size());
        double drop = 0.0;
        double rise = 0.0;
        for (double v : s.v) {
            dev_sum += std::abs(v - options.v_ref);
            drop = std::max(drop, options.v_min - v);
            rise = std::max(rise, v - options.v_max);
        }
        dev_count += s.v.size();
        r.max_drop_dev += drop;
        r.max_rise_dev += rise;
    }
    r.pct_below /= steps;
    r.pct_above /= steps;
    r.pct_out = r.pct_below + r.pct_above;
    r.max_drop_dev /= steps;
    r.max_rise_dev /= steps;
    r.v_dev_mean = dev_count ? dev_sum / static_cast<double>(dev_count) : 0.0;
    return r;
}

std::vector<std::pair<std::string, double>> metric_fields(const MetricsReport& r) {
    return {{"cr", r.cr},
            {"pl_mean", r.pl_mean},
            {"pl_std", r.pl_std},
            {"vr", r.vr},
            {"ql_mean", r.ql_mean},
            {"pct_out", r.pct_out},
            {"pct_below", r.pct_below},
            {"pct_above", r.pct_above},
            {"v_dev_mean", r.v_dev_mean},
            {"max_drop_dev", r.max_drop_dev},
            {"max_rise_dev", r.max_rise_dev}};
}

MetricsSummary summarize(const std::vector<MetricsReport>& reports) {
    static constexpr double MetricsReport::*kMembers[] = {
        &MetricsReport::cr,        &MetricsReport::pl_mean,    &MetricsReport::pl_std,       &MetricsReport::vr,
        &MetricsReport::ql_mean,   &MetricsReport::pct_out,    &MetricsReport::pct_below,    &MetricsReport::pct_above,
        &MetricsReport::v_dev_mean, &MetricsReport::max_drop_dev, &MetricsReport::max_rise_dev};
    MetricsSummary s;
    s.episodes = reports.size();
    if (reports.empty()) return s;
    const auto n = static_cast<double>(reports.size());
    for (auto m : kMembers) {
        double mean = 0.0;
        for (const MetricsReport& r : reports) mean += r.*m;
        mean /= n;
        double var = 0.0;
        for (const MetricsReport& r : reports) var += (r.*m - mean) * (r.*m - mean);
        s.mean.*m = mean;
        s.std.*m = std::sqrt(var / n);
    }
    return s;
}

}  // namespace avc
