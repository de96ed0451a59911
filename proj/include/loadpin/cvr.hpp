#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "loadpin/metrics.hpp"

namespace loadpin {

/// Percent; negative means the measured load sits below the baseline.
double cvr_raw(std::span<const double> measured, std::span<const double> baseline);
double cvr_net(double raw_pct, double seasonal_bias_pct);

struct NetAndDeltaV {
    double net_pct;
    double delta_v;  // fraction, e.g. 0.04
};
/// Mean of (net / 100) / delta_v.
double cvr_factor(std::span<const NetAndDeltaV> events);

struct EffectCurve {
    std::vector<double> mean_pct;    // per elapsed step: mean of (y - yhat) / y, percent
    std::vector<std::size_t> count;  // events lasting at least that long
};

struct MeasuredAndBaseline {
    std::vector<double> measured, baseline;
};
EffectCurve effect_curve(const std::vector<MeasuredAndBaseline>& events);

struct CvrInput {
    std::string id;
    Season season = Season::winter;
    Timestamp start{};
    int resolution = 60;
    double delta_v = 0;
    std::vector<double> measured, baseline;  // kW over the event
};

struct CvrEventResult {
    std::string id;
    Season season = Season::winter;
    Timestamp start{};
    std::size_t duration_steps = 0;
    double delta_v = 0, cvr_raw = 0, seasonal_bias = 0, cvr_net = 0;
};

struct CvrReport {
    std::vector<CvrEventResult> events;
    double cvr_factor = 0;
    EffectCurve curve;
};

/// Seasonal bias for each event comes from `test_events` of the same season
/// overlapping the event's time of day.
CvrReport cvr_report(const std::vector<CvrInput>& events, const std::vector<EvalEvent>& test_events);

}  // namespace loadpin
