#pragma once

#include <span>
#include <string>
#include <vector>

#include "loadpin/samples.hpp"
#include "loadpin/timestamp.hpp"

namespace loadpin {

/// One restored event in kW.
struct EvalEvent {
    std::string id;
    Season season = Season::winter;
    Timestamp start{};
    int resolution = 60;
    std::vector<double> truth, estimate;
};

double event_nrmse(std::span<const double> y, std::span<const double> yhat);
double event_energy_error(std::span<const double> y, std::span<const double> yhat);
/// Percent.
double event_bias(std::span<const double> y, std::span<const double> yhat);

struct EventMetrics {
    std::string id;
    Season season = Season::winter;
    std::size_t duration_steps = 0;
    double nrmse = 0, ee = 0, bias = 0;  // NaN when the event was excluded for that metric
};

struct MetricsReport {
    double nrmse = 0, ee = 0, bias = 0;
    std::size_t n_events = 0;
    std::vector<EventMetrics> per_event;
};

/// Means over events; events with zero-mean truth (or, for bias, a zero
/// truth point) are excluded with a warning on std::clog.
double nrmse(const std::vector<EvalEvent>& events);
double energy_error(const std::vector<EvalEvent>& events);
double bias(const std::vector<EvalEvent>& events);
MetricsReport evaluate(const std::vector<EvalEvent>& events);

/// Minute-of-day interval [begin, end); may wrap past midnight.
struct DayWindow {
    int begin = 0, end = 1440;
    bool overlaps(int b, int e) const;
};

/// Bias over test events of `season` whose event period intersects `window`.
double seasonal_bias(const std::vector<EvalEvent>& test_events, Season season, DayWindow window);

}  // namespace loadpin
