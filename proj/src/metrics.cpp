#include "loadpin/metrics.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>

namespace loadpin {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_pair(std::span<const double> y, std::span<const double> yhat) {
    if (y.size() != yhat.size()) throw std::invalid_argument("metric: truth and estimate lengths differ");
    if (y.empty()) throw std::invalid_argument("metric: empty event");
}

double mean_finite(const std::vector<double>& v, const char* what) {
    double s = 0;
    std::size_t n = 0;
    for (double x : v)
        if (std::isfinite(x)) {
            s += x;
            ++n;
        }
    if (n == 0) throw std::invalid_argument(std::string(what) + ": no evaluable events");
    return s / static_cast<double>(n);
}

double guarded(double (*f)(std::span<const double>, std::span<const double>), const EvalEvent& e, const char* what) {
    try {
        return f(e.truth, e.estimate);
    } catch (const std::domain_error& err) {
        std::clog << "warning: " << what << ": event " << e.id << " excluded (" << err.what() << ")\n";
        return kNaN;
    }
}

}  // namespace

double event_nrmse(std::span<const double> y, std::span<const double> yhat) {
    check_pair(y, yhat);
    double sq = 0, mag = 0;
    for (std::size_t t = 0; t < y.size(); ++t) {
        sq += (y[t] - yhat[t]) * (y[t] - yhat[t]);
        mag += std::abs(y[t]);
    }
    const double n = static_cast<double>(y.size());
    if (mag == 0) throw std::domain_error("zero-mean truth");
    return std::sqrt(sq / n) / (mag / n);
}

double event_energy_error(std::span<const double> y, std::span<const double> yhat) {
    check_pair(y, yhat);
    double diff = 0, tot = 0;
    for (std::size_t t = 0; t < y.size(); ++t) {
        diff += y[t] - yhat[t];
        tot += y[t];
    }
    if (tot == 0) throw std::domain_error("zero-mean truth");
    return std::abs(diff) / tot;
}

double event_bias(std::span<const double> y, std::span<const double> yhat) {
    check_pair(y, yhat);
    double s = 0;
    for (std::size_t t = 0; t < y.size(); ++t) {
        if (y[t] == 0) throw std::domain_error("zero truth point");
        s += (y[t] - yhat[t]) / y[t];
    }
    return 100.0 * s / static_cast<double>(y.size());
}

MetricsReport evaluate(const std::vector<EvalEvent>& events) {
    MetricsReport r;
    std::vector<double> a, b, c;
    for (const auto& e : events) {
        EventMetrics m;
        m.id = e.id;
        m.season = e.season;
        m.duration_steps = e.truth.size();
        m.nrmse = guarded(event_nrmse, e, "nrmse");
        m.ee = guarded(event_energy_error, e, "energy error");
        m.bias = guarded(event_bias, e, "bias");
        a.push_back(m.nrmse);
        b.push_back(m.ee);
        c.push_back(m.bias);
        r.per_event.push_back(std::move(m));
    }
    r.n_events = events.size();
    r.nrmse = mean_finite(a, "nrmse");
    r.ee = mean_finite(b, "energy error");
    r.bias = mean_finite(c, "bias");
    return r;
}

double nrmse(const std::vector<EvalEvent>& events) {
    std::vector<double> v;
    for (const auto& e : events) v.push_back(guarded(event_nrmse, e, "nrmse"));
    return mean_finite(v, "nrmse");
}

double energy_error(const std::vector<EvalEvent>& events) {
    std::vector<double> v;
    for (const auto& e : events) v.push_back(guarded(event_energy_error, e, "energy error"));
    return mean_finite(v, "energy error");
}

double bias(const std::vector<EvalEvent>& events) {
    std::vector<double> v;
    for (const auto& e : events) v.push_back(guarded(event_bias, e, "bias"));
    return mean_finite(v, "bias");
}

bool DayWindow::overlaps(int b, int e) const {
    // Compare on a doubled day so wrapped intervals need no special casing.
    auto unwrap = [](int lo, int hi) { return std::pair<int, int>{lo, hi > lo ? hi : hi + 1440}; };
    const auto [w0, w1] = unwrap(begin, end);
    const auto [e0, e1] = unwrap(b, e);
    for (int shift : {-1440, 0, 1440})
        if (e0 + shift < w1 && w0 < e1 + shift) return true;
    return false;
}

double seasonal_bias(const std::vector<EvalEvent>& test_events, Season season, DayWindow window) {
    std::vector<EvalEvent> subset;
    for (const auto& e : test_events) {
        if (e.season != season) continue;
        const int b = minute_of_day(e.start);
        const int len = static_cast<int>(e.truth.size()) * e.resolution;
        if (window.overlaps(b, (b + len) % 1440)) subset.push_back(e);
    }
    if (subset.empty())
        throw std::invalid_argument("seasonal bias: no " + to_string(season) +
                                    " test events overlap the event time window; widen the filter or add test data");
    return bias(subset);
}

}  // namespace loadpin
