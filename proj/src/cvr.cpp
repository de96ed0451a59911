#include "loadpin/cvr.hpp"

#include <algorithm>
#include <stdexcept>

namespace loadpin {

double cvr_raw(std::span<const double> y, std::span<const double> yhat) {
    if (y.size() != yhat.size()) throw std::invalid_argument("cvr_raw: measured and baseline lengths differ");
    if (y.empty()) throw std::invalid_argument("cvr_raw: empty event");
    double s = 0;
    for (std::size_t t = 0; t < y.size(); ++t) {
        if (y[t] == 0) throw std::invalid_argument("cvr_raw: measured load is zero at step " + std::to_string(t));
        s += (y[t] - yhat[t]) / y[t];
    }
    return 100.0 * s / static_cast<double>(y.size());
}

double cvr_net(double raw, double sb) { return raw - sb; }

double cvr_factor(std::span<const NetAndDeltaV> ev) {
    if (ev.empty()) throw std::invalid_argument("cvr_factor: no events");
    double s = 0;
    for (const auto& e : ev) {
        if (!(e.delta_v > 0)) throw std::invalid_argument("cvr_factor: delta_v must be positive");
        s += (e.net_pct / 100.0) / e.delta_v;
    }
    return s / static_cast<double>(ev.size());
}

EffectCurve effect_curve(const std::vector<MeasuredAndBaseline>& events) {
    EffectCurve c;
    std::size_t longest = 0;
    for (const auto& e : events) {
        if (e.measured.size() != e.baseline.size()) throw std::invalid_argument("effect_curve: length mismatch");
        longest = std::max(longest, e.measured.size());
    }
    std::vector<double> sum(longest, 0.0);
    c.count.assign(longest, 0);
    for (const auto& e : events)
        for (std::size_t k = 0; k < e.measured.size(); ++k) {
            if (e.measured[k] == 0) throw std::invalid_argument("effect_curve: zero measured load");
            sum[k] += (e.measured[k] - e.baseline[k]) / e.measured[k];
            ++c.count[k];
        }
    c.mean_pct.resize(longest);
    for (std::size_t k = 0; k < longest; ++k) c.mean_pct[k] = 100.0 * sum[k] / static_cast<double>(c.count[k]);
    return c;
}

CvrReport cvr_report(const std::vector<CvrInput>& events, const std::vector<EvalEvent>& test_events) {
    CvrReport r;
    std::vector<NetAndDeltaV> nd;
    std::vector<MeasuredAndBaseline> mb;
    for (const auto& e : events) {
        CvrEventResult x;
        x.id = e.id;
        x.season = e.season;
        x.start = e.start;
        x.duration_steps = e.measured.size();
        x.delta_v = e.delta_v;
        x.cvr_raw = cvr_raw(e.measured, e.baseline);
        const int b = minute_of_day(e.start);
        const int len = static_cast<int>(e.measured.size()) * e.resolution;
        x.seasonal_bias = seasonal_bias(test_events, e.season, DayWindow{b, (b + len) % 1440});
        x.cvr_net = cvr_net(x.cvr_raw, x.seasonal_bias);
        nd.push_back({x.cvr_net, x.delta_v});
        mb.push_back({e.measured, e.baseline});
        r.events.push_back(std::move(x));
    }
    r.cvr_factor = cvr_factor(nd);
    r.curve = effect_curve(mb);
    return r;
}

}  // namespace loadpin
