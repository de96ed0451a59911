#include "loadpin/report.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>

#include "json.hpp"

namespace loadpin {

using nlohmann::json;

namespace {

std::string num(double v) {
    if (!std::isfinite(v)) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

json maybe(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

void write_metrics_json(std::ostream& out, const MetricsReport& m) {
    json j;
    j["nrmse"] = maybe(m.nrmse);
    j["ee"] = maybe(m.ee);
    j["bias_pct"] = maybe(m.bias);
    j["n_events"] = m.n_events;
    j["events"] = json::array();
    for (const auto& e : m.per_event)
        j["events"].push_back({{"id", e.id},
                               {"season", to_string(e.season)},
                               {"duration_steps", e.duration_steps},
                               {"nrmse", maybe(e.nrmse)},
                               {"ee", maybe(e.ee)},
                               {"bias_pct", maybe(e.bias)}});
    out << j.dump(1) << '\n';
}

void write_metrics_text(std::ostream& out, const MetricsReport& m) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-10s %12s\n", "metric", "value");
    out << buf;
    std::snprintf(buf, sizeof buf, "%-10s %12.6f\n%-10s %12.6f\n%-10s %11.4f%%\n%-10s %12zu\n", "nrmse", m.nrmse, "ee",
                  m.ee, "bias", m.bias, "events", m.n_events);
    out << buf;
    std::map<Season, std::pair<double, std::size_t>> by_season;
    for (const auto& e : m.per_event)
        if (std::isfinite(e.nrmse)) {
            by_season[e.season].first += e.nrmse;
            ++by_season[e.season].second;
        }
    if (!by_season.empty()) {
        std::snprintf(buf, sizeof buf, "\n%-10s %12s %8s\n", "season", "nrmse", "events");
        out << buf;
        for (const auto& [s, v] : by_season) {
            std::snprintf(buf, sizeof buf, "%-10s %12.6f %8zu\n", to_string(s).c_str(), v.first / static_cast<double>(v.second),
                          v.second);
            out << buf;
        }
    }
}

void write_metrics_csv(std::ostream& out, const MetricsReport& m) {
    out << kEventCsvHeader << '\n';
    for (const auto& e : m.per_event)
        out << e.id << ',' << to_string(e.season) << ',' << e.duration_steps << ',' << num(e.nrmse) << ',' << num(e.ee)
            << ',' << num(e.bias) << ",,,\n";
}

void write_cvr_json(std::ostream& out, const CvrReport& r) {
    json j;
    j["cvr_factor"] = r.cvr_factor;
    j["events"] = json::array();
    for (const auto& e : r.events)
        j["events"].push_back({{"id", e.id},
                               {"season", to_string(e.season)},
                               {"start", format_timestamp(e.start)},
                               {"duration_steps", e.duration_steps},
                               {"delta_v", e.delta_v},
                               {"cvr_raw_pct", e.cvr_raw},
                               {"seasonal_bias_pct", e.seasonal_bias},
                               {"abs_seasonal_bias_pct", std::abs(e.seasonal_bias)},
                               {"cvr_net_pct", e.cvr_net}});
    j["effect_curve"] = {{"mean_pct", r.curve.mean_pct}, {"count", r.curve.count}};
    out << j.dump(1) << '\n';
}

void write_cvr_text(std::ostream& out, const CvrReport& r) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "%-10s %-8s %-20s %6s %8s %10s %10s %10s\n", "event", "season", "start", "steps",
                  "dV", "raw%", "bias%", "net%");
    out << buf;
    for (const auto& e : r.events) {
        std::snprintf(buf, sizeof buf, "%-10s %-8s %-20s %6zu %8.4f %10.4f %10.4f %10.4f\n", e.id.c_str(),
                      to_string(e.season).c_str(), format_timestamp(e.start).c_str(), e.duration_steps, e.delta_v,
                      e.cvr_raw, e.seasonal_bias, e.cvr_net);
        out << buf;
    }
    std::snprintf(buf, sizeof buf, "\ncvr factor %.6f over %zu events\n", r.cvr_factor, r.events.size());
    out << buf;
}

void write_cvr_csv(std::ostream& out, const CvrReport& r) {
    out << kEventCsvHeader << '\n';
    for (const auto& e : r.events)
        out << e.id << ',' << to_string(e.season) << ',' << e.duration_steps << ",,,," << num(e.cvr_raw) << ','
            << num(e.cvr_net) << ',' << num(e.delta_v) << '\n';
}

void write_effect_curve_csv(std::ostream& out, const EffectCurve& c, int resolution) {
    out << "step,elapsed_min,mean_effect_pct,events\n";
    for (std::size_t k = 0; k < c.mean_pct.size(); ++k)
        out << k + 1 << ',' << (k + 1) * static_cast<std::size_t>(resolution) << ',' << num(c.mean_pct[k]) << ','
            << c.count[k] << '\n';
}

void write_loss_curve_csv(std::ostream& out, const std::vector<LossReport>& h,
                          const std::vector<std::pair<std::size_t, double>>& val) {
    std::map<std::size_t, double> v(val.begin(), val.end());
    out << "iteration,l_coarse,l_content2,l_adv,l_feat,l_refine,l_d,val_content2\n";
    for (std::size_t i = 0; i < h.size(); ++i) {
        const auto& r = h[i];
        auto it = v.find(i + 1);
        out << i + 1 << ',' << num(r.l_coarse) << ',' << num(r.l_content2) << ',' << num(r.l_adv) << ','
            << num(r.l_feat) << ',' << num(r.l_refine) << ',' << num(r.l_d) << ','
            << (it == v.end() ? "" : num(it->second)) << '\n';
    }
}

}  // namespace loadpin
