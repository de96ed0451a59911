#pragma once

#include <iosfwd>
#include <utility>
#include <vector>

#include "loadpin/cvr.hpp"
#include "loadpin/metrics.hpp"
#include "loadpin/train_config.hpp"

namespace loadpin {

inline constexpr const char* kEventCsvHeader = "event_id,season,duration_steps,nrmse,ee,bias,cvr_raw,cvr_net,delta_v";

void write_metrics_json(std::ostream& out, const MetricsReport& m);
void write_metrics_text(std::ostream& out, const MetricsReport& m);
/// Accuracy rows; CVR columns left empty.
void write_metrics_csv(std::ostream& out, const MetricsReport& m);

void write_cvr_json(std::ostream& out, const CvrReport& r);
void write_cvr_text(std::ostream& out, const CvrReport& r);
/// CVR rows; accuracy columns left empty.
void write_cvr_csv(std::ostream& out, const CvrReport& r);
void write_effect_curve_csv(std::ostream& out, const EffectCurve& c, int resolution);

void write_loss_curve_csv(std::ostream& out, const std::vector<LossReport>& history,
                          const std::vector<std::pair<std::size_t, double>>& validation);

}  // namespace loadpin
