#pragma once

#include <cstdint>
#include <vector>

#include "loadpin/samples.hpp"
#include "loadpin/series.hpp"

namespace loadpin {

struct SynthConfig {
    int days = 365;
    int resolution = 15;
    int n_users = 100;
    std::uint64_t seed = 1;
    Timestamp start = parse_timestamp("2021-01-01T00:00");
    double load_noise = 0.25;        // stationary std of each user's AR(1) noise, fraction of its base load
    double noise_corr_hours = 1.0;   // e-folding time of that noise
    double temp_noise = 0.3;         // white noise on temperature, degC
    double weather_amp = 3.0;        // slow weather anomaly std, degC
    double weather_corr_hours = 48;  //
    double user_spread = 1.0;        // 0 makes every user identical
    void validate() const;
};

/// Deterministic part of one household's consumption.
struct UserProfile {
    double base = 0.6;       // kW
    double a24 = 0.25;       // kW, daily harmonic
    double peak24 = 19.0;    // hour of its maximum
    double a12 = 0.12;       // kW, half-daily harmonic
    double peak12 = 8.0;
    double t_cool = 24.0, k_cool = 0.06;  // kW per degC above t_cool
    double t_heat = 12.0, k_heat = 0.03;  // kW per degC below t_heat
};

double user_load(const UserProfile& u, double hour_of_day, double temperature_c);

/// Seasonal plus diurnal temperature without weather or noise.
double base_temperature(double day_of_year, double hour_of_day);

RawSeries synth_series(const SynthConfig& cfg);

/// Scales load inside each event by (1 - factor * delta_v).
void apply_cvr_events(RawSeries& s, const std::vector<CvrEvent>& events, double cvr_factor);

}  // namespace loadpin
