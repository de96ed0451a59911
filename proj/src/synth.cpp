#include "loadpin/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace loadpin {

namespace {

std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

UserProfile draw_user(std::mt19937_64& rng, double spread) {
    UserProfile u;
    if (spread == 0) return u;
    std::normal_distribution<double> n01(0.0, 1.0);
    std::uniform_real_distribution<double> u11(-1.0, 1.0);
    u.base *= std::exp(0.3 * spread * n01(rng));
    u.a24 *= 1.0 + 0.4 * spread * u11(rng);
    u.peak24 += 1.0 * spread * n01(rng);
    u.a12 *= 1.0 + 0.4 * spread * u11(rng);
    u.peak12 += 1.0 * spread * n01(rng);
    u.t_cool += 1.5 * spread * n01(rng);
    u.k_cool *= 1.0 + 0.5 * spread * u11(rng);
    u.t_heat += 1.5 * spread * n01(rng);
    u.k_heat *= 1.0 + 0.5 * spread * u11(rng);
    return u;
}

}  // namespace

void SynthConfig::validate() const {
    if (days < 2) throw std::invalid_argument("synth: days must be >= 2");
    if (n_users < 1) throw std::invalid_argument("synth: n_users must be >= 1");
    if (!valid_resolution(resolution)) throw std::invalid_argument("synth: unsupported resolution");
    if (load_noise < 0 || temp_noise < 0 || weather_amp < 0 || user_spread < 0)
        throw std::invalid_argument("synth: noise amplitudes must be nonnegative");
    if (noise_corr_hours <= 0 || weather_corr_hours <= 0) throw std::invalid_argument("synth: correlation times must be positive");
}

double user_load(const UserProfile& u, double h, double temp) {
    constexpr double w = 2 * std::numbers::pi / 24.0;
    double y = u.base + u.a24 * std::cos(w * (h - u.peak24)) + u.a12 * std::cos(2 * w * (h - u.peak12));
    if (temp > u.t_cool) y += u.k_cool * (temp - u.t_cool);
    if (temp < u.t_heat) y += u.k_heat * (u.t_heat - temp);
    return y;
}

double base_temperature(double doy, double h) {
    constexpr double two_pi = 2 * std::numbers::pi;
    return 15.0 - 10.0 * std::cos(two_pi * (doy - 15.0) / 365.0) + 5.0 * std::cos(two_pi * (h - 15.0) / 24.0);
}

RawSeries synth_series(const SynthConfig& cfg) {
    cfg.validate();
    const std::size_t L = static_cast<std::size_t>(cfg.days) * 1440 / static_cast<std::size_t>(cfg.resolution);
    RawSeries s;
    s.start_time = cfg.start;
    s.resolution = cfg.resolution;
    s.load.assign(L, 0.0);
    s.temperature.resize(L);
    s.missing.assign(L, 0);

    using namespace std::chrono;
    const auto year_start = sys_days{year_month_day{floor<days>(cfg.start)}.year() / January / 1};
    std::vector<double> hour(L);
    {
        std::mt19937_64 rng(mix(cfg.seed));
        std::normal_distribution<double> n01(0.0, 1.0);
        const double rho = std::exp(-cfg.resolution / (60.0 * cfg.weather_corr_hours));
        double anomaly = cfg.weather_amp * n01(rng);
        for (std::size_t i = 0; i < L; ++i) {
            const auto t = s.time_at(i);
            const double mins = static_cast<double>((t - year_start).count());
            hour[i] = minute_of_day(t) / 60.0;
            if (i > 0) anomaly = rho * anomaly + std::sqrt(1 - rho * rho) * cfg.weather_amp * n01(rng);
            s.temperature[i] = base_temperature(mins / 1440.0, hour[i]) + anomaly + cfg.temp_noise * n01(rng);
        }
    }

    // Users are simulated in parallel blocks and summed in user order so the
    // aggregate does not depend on the thread count.
    const double rho = std::exp(-cfg.resolution / (60.0 * cfg.noise_corr_hours));
    const std::size_t block = 16;
    std::vector<std::vector<double>> buf(block, std::vector<double>(L));
    for (std::size_t u0 = 0; u0 < static_cast<std::size_t>(cfg.n_users); u0 += block) {
        const std::size_t nb = std::min(block, static_cast<std::size_t>(cfg.n_users) - u0);
#pragma omp parallel for schedule(static)
        for (std::size_t j = 0; j < nb; ++j) {
            std::mt19937_64 rng(mix(cfg.seed ^ mix(0x5eed0000ULL + u0 + j)));
            const UserProfile up = draw_user(rng, cfg.user_spread);
            std::normal_distribution<double> n01(0.0, 1.0);
            const double sd = cfg.load_noise * up.base;
            double e = sd * n01(rng);
            auto& out = buf[j];
            for (std::size_t i = 0; i < L; ++i) {
                if (i > 0) e = rho * e + std::sqrt(1 - rho * rho) * sd * n01(rng);
                out[i] = user_load(up, hour[i], s.temperature[i]) + e;
            }
        }
        for (std::size_t j = 0; j < nb; ++j)
            for (std::size_t i = 0; i < L; ++i) s.load[i] += buf[j][i];
    }
    return s;
}

void apply_cvr_events(RawSeries& s, const std::vector<CvrEvent>& events, double cvr_factor) {
    for (const auto& e : events) {
        const double scale = 1.0 - cvr_factor * e.delta_v;
        const auto end = e.start + std::chrono::minutes(e.duration_min);
        for (std::size_t i = 0; i < s.size(); ++i) {
            const auto t = s.time_at(i);
            if (t >= e.start && t < end && !s.missing[i]) s.load[i] *= scale;
        }
    }
}

}  // namespace loadpin
