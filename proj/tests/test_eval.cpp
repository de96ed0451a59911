#include <algorithm>
#include <cmath>
#include <iostream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "loadpin/cvr.hpp"
#include "loadpin/metrics.hpp"
#include "loadpin/report.hpp"
#include "loadpin/restorers.hpp"

using namespace loadpin;

namespace {

using V = std::vector<double>;

// Brute-force oracles: long double, written from the metric definitions.
long double bf_nrmse(const std::vector<double>& y, const std::vector<double>& f) {
    long double se = 0, ay = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        se += (static_cast<long double>(y[i]) - f[i]) * (static_cast<long double>(y[i]) - f[i]);
        ay += std::fabs(static_cast<long double>(y[i]));
    }
    const long double n = static_cast<long double>(y.size());
    return std::sqrt(se / n) / (ay / n);
}
long double bf_ee(const std::vector<double>& y, const std::vector<double>& f) {
    long double d = 0, s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) d += static_cast<long double>(y[i]) - f[i], s += y[i];
    return std::fabs(d) / s;
}
long double bf_bias(const std::vector<double>& y, const std::vector<double>& f) {
    long double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += (static_cast<long double>(y[i]) - f[i]) / y[i];
    return 100 * s / static_cast<long double>(y.size());
}

EvalEvent ev(std::vector<double> y, std::vector<double> f, Season s = Season::summer,
             const char* start = "2021-07-01T12:00", int res = 60) {
    EvalEvent e;
    e.id = start;
    e.season = s;
    e.start = parse_timestamp(start);
    e.resolution = res;
    e.truth = std::move(y);
    e.estimate = std::move(f);
    return e;
}

bool close_rel(double a, long double b, double tol) {
    return std::fabs(a - static_cast<double>(b)) <= tol * std::max(1.0, std::fabs(static_cast<double>(b)));
}

struct ClogSilencer {
    std::ostringstream sink;
    std::streambuf* old = std::clog.rdbuf(sink.rdbuf());
    ~ClogSilencer() { std::clog.rdbuf(old); }
};

}  // namespace

TEST_CASE("metric worked examples") {

    const V y{100, 100};
    CHECK(event_nrmse(y, V{90, 110}) == doctest::Approx(0.10).epsilon(1e-12));
    CHECK(event_energy_error(y, V{90, 110}) == 0.0);
    CHECK(event_energy_error(y, V{90, 90}) == doctest::Approx(0.10).epsilon(1e-12));
    CHECK(event_bias(y, V{90, 110}) == doctest::Approx(0.0));
    CHECK(event_nrmse(y, y) == 0.0);
    CHECK(event_bias(y, y) == 0.0);
    CHECK(event_bias(std::vector<double>{50, 80, 120}, std::vector<double>{49, 78.4, 117.6}) ==
          doctest::Approx(2.0).epsilon(1e-12));
    CHECK_THROWS_AS(event_nrmse(y, std::vector<double>{1}), std::invalid_argument);
}

TEST_CASE("metrics match a brute-force oracle on 100 random event sets") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> load(0.5, 50.0), err(-0.3, 0.3);
    std::uniform_int_distribution<int> nev(1, 12), len(1, 16);
    for (int set = 0; set < 100; ++set) {
        std::vector<EvalEvent> events;
        long double sn = 0, se = 0, sb = 0;
        const int n = nev(rng);
        for (int i = 0; i < n; ++i) {
            std::vector<double> y(len(rng)), f(y.size());
            for (std::size_t t = 0; t < y.size(); ++t) y[t] = load(rng), f[t] = y[t] * (1 + err(rng));
            sn += bf_nrmse(y, f);
            se += bf_ee(y, f);
            sb += bf_bias(y, f);
            events.push_back(ev(y, f));
        }
        CHECK(close_rel(nrmse(events), sn / n, 1e-9));
        CHECK(close_rel(energy_error(events), se / n, 1e-9));
        CHECK(close_rel(bias(events), sb / n, 1e-9));
        auto m = evaluate(events);
        CHECK(m.n_events == static_cast<std::size_t>(n));
        double mean = 0;
        for (const auto& r : m.per_event) mean += r.nrmse / n;
        CHECK(m.nrmse == doctest::Approx(mean).epsilon(1e-12));
    }
}

TEST_CASE("metric properties") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> load(1.0, 9.0);
    std::vector<double> y(10), f(10);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = load(rng), f[i] = load(rng);
    SUBCASE("scale invariance") {
        for (double k : {0.001, 3.0, 1e4}) {
            std::vector<double> ky(y), kf(f);
            for (auto& v : ky) v *= k;
            for (auto& v : kf) v *= k;
            CHECK(event_nrmse(ky, kf) == doctest::Approx(event_nrmse(y, f)).epsilon(1e-12));
            CHECK(event_energy_error(ky, kf) == doctest::Approx(event_energy_error(y, f)).epsilon(1e-10));
            CHECK(event_bias(ky, kf) == doctest::Approx(event_bias(y, f)).epsilon(1e-12));
        }
    }
    SUBCASE("nrmse is zero only at equality") {
        CHECK(event_nrmse(y, y) == 0.0);
        auto g = y;
        g[4] += 1e-9;
        CHECK(event_nrmse(y, g) > 0.0);
    }
    SUBCASE("exclusions warn and drop the event") {
        ClogSilencer quiet;
        std::vector<EvalEvent> events{ev(V{0, 0}, V{1, 1}), ev({100, 100}, {90, 110})};
        CHECK(nrmse(events) == doctest::Approx(0.10));
        CHECK(quiet.sink.str().find("warning") != std::string::npos);
        std::vector<EvalEvent> one_zero{ev({0, 10}, {1, 1}), ev({100, 100}, {98, 98})};
        CHECK(bias(one_zero) == doctest::Approx(2.0));
        auto m = evaluate(one_zero);
        CHECK(std::isnan(m.per_event[0].bias));
        CHECK(!std::isnan(m.per_event[0].nrmse));
        CHECK_THROWS(nrmse(std::vector<EvalEvent>{ev(V{0, 0}, V{1, 1})}));
    }
}

TEST_CASE("seasonal bias filter") {
    std::vector<EvalEvent> all{
        ev({100, 100}, {98, 98}, Season::summer, "2021-07-01T12:00"),   // +2%, 12:00-14:00
        ev({100, 100}, {96, 96}, Season::summer, "2021-07-02T13:00"),   // +4%, 13:00-15:00
        ev({100, 100}, {101, 101}, Season::summer, "2021-07-03T02:00"), // -1%, night
        ev({100, 100}, {90, 90}, Season::winter, "2021-01-05T12:00"),   // +10%, other season
        ev({100, 100}, {95, 95}, Season::summer, "2021-07-04T23:00"),   // +5%, wraps past midnight
    };
    SUBCASE("whole-day window over one season is the plain bias of that season") {
        std::vector<EvalEvent> summer;
        for (const auto& e : all)
            if (e.season == Season::summer) summer.push_back(e);
        CHECK(seasonal_bias(all, Season::summer, {0, 1440}) == bias(summer));
        CHECK(seasonal_bias(summer, Season::summer, {0, 1440}) == bias(summer));
    }
    SUBCASE("subset equals recomputation over the kept events") {
        const double b = seasonal_bias(all, Season::summer, {13 * 60, 14 * 60});
        CHECK(b == bias(std::vector<EvalEvent>{all[0], all[1]}));
        CHECK(seasonal_bias(all, Season::summer, {0, 60}) == bias(std::vector<EvalEvent>{all[4]}));
        CHECK(seasonal_bias(all, Season::summer, {22 * 60, 30}) == bias(std::vector<EvalEvent>{all[4]}));
        CHECK(seasonal_bias(all, Season::winter, {11 * 60, 13 * 60}) == doctest::Approx(10.0));
    }
    SUBCASE("empty subsets are rejected") {
        CHECK_THROWS_AS(seasonal_bias(all, Season::spring, {0, 1440}), std::invalid_argument);
        CHECK_THROWS_AS(seasonal_bias(all, Season::summer, {6 * 60, 7 * 60}), std::invalid_argument);
    }
    SUBCASE("window overlap rule") {
        DayWindow w{600, 720};
        CHECK(w.overlaps(700, 800));
        CHECK(!w.overlaps(720, 800));
        CHECK(!w.overlaps(500, 600));
        CHECK(DayWindow{1380, 60}.overlaps(0, 30));
        CHECK(DayWindow{1380, 60}.overlaps(1400, 1420));
        CHECK(!DayWindow{1380, 60}.overlaps(120, 200));
    }
}

TEST_CASE("cvr math") {
    SUBCASE("planted baselines") {
        std::vector<double> y(8, 95.0), b(8, 100.0);
        CHECK(std::abs(cvr_raw(y, b) - (-5.263)) < 0.001);
        std::vector<double> yy{90, 100, 110, 120}, over(4), scaled(4);
        for (int i = 0; i < 4; ++i) over[i] = yy[i] / 0.95, scaled[i] = yy[i] * 0.95;
        CHECK(std::abs(cvr_raw(yy, over) - (-5.263)) < 0.001);
        CHECK(cvr_raw(yy, scaled) == doctest::Approx(5.0).epsilon(1e-12));
        CHECK(cvr_raw(yy, yy) == 0.0);
        CHECK_THROWS_AS(cvr_raw(std::vector<double>{0, 1}, std::vector<double>{1, 1}), std::invalid_argument);
    }
    SUBCASE("net and factor") {
        CHECK(cvr_net(-5.0, 0.0) == -5.0);
        CHECK(cvr_net(-5.0, -1.5) == -3.5);
        std::vector<NetAndDeltaV> one{{-2.0, 0.04}};
        CHECK(cvr_factor(one) == -0.5);
        std::vector<NetAndDeltaV> two{{-2.0, 0.04}, {-3.0, 0.02}};
        CHECK(cvr_factor(two) == doctest::Approx(-1.0));
    }
    SUBCASE("effect curve") {
        std::vector<MeasuredAndBaseline> same{{{10, 20, 30}, {10, 20, 30}}};
        auto c0 = effect_curve(same);
        CHECK(c0.mean_pct == std::vector<double>{0, 0, 0});

        MeasuredAndBaseline a{{95, 95, 95, 95}, {100, 100, 100, 100}};
        MeasuredAndBaseline b{std::vector<double>(8, 190.0), std::vector<double>(8, 200.0)};
        auto c = effect_curve({a, b});
        REQUIRE(c.mean_pct.size() == 8);
        for (std::size_t k = 0; k < 4; ++k) CHECK(c.count[k] == 2);
        for (std::size_t k = 4; k < 8; ++k) {
            CHECK(c.count[k] == 1);
            CHECK(c.mean_pct[k] == doctest::Approx(-10.0 / 190.0 * 100));
        }
        CHECK(c.mean_pct[0] == doctest::Approx(-5.0 / 95.0 * 100));

        MeasuredAndBaseline single{{97, 103, 88}, {100, 100, 100}};
        auto cs = effect_curve({single});
        for (std::size_t k = 0; k < 3; ++k)
            CHECK(cs.mean_pct[k] == doctest::Approx(100 * (single.measured[k] - 100) / single.measured[k]).epsilon(1e-14));
    }
    SUBCASE("report takes each event's bias from its season and time of day") {
        std::vector<EvalEvent> test{
            ev({100, 100}, {98, 98}, Season::summer, "2021-07-01T14:00"),
            ev({100, 100}, {99, 99}, Season::winter, "2021-01-01T08:00"),
        };
        CvrInput e1{"s", Season::summer, parse_timestamp("2022-07-10T15:00"), 60, 0.04, {95, 95}, {100, 100}};
        CvrInput e2{"w", Season::winter, parse_timestamp("2022-01-10T07:00"), 60, 0.02, {97, 97}, {100, 100}};
        auto r = cvr_report({e1, e2}, test);
        REQUIRE(r.events.size() == 2);
        CHECK(r.events[0].seasonal_bias == doctest::Approx(2.0));
        CHECK(r.events[1].seasonal_bias == doctest::Approx(1.0));
        for (const auto& x : r.events) CHECK(x.cvr_net == x.cvr_raw - x.seasonal_bias);
        const double expect = ((r.events[0].cvr_net / 100) / 0.04 + (r.events[1].cvr_net / 100) / 0.02) / 2;
        CHECK(r.cvr_factor == doctest::Approx(expect).epsilon(1e-12));
        CHECK(r.curve.count == std::vector<std::size_t>{2, 2});
    }
}

TEST_CASE("reference restorers") {
    NormStats st{10.0, 2.0, 0.0, 1.0};
    Sample s;
    s.load_masked.assign(16, 0.0f);
    s.temperature.assign(16, 0.0f);
    s.mask.assign(16, 0.0f);
    s.event = {5, 3};
    for (std::size_t i = 5; i < 8; ++i) s.mask[i] = 1;
    // normalized (x - 10) / 2: 10 kW -> 0, 20 kW -> 5
    s.load_masked[4] = 0.0f;
    s.load_masked[8] = 5.0f;
    SUBCASE("linear interpolation follows the line") {
        auto e = linear_interp(s, st);
        REQUIRE(e.size() == 3);
        CHECK(e[0] == doctest::Approx(12.5));
        CHECK(e[1] == doctest::Approx(15.0));
        CHECK(e[2] == doctest::Approx(17.5));
    }
    SUBCASE("linear truth is restored exactly") {
        for (std::size_t i = 0; i < 16; ++i) s.load_masked[i] = s.mask[i] ? 0.0f : 0.25f * static_cast<float>(i);
        auto e = linear_interp(s, st);
        for (std::size_t k = 0; k < 3; ++k) CHECK(e[k] == doctest::Approx(10.0 + 2.0 * 0.25 * (5 + k)));
    }
    SUBCASE("persistence") {
        CHECK(persistence(s, st) == std::vector<double>{10, 10, 10});
        s.prior_day = {1.0f, 2.0f, 3.0f};
        CHECK(persistence(s, st) == std::vector<double>{12, 14, 16});
    }
    SUBCASE("events at the window edge are rejected") {
        s.event = {0, 3};
        CHECK_THROWS_AS(linear_interp(s, st), std::invalid_argument);
    }
}

TEST_CASE("reports") {
    std::vector<EvalEvent> events{ev({100, 100}, {90, 110}), ev({100, 100}, {98, 98}, Season::winter, "2021-01-02T03:00")};
    const auto m = evaluate(events);
    SUBCASE("metrics json carries aggregates and per-event rows") {
        std::ostringstream o;
        write_metrics_json(o, m);
        auto j = nlohmann::json::parse(o.str());
        CHECK(j["n_events"] == 2);
        CHECK(j["nrmse"].get<double>() == doctest::Approx(m.nrmse));
        CHECK(j["events"].size() == 2);
        CHECK(j["events"][1]["season"] == "winter");
    }
    SUBCASE("event csv header and row count") {
        std::ostringstream o;
        write_metrics_csv(o, m);
        std::istringstream in(o.str());
        std::string line;
        std::getline(in, line);
        CHECK(line == "event_id,season,duration_steps,nrmse,ee,bias,cvr_raw,cvr_net,delta_v");
        int rows = 0;
        while (std::getline(in, line)) {
            ++rows;
            CHECK(std::count(line.begin(), line.end(), ',') == 8);
        }
        CHECK(rows == 2);
    }
    SUBCASE("cvr outputs") {
        CvrInput e{"c1", Season::summer, parse_timestamp("2022-07-10T12:00"), 60, 0.04, {95, 95}, {100, 100}};
        auto r = cvr_report({e}, events);
        std::ostringstream j, c, t, curve;
        write_cvr_json(j, r);
        auto parsed = nlohmann::json::parse(j.str());
        CHECK(parsed["cvr_factor"].get<double>() == doctest::Approx(r.cvr_factor));
        write_cvr_csv(c, r);
        CHECK(c.str().rfind(std::string(kEventCsvHeader) + "\n", 0) == 0);
        write_cvr_text(t, r);
        CHECK(!t.str().empty());
        write_effect_curve_csv(curve, r.curve, 60);
        CHECK(curve.str().rfind("step,elapsed_min,mean_effect_pct,events\n", 0) == 0);
    }
}
