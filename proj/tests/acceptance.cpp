// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset, e.g. `loadpin_acceptance 1 4 5`.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <unistd.h>

#include "loadpin/checkpoint.hpp"
#include "loadpin/cvr.hpp"
#include "loadpin/losses.hpp"
#include "loadpin/metrics.hpp"
#include "loadpin/restorers.hpp"
#include "loadpin/synth.hpp"
#include "loadpin/trainer.hpp"
#include "oracles.hpp"

using namespace loadpin;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... a) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, a...);
    return buf;
}

void progress(const std::string& s) { std::fprintf(stderr, "  .. %s\n", s.c_str()); }

// ---------------------------------------------------------------------------
// Data and evaluation helpers

SampleSet synth_set(int res, int users, int days, std::uint64_t seed, double min_h, double max_h,
                    RawSeries* series = nullptr, std::uint64_t sample_seed = 0) {
    SynthConfig c;
    c.days = days;
    c.resolution = res;
    c.n_users = users;
    c.seed = seed;
    auto s = synth_series(c);
    SampleGenConfig g;
    g.seed = sample_seed ? sample_seed : seed;
    g.min_hours = min_h;
    g.max_hours = max_h;
    auto set = generate_samples(s, g);
    if (series) *series = std::move(s);
    return set;
}

std::vector<double> truth_kw(const Sample& s, const NormStats& st) {
    std::vector<double> y;
    for (float v : *s.truth_event) y.push_back(denormalize(v, st, Channel::load));
    return y;
}

struct SplitScore {
    double stage1 = 0, stage2 = 0, linear = 0;
    std::size_t n = 0;
};

SplitScore score(const Generator<float>& g, const std::vector<Sample>& samples, const NormStats& st) {
    SplitScore r;
    const auto est = inpaint_stages(g, samples, st);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto y = truth_kw(samples[i], st);
        r.stage1 += event_nrmse(y, est[i].stage1);
        r.stage2 += event_nrmse(y, est[i].stage2);
        r.linear += event_nrmse(y, linear_interp(samples[i], st));
    }
    r.n = samples.size();
    r.stage1 /= static_cast<double>(r.n);
    r.stage2 /= static_cast<double>(r.n);
    r.linear /= static_cast<double>(r.n);
    return r;
}

FitResult train(const SampleSet& set, const TrainConfig& tc, const std::string& tag) {
    const auto t0 = std::chrono::steady_clock::now();
    return fit(tc, GeneratorConfig::standard(), DiscConfig::standard(), set, [&](std::size_t it, const LossReport& l) {
        if (it % 250 == 0) {
            const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            progress(fmt("%s it %zu l_coarse %.4f l_content2 %.4f l_d %.3f (%.0f s)", tag.c_str(), it, l.l_coarse,
                         l.l_content2, l.l_d, sec));
        }
    });
}

// Test windows of the 1-4 h checkpoint re-masked with a fixed length.
std::vector<Sample> remask(const std::vector<Sample>& test, const RawSeries& s, const NormStats& st, std::size_t len) {
    std::vector<Sample> out;
    for (const auto& smp : test) out.push_back(make_window_sample(s, *s.index_of(smp.origin), len, st));
    return out;
}

// ---------------------------------------------------------------------------
// Criteria

Outcome gradient_suite() {
    using nn::Activation;
    using nn::LayerKind;
    auto spec = [](LayerKind k, std::size_t ks, std::size_t out, std::size_t st, bool sn = false, std::size_t heads = 0,
                   Activation a = Activation::leaky_relu) {
        nn::LayerSpec s;
        s.kind = k, s.kernel_size = ks, s.out_channels = out, s.stride = st, s.spectral_norm = sn, s.heads = heads,
        s.activation = a;
        return s;
    };
    std::map<std::string, double> worst;
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        nn::GatedConv<double> gc(spec(LayerKind::gc, 4, 5, 2), 3, "gc");
        worst["gated conv"] = std::max(worst["gated conv"],
                                       oracle::layer_gradient_error(gc, oracle::random_tensor<double>(2, 3, 12, seed), seed));
        nn::GatedConv<double> gtc(spec(LayerKind::gtc, 3, 4, 2), 5, "gtc");
        worst["gated tconv"] = std::max(
            worst["gated tconv"], oracle::layer_gradient_error(gtc, oracle::random_tensor<double>(2, 5, 6, seed), seed));
        nn::MultiHeadAttention<double> at(spec(LayerKind::attention, 1, 8, 1, false, 4, Activation::identity), 8, "at");
        worst["attention"] = std::max(worst["attention"],
                                      oracle::layer_gradient_error(at, oracle::random_tensor<double>(2, 8, 7, seed), seed));
        nn::Conv<double> sn(spec(LayerKind::cnn, 4, 6, 2, true), 2, "sn");
        worst["sn conv"] = std::max(worst["sn conv"],
                                    oracle::layer_gradient_error(sn, oracle::random_tensor<double>(2, 2, 16, seed), seed));
        nn::Conv<double> dn(spec(LayerKind::dense, 1, 5, 1), 3, "dense");
        worst["dense"] = std::max(worst["dense"],
                                  oracle::layer_gradient_error(dn, oracle::random_tensor<double>(2, 3, 4, seed), seed));
    }
    Outcome o{true, "6 seeds, h=1e-4, worst rel err:"};
    for (auto& [k, v] : worst) {
        o.pass = o.pass && v < 1e-3;
        o.detail += fmt(" %s %.1e", k.c_str(), v);
    }
    return o;
}

Outcome shape_suite() {
    Outcome o{true, ""};
    Generator<float> g(GeneratorConfig::standard());
    g.init(1);
    Discriminator<float> d(DiscConfig::standard());
    d.init(2);
    d.refresh_spectral_norm(1);
    std::mt19937 rng(3);
    std::uniform_real_distribution<float> u(-1, 1);
    double worst_row = 0;
    std::size_t attn = 0;
    for (std::size_t W : {32u, 96u, 288u}) {
        Tensor3<float> z(2, 3, W);
        for (std::size_t i = 0; i < z.size(); ++i) z[i] = u(rng);
        for (std::size_t b = 0; b < 2; ++b)
            for (std::size_t t = 0; t < W; ++t) z(b, 2, t) = (t >= W / 3 && t < W / 2) ? 1.0f : 0.0f;
        GeneratorTrace<float> tr;
        auto out = g.forward(z, &tr);
        const bool len_ok = out.stage1.time() == W && out.stage2.time() == W;
        Tensor3<float> x(2, 2, W);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = u(rng);
        const std::size_t M = d.forward(x).per_sample();
        const bool m_ok = M == 256 * ((W + 31) / 32);
        o.pass = o.pass && len_ok && m_ok;
        o.detail += fmt("W=%zu: len %s, M=%zu; ", W, len_ok ? "kept" : "CHANGED", M);
        attn = 0;
        for (std::size_t i = 0; i < g.fine().size(); ++i) {
            if (g.fine().layer(i).spec().kind != nn::LayerKind::attention) continue;
            ++attn;
            const auto& p = nn::MultiHeadAttention<float>::probabilities(tr.fine.caches.at(i));
            for (std::size_t r = 0; r < p.batch(); ++r)
                for (std::size_t t = 0; t < p.channels(); ++t) {
                    double s = 0;
                    for (std::size_t k = 0; k < p.time(); ++k) s += p(r, t, k);
                    worst_row = std::max(worst_row, std::abs(s - 1.0));
                }
        }
    }
    o.pass = o.pass && attn == 4 && worst_row <= 1e-6;
    o.detail += fmt("attention blocks %zu, max |row sum - 1| %.1e", attn, worst_row);
    return o;
}

Outcome spectral_suite() {
    auto set = synth_set(60, 50, 30, 2, 1, 4);
    TrainConfig tc;
    tc.sn_iters = 20;
    auto gen = GeneratorConfig::standard().scaled(8);
    gen.window = set.window();
    Trainer t(gen, DiscConfig::standard(), tc, set.resolution);
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<std::size_t> pick(0, set.train.size() - 1);
    for (int step = 0; step < 100; ++step) {
        std::vector<const Sample*> b;
        for (std::size_t k = 0; k < tc.batch_size; ++k) b.push_back(&set.train[pick(rng)]);
        t.step(b);
    }
    Outcome o{true, "sigma_1 of normalized D weights after 100 steps x 20 iters:"};
    auto& net = t.discriminator().net();
    for (std::size_t i = 0; i < net.size(); ++i) {
        const auto* c = dynamic_cast<const nn::Conv<float>*>(&net.layer(i));
        if (!c || !c->spec().spectral_norm) continue;
        const double s = oracle::largest_singular_value(c->effective_weight().cast<double>());
        o.pass = o.pass && s >= 0.95 && s <= 1.05;
        o.detail += fmt(" %.4f", s);
    }
    return o;
}

Outcome loss_oracles() {
    const std::vector<double> zero(64, 0.0);
    const double d0 = disc_loss<double>(zero, zero);

    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-2, 2);
    std::vector<double> y(96), off(96);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = u(rng), off[i] = y[i] - 0.3;
    const double shifted = content_loss<double>(off, y, {20, 70});

    const double content = 0.4171, refine0 = refine_loss(content, 3.7, 1.9, 0, 0);

    const std::vector<double> s{0.5, -1.5, 2.0};
    const double adv = adv_loss<double>(s);

    // one tap of 2x3 values, fake = real + 0.5 everywhere
    Tensor3<double> r(1, 2, 3), f(1, 2, 3);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = u(rng), f[i] = r[i] + 0.5;
    const double feat = feat_loss<double>({f}, {r});

    const bool pass = std::abs(d0 - 2) <= 1e-6 && std::abs(refine0 - content) <= 1e-6 &&
                      std::abs(shifted - 0.09) <= 1e-6 && std::abs(adv + 1.0 / 3.0) <= 1e-6 &&
                      std::abs(feat - 0.25) <= 1e-6;
    return {pass, fmt("disc(0,0) %.9f; refine with lambdas 0 minus content %.1e; content at offset 0.3 %.9f; "
                      "adv %.9f; feat %.9f",
                      d0, refine0 - content, shifted, adv, feat)};
}

Outcome metric_oracles() {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> load(0.2, 80.0), err(-0.4, 0.4);
    std::uniform_int_distribution<int> nev(1, 20), len(1, 24);
    double worst = 0;
    for (int set = 0; set < 100; ++set) {
        std::vector<EvalEvent> events;
        long double sn = 0, se = 0, sb = 0;
        const int n = nev(rng);
        for (int i = 0; i < n; ++i) {
            EvalEvent e;
            e.truth.resize(static_cast<std::size_t>(len(rng)));
            for (double& v : e.truth) {
                v = load(rng);
                e.estimate.push_back(v * (1 + err(rng)));
            }
            long double sq = 0, ay = 0, d = 0, sy = 0, r = 0;
            for (std::size_t t = 0; t < e.truth.size(); ++t) {
                const long double yt = e.truth[t], ft = e.estimate[t];
                sq += (yt - ft) * (yt - ft), ay += std::fabs(yt), d += yt - ft, sy += yt, r += (yt - ft) / yt;
            }
            const long double T = static_cast<long double>(e.truth.size());
            sn += std::sqrt(sq / T) / (ay / T), se += std::fabs(d) / sy, sb += 100 * r / T;
            events.push_back(std::move(e));
        }
        auto rel = [](double a, long double b) -> double { return std::fabs(a - static_cast<double>(b)) / std::max(1e-300L, std::fabs(b)); };
        worst = std::max({worst, rel(nrmse(events), sn / n), rel(energy_error(events), se / n), rel(bias(events), sb / n)});
    }
    const std::vector<double> y{100, 100}, a{90, 110}, b{90, 90};
    const double n1 = event_nrmse(y, a), e1 = event_energy_error(y, b), b1 = event_bias(y, a);
    const bool ex = std::abs(n1 - 0.10) < 1e-12 && std::abs(e1 - 0.10) < 1e-12 && std::abs(b1) < 1e-12;
    return {worst <= 1e-9 && ex,
            fmt("100 random sets, worst rel diff %.1e; examples nrmse %.12f ee %.12f bias %.12f%%", worst, n1, e1, b1)};
}

Outcome cvr_math() {
    std::vector<double> y{80, 95, 120, 60}, yh;
    for (double v : y) yh.push_back(v / 0.95);
    const double raw = cvr_raw(y, yh);
    std::vector<NetAndDeltaV> one{{-2.0, 0.04}};
    const double f = cvr_factor(one);

    // seasonal filter against an explicit subset recomputation
    std::vector<EvalEvent> test;
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> r(0.9, 1.1);
    std::uniform_int_distribution<int> hour(0, 23), season(0, 3);
    const char* months[] = {"01", "04", "07", "10"};
    for (int i = 0; i < 400; ++i) {
        EvalEvent e;
        const int s = season(rng), h = hour(rng);
        e.start = parse_timestamp(fmt("2021-%s-%02dT%02d:00", months[s], 1 + i % 28, h));
        e.season = season_of(e.start);
        e.resolution = 60;
        for (int k = 0; k < 3; ++k) e.truth.push_back(100), e.estimate.push_back(100 * r(rng));
        test.push_back(e);
    }
    const DayWindow w{10 * 60, 14 * 60};
    std::vector<EvalEvent> subset;
    for (const auto& e : test) {
        const int b = minute_of_day(e.start), en = b + 180;
        const bool overlap = (b < w.end && w.begin < en) || (b - 1440 < w.end && w.begin < en - 1440);
        if (e.season == Season::summer && overlap) subset.push_back(e);
    }
    const double sb = seasonal_bias(test, Season::summer, w), direct = bias(subset);
    const bool pass = std::abs(raw - (-5.263)) <= 0.001 && f == -0.5 && sb == direct && !subset.empty();
    return {pass, fmt("raw %.4f%%, factor %.17g, seasonal bias %.6f%% (subset of %zu: %.6f%%)", raw, f, sb, subset.size(),
                      direct)};
}

Outcome overfit() {
    // 64 fixed 15-min windows with centred 3-h masks.
    auto full = synth_set(15, 100, 60, 7, 3, 3);
    SampleSet set = full;
    set.train.resize(64);
    set.validation.clear();
    set.test.clear();
    TrainConfig tc;  // default config, 2000 iterations
    std::ostringstream quiet;
    auto* old = std::clog.rdbuf(quiet.rdbuf());
    const auto t0 = std::chrono::steady_clock::now();
    auto res = train(set, tc, "overfit");
    std::clog.rdbuf(old);
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto sc = score(res.best.generator(), set.train, set.stats);
    double early = 0, late = 0;
    for (std::size_t i = 0; i < 100; ++i) early += res.history[i].l_coarse / 100;
    for (std::size_t i = 1899; i < 2000; ++i) late += res.history[i].l_coarse / 101;
    const bool pass = sc.stage2 < 0.10 && sc.stage2 <= sc.stage1 + 0.02 && late < early && sec < 1800;
    return {pass, fmt("train nRMSE stage2 %.4f stage1 %.4f (linear %.4f); l_coarse %.4f -> %.4f; %.0f s", sc.stage2,
                      sc.stage1, sc.linear, early, late, sec)};
}

struct VariableRun {
    RawSeries series;
    SampleSet set;
    FitResult fit;
};

Outcome generalization() {
    // a year of hourly data, default config
    auto set = synth_set(60, 100, 365, 21, 1, 4, nullptr, 5);
    const auto res = train(set, TrainConfig{}, "hourly");
    const auto sc = score(res.best.generator(), set.test, set.stats);
    const double gain = 1 - sc.stage2 / sc.linear;
    return {gain >= 0.20, fmt("hourly test nRMSE %.4f vs linear %.4f over %zu events: %.1f%% better (need >= 20%%)",
                              sc.stage2, sc.linear, sc.n, 100 * gain)};
}

Outcome variable_length() {
    // 15-min data, default config, masks 1-4 h mixed during training
    VariableRun v;
    v.set = synth_set(15, 100, 120, 21, 1, 4, &v.series, 5);
    v.fit = train(v.set, TrainConfig{}, "variable");
    const auto g = v.fit.best.generator();
    Outcome o{true, "mean test nRMSE by mask length:"};
    double prev = 0;
    for (int h = 1; h <= 4; ++h) {
        const auto samples = remask(v.set.test, v.series, v.set.stats, static_cast<std::size_t>(h * 60 / v.set.resolution));
        bool finite = true;
        for (const auto& e : inpaint_stages(g, samples, v.set.stats))
            for (double x : e.stage2) finite = finite && std::isfinite(x);
        const double m = score(g, samples, v.set.stats).stage2;
        o.pass = o.pass && finite && m >= prev;
        o.detail += fmt(" %dh %.4f%s", h, m, finite ? "" : " (non-finite)");
        prev = m;
    }
    return o;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism() {
    auto set = synth_set(60, 40, 20, 5, 1, 4);
    TrainConfig tc;
    tc.max_iters = 12;
    tc.eval_every = 4;
    tc.val_max = 16;
    const auto a = fit(tc, GeneratorConfig::standard(), DiscConfig::standard(), set);
    const auto b = fit(tc, GeneratorConfig::standard(), DiscConfig::standard(), set);
    const auto base = fs::temp_directory_path() / ("loadpin_accept_" + std::to_string(::getpid()));
    save_checkpoint(a.best, base / "a");
    save_checkpoint(b.best, base / "b");
    const bool bytes = slurp(base / "a" / "params.bin") == slurp(base / "b" / "params.bin") &&
                       slurp(base / "a" / "manifest.json") == slurp(base / "b" / "manifest.json");
    const auto loaded = load_checkpoint(base / "a").generator();
    const auto live = a.best.generator();
    bool same = true;
    for (const auto& s : set.test) same = same && inpaint(loaded, s, set.stats) == inpaint(live, s, set.stats);
    fs::remove_all(base);
    const bool pass = a.history == b.history && bytes && same;
    return {pass, fmt("%zu identical loss reports: %s; checkpoint bytes equal: %s; reload inpaint equal on %zu events: %s",
                      a.history.size(), a.history == b.history ? "yes" : "no", bytes ? "yes" : "no", set.test.size(),
                      same ? "yes" : "no")};
}

Outcome aggregation() {
    TrainConfig tc;
    tc.max_iters = 1000;
    double m[2];
    int users[2] = {10, 100};
    for (int i = 0; i < 2; ++i) {
        auto set = synth_set(60, users[i], 365, 31, 1, 4);
        auto res = train(set, tc, fmt("users=%d", users[i]));
        m[i] = score(res.best.generator(), set.test, set.stats).stage2;
    }
    return {m[1] < m[0], fmt("hourly, %zu iterations each: test nRMSE 10 users %.4f, 100 users %.4f", tc.max_iters, m[0], m[1])};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"gradient suite", gradient_suite},
        {"architecture shapes", shape_suite},
        {"spectral norm", spectral_suite},
        {"loss oracles", loss_oracles},
        {"metric oracles", metric_oracles},
        {"cvr math", cvr_math},
        {"synthetic overfit", overfit},
        {"generalization vs linear interpolation", generalization},
        {"variable-length masks", variable_length},
        {"determinism and persistence", determinism},
        {"aggregation trend", aggregation},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    int failed = 0, ran = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i + 1);
        if (!only.empty() && !only.count(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("[%s] %2d %s (%.1f s): %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, sec, o.detail.c_str());
        std::fflush(stdout);
        failed += !o.pass;
        ++ran;
    }
    std::printf("%d/%d criteria passed\n", ran - failed, ran);
    return failed == 0 ? 0 : 1;
}
