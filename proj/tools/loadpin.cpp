// loadpin: synthesize or ingest load data, prepare samples, train, inpaint,
// evaluate and report CVR efficacy.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "loadpin/checkpoint.hpp"
#include "loadpin/cvr.hpp"
#include "loadpin/metrics.hpp"
#include "loadpin/report.hpp"
#include "loadpin/restorers.hpp"
#include "loadpin/samples.hpp"
#include "loadpin/series.hpp"
#include "loadpin/synth.hpp"
#include "loadpin/trainer.hpp"

namespace fs = std::filesystem;
using namespace loadpin;

namespace {

struct Common {
    std::string config;
    std::uint64_t seed = 1;
    std::string out;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "key=value file; command-line flags take precedence")->check(CLI::ExistingFile);
    sub->add_option("--seed", c.seed, "seed for all randomness");
    sub->add_option("--out", c.out, "output directory (required)");
}

/// Required options are checked after the config file is merged, so either
/// source can supply them.
void require(CLI::App* sub, std::initializer_list<const char*> names) {
    for (const char* n : names)
        if (sub->get_option(n)->count() == 0)
            throw std::invalid_argument(std::string(n) + " is required (flag or config key '" + (n + 2) + "')");
}

std::string trim(std::string s) {
    auto sp = [](char ch) { return ch == ' ' || ch == '\t' || ch == '\r'; };
    while (!s.empty() && sp(s.back())) s.pop_back();
    while (!s.empty() && sp(s.front())) s.erase(s.begin());
    if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\'')))
        s = s.substr(1, s.size() - 2);
    return s;
}

/// Fills options the command line left unset from a key=value file.
void apply_config_file(CLI::App* sub, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path);
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        line = trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';' || line[0] == '[') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw std::runtime_error("config " + path + ":" + std::to_string(no) + ": expected key=value");
        const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        if (key == "config") continue;
        CLI::Option* opt = sub->get_option_no_throw("--" + key);
        if (!opt) throw std::runtime_error("config " + path + ":" + std::to_string(no) + ": unknown key '" + key + "'");
        if (opt->count() > 0) continue;
        if (value.empty()) continue;
        opt->add_result(value);
        opt->run_callback();
    }
}

void write_run_config(const CLI::App* sub, const fs::path& dir) {
    fs::create_directories(dir);
    std::ofstream out(dir / "run_config.ini");
    out << "# " << sub->get_name() << '\n' << sub->config_to_str(true, false);
}

std::pair<double, double> parse_mask_hours(const std::string& s) {
    const auto c = s.find(':');
    if (c == std::string::npos) throw std::invalid_argument("--mask-hours: expected MIN:MAX, got '" + s + "'");
    try {
        return {std::stod(s.substr(0, c)), std::stod(s.substr(c + 1))};
    } catch (const std::exception&) {
        throw std::invalid_argument("--mask-hours: expected MIN:MAX, got '" + s + "'");
    }
}

std::string event_id(std::size_t i, const char* split) {
    return std::string(split) + "-" + std::to_string(i);
}

std::vector<double> kw(std::span<const float> v, const NormStats& st) {
    std::vector<double> out;
    for (float x : v) out.push_back(denormalize(x, st, Channel::load));
    return out;
}

const std::vector<Sample>& split_of(const SampleSet& set, const std::string& name) {
    if (name == "train") return set.train;
    if (name == "validation") return set.validation;
    if (name == "test") return set.test;
    if (name == "cvr") return set.cvr;
    throw std::invalid_argument("--split must be train, validation, test or cvr (got '" + name + "')");
}

/// Restored test events through the checkpoint's generator.
std::vector<EvalEvent> model_events(const Generator<float>& g, const std::vector<Sample>& v, const NormStats& st, int res,
                                    const char* split) {
    const auto est = inpaint_stages(g, v, st);
    std::vector<EvalEvent> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto& s = v[i];
        out.push_back({event_id(i, split), s.season, s.time_at(s.event.start_index, res), res, kw(*s.truth_event, st),
                       est[i].stage2});
    }
    return out;
}

void write_text_file(const fs::path& p, const std::string& body) {
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << body;
}

template <typename F>
void write_with(const fs::path& p, F&& f) {
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    f(out);
}

// ---------------------------------------------------------------------------

struct SynthOpts {
    Common c;
    SynthConfig s;
    std::string start = "2021-01-01T00:00";
    int cvr_events = 0;
    double cvr_factor = 0.8, delta_v = 0.04;
};

int cmd_synth(const SynthOpts& o) {
    SynthConfig cfg = o.s;
    cfg.seed = o.c.seed;
    cfg.start = parse_timestamp(o.start);
    RawSeries s = synth_series(cfg);
    std::vector<CvrEvent> events;
    if (o.cvr_events > 0) {
        // afternoon events on distinct days, away from the series edges
        const int days = cfg.days;
        if (days < 3 + o.cvr_events) throw std::invalid_argument("--cvr-events: too many events for --days");
        std::mt19937_64 rng(o.c.seed ^ 0xc0ffeeULL);
        std::vector<int> day_pool;
        for (int d = 1; d + 1 < days; ++d) day_pool.push_back(d);
        std::shuffle(day_pool.begin(), day_pool.end(), rng);
        std::uniform_int_distribution<int> hour(12, 16);
        const int step = cfg.resolution;
        std::uniform_int_distribution<int> dur((75 + step - 1) / step, 190 / step);
        for (int k = 0; k < o.cvr_events; ++k) {
            const auto t = s.start_time + std::chrono::days(day_pool[static_cast<std::size_t>(k)]) + std::chrono::hours(hour(rng));
            events.push_back({t, std::max(60, dur(rng) * step), o.delta_v});
        }
        std::sort(events.begin(), events.end(), [](const CvrEvent& a, const CvrEvent& b) { return a.start < b.start; });
        apply_cvr_events(s, events, o.cvr_factor);
    }
    const fs::path dir(o.c.out);
    fs::create_directories(dir);
    write_csv_file(dir / "series.csv", s);
    if (!events.empty()) write_with(dir / "events.csv", [&](std::ostream& out) { write_cvr_events(out, events); });
    std::cout << "wrote " << s.size() << " steps to " << (dir / "series.csv").string();
    if (!events.empty()) std::cout << " and " << events.size() << " CVR events";
    std::cout << '\n';
    return 0;
}

struct IngestOpts {
    Common c;
    std::string input;
    int resolution = 0;
};

int cmd_ingest(const IngestOpts& o) {
    RawSeries s = ingest_csv_file(o.input);
    if (o.resolution && o.resolution != s.resolution) s = resample(s, o.resolution);
    const fs::path dir(o.c.out);
    fs::create_directories(dir);
    write_csv_file(dir / "series.csv", s);
    const auto missing = std::count(s.missing.begin(), s.missing.end(), 1);
    std::cout << "ingested " << s.size() << " steps at " << s.resolution << " min, " << missing << " missing\n";
    return 0;
}

struct PrepareOpts {
    Common c;
    std::string series, events, mask_hours = "1:4";
    int resolution = 0;
    std::size_t shift = 0;
};

int cmd_prepare(const PrepareOpts& o) {
    RawSeries s = ingest_csv_file(o.series);
    if (o.resolution && o.resolution != s.resolution) s = resample(s, o.resolution);
    SampleGenConfig g;
    std::tie(g.min_hours, g.max_hours) = parse_mask_hours(o.mask_hours);
    g.shift_steps = o.shift;
    g.seed = o.c.seed;
    if (!o.events.empty()) g.cvr_events = read_cvr_events_file(o.events);
    SampleSet set = generate_samples(s, g);
    if (!g.cvr_events.empty()) set.cvr = make_cvr_samples(s, g.cvr_events, set.stats);
    save_sample_set(set, o.c.out);
    std::cout << "samples: train " << set.train.size() << ", validation " << set.validation.size() << ", test "
              << set.test.size() << ", cvr " << set.cvr.size() << '\n';
    return 0;
}

struct TrainOpts {
    Common c;
    std::string samples;
    TrainConfig t;
    std::size_t scale = 1;
    long margin = -1;
    bool quiet = false;
};

int cmd_train(const TrainOpts& o) {
    const SampleSet set = load_sample_set(o.samples);
    TrainConfig tc = o.t;
    tc.seed = o.c.seed;
    if (o.margin >= 0) tc.margin_steps = static_cast<std::size_t>(o.margin);
    GeneratorConfig gen = GeneratorConfig::standard();
    DiscConfig disc = DiscConfig::standard();
    if (o.scale > 1) {
        gen = gen.scaled(o.scale);
        disc = disc.scaled(o.scale);
    }
    const auto every = std::max<std::size_t>(1, tc.max_iters / 20);
    const FitResult r = fit(tc, gen, disc, set, [&](std::size_t it, const LossReport& l) {
        if (!o.quiet && (it % every == 0 || it == 1))
            std::clog << "iter " << it << " l_coarse " << l.l_coarse << " l_content2 " << l.l_content2 << " l_adv " << l.l_adv
                      << " l_feat " << l.l_feat << " l_d " << l.l_d << '\n';
    });
    const fs::path dir(o.c.out);
    save_checkpoint(r.best, dir / "checkpoint");
    write_with(dir / "loss_curve.csv", [&](std::ostream& out) { write_loss_curve_csv(out, r.history, r.validation); });
    nlohmann::json j;
    j["iterations"] = tc.max_iters;
    j["best_iteration"] = r.best_iteration;
    j["best_val_content2"] = std::isfinite(r.best_val_loss) ? nlohmann::json(r.best_val_loss) : nlohmann::json(nullptr);
    write_text_file(dir / "train_summary.json", j.dump(1) + "\n");
    std::cout << "checkpoint (iteration " << r.best_iteration << ") saved to " << (dir / "checkpoint").string() << '\n';
    return 0;
}

struct InpaintOpts {
    Common c;
    std::string checkpoint, window, samples, split = "test";
    std::size_t index = 0;
};

/// A 24-h CSV window whose missing loads form the segment to restore.
Sample sample_from_window(const RawSeries& w, const NormStats& st, std::size_t W) {
    const std::size_t D = w.steps_per_day();
    if (w.size() != D) throw std::invalid_argument("--window must hold exactly 24 h (" + std::to_string(D) + " rows)");
    std::size_t first = D, last = 0;
    for (std::size_t i = 0; i < D; ++i)
        if (w.missing[i]) {
            first = std::min(first, i);
            last = i;
        }
    if (first == D) throw std::invalid_argument("--window has no missing load to restore");
    for (std::size_t i = first; i <= last; ++i)
        if (!w.missing[i]) throw std::invalid_argument("--window: missing loads must be one contiguous run");
    Sample s;
    s.pad_left = (W - D) / 2;
    s.origin = w.start_time;
    s.season = season_of(s.origin);
    s.event = {s.pad_left + first, last - first + 1, EventKind::mask, 0.0};
    s.event.validate(W, w.resolution);
    if (first == 0 || last + 1 == D) throw std::invalid_argument("--window: the gap must have observations on both sides");
    s.load_masked.resize(W);
    s.temperature.resize(W);
    s.mask.assign(W, 0.0f);
    for (std::size_t i = 0; i < W; ++i) {
        const std::size_t k = std::min(D - 1, i < s.pad_left ? 0 : i - s.pad_left);
        const bool in = i >= s.event.start_index && i < s.event.end_index();
        s.load_masked[i] = in ? 0.0f : static_cast<float>(normalize(w.load[k], st, Channel::load));
        s.temperature[i] = static_cast<float>(normalize(w.temperature[k], st, Channel::temperature));
        s.mask[i] = in ? 1.0f : 0.0f;
    }
    return s;
}

int cmd_inpaint(const InpaintOpts& o) {
    const Checkpoint ck = load_checkpoint(o.checkpoint);
    const Generator<float> g = ck.generator();
    Sample s;
    if (!o.window.empty()) {
        const RawSeries w = ingest_csv_file(o.window);
        if (w.resolution != ck.resolution)
            throw std::invalid_argument("--window resolution " + std::to_string(w.resolution) + " min differs from the checkpoint's " +
                                        std::to_string(ck.resolution) + " min");
        s = sample_from_window(w, ck.stats, padded_window(ck.resolution));
    } else if (!o.samples.empty()) {
        const SampleSet set = load_sample_set(o.samples);
        const auto& v = split_of(set, o.split);
        if (o.index >= v.size())
            throw std::invalid_argument("--index " + std::to_string(o.index) + " out of range for split " + o.split + " (" +
                                        std::to_string(v.size()) + " samples)");
        s = v[o.index];
    } else {
        throw std::invalid_argument("inpaint needs --window or --samples");
    }
    const auto est = inpaint(g, s, ck.stats);
    const fs::path dir(o.c.out);
    fs::create_directories(dir);
    write_with(dir / "restored.csv", [&](std::ostream& out) {
        out << "timestamp,load_kw_estimate\n";
        char buf[32];
        for (std::size_t k = 0; k < est.size(); ++k) {
            std::snprintf(buf, sizeof buf, "%.6f", est[k]);
            out << format_timestamp(s.time_at(s.event.start_index + k, ck.resolution)) << ',' << buf << '\n';
        }
    });
    std::cout << "restored " << est.size() << " steps to " << (dir / "restored.csv").string() << '\n';
    return 0;
}

struct EvalOpts {
    Common c;
    std::string checkpoint, samples, split = "test";
};

int cmd_eval(const EvalOpts& o) {
    const Checkpoint ck = load_checkpoint(o.checkpoint);
    const SampleSet set = load_sample_set(o.samples);
    if (set.resolution != ck.resolution) throw std::invalid_argument("samples and checkpoint resolutions differ");
    const auto& v = split_of(set, o.split);
    if (o.split == "cvr") throw std::invalid_argument("--split cvr has no ground truth; use the cvr command");
    if (v.empty()) throw std::invalid_argument("split " + o.split + " is empty");
    const Generator<float> g = ck.generator();
    const auto ev = model_events(g, v, ck.stats, set.resolution, o.split.c_str());
    const MetricsReport m = evaluate(ev);

    std::vector<EvalEvent> lin = ev, per = ev;
    for (std::size_t i = 0; i < v.size(); ++i) {
        lin[i].estimate = linear_interp(v[i], ck.stats);
        per[i].estimate = persistence(v[i], ck.stats);
    }
    const MetricsReport ml = evaluate(lin), mp = evaluate(per);

    const fs::path dir(o.c.out);
    fs::create_directories(dir);
    write_with(dir / "metrics.json", [&](std::ostream& out) { write_metrics_json(out, m); });
    write_with(dir / "metrics.txt", [&](std::ostream& out) { write_metrics_text(out, m); });
    write_with(dir / "events.csv", [&](std::ostream& out) { write_metrics_csv(out, m); });
    nlohmann::json b;
    for (const auto& [name, r] : {std::pair<const char*, const MetricsReport*>{"loadpin", &m}, {"linear_interp", &ml}, {"persistence", &mp}})
        b[name] = {{"nrmse", r->nrmse}, {"ee", r->ee}, {"bias_pct", r->bias}};
    write_text_file(dir / "baselines.json", b.dump(1) + "\n");
    std::printf("%-14s %10s %10s %10s\n", "restorer", "nrmse", "ee", "bias%");
    for (const auto& [name, r] : {std::pair<const char*, const MetricsReport*>{"loadpin", &m}, {"linear_interp", &ml}, {"persistence", &mp}})
        std::printf("%-14s %10.5f %10.5f %10.4f\n", name, r->nrmse, r->ee, r->bias);
    return 0;
}

struct CvrOpts {
    Common c;
    std::string checkpoint, samples, series, events, baseline_csv;
};

int cmd_cvr(const CvrOpts& o) {
    const Checkpoint ck = load_checkpoint(o.checkpoint);
    const SampleSet set = load_sample_set(o.samples);
    if (set.resolution != ck.resolution) throw std::invalid_argument("samples and checkpoint resolutions differ");
    std::vector<Sample> cvr = set.cvr;
    if (!o.events.empty()) {
        if (o.series.empty()) throw std::invalid_argument("--events requires --series");
        RawSeries s = ingest_csv_file(o.series);
        if (s.resolution != ck.resolution) s = resample(s, ck.resolution);
        cvr = make_cvr_samples(s, read_cvr_events_file(o.events), ck.stats);
    }
    if (cvr.empty()) throw std::invalid_argument("no CVR events: pass --events/--series or prepare samples with --events");
    if (set.test.empty()) throw std::invalid_argument("the test split is empty; seasonal bias needs test events");
    const Generator<float> g = ck.generator();
    const auto test_events = model_events(g, set.test, ck.stats, set.resolution, "test");
    const auto est = inpaint_stages(g, cvr, ck.stats);

    std::map<Timestamp, double> planted;
    if (!o.baseline_csv.empty()) {
        std::ifstream in(o.baseline_csv);
        if (!in) throw std::runtime_error("cannot open " + o.baseline_csv);
        std::string line;
        std::getline(in, line);
        if (trim(line) != "timestamp,baseline_kw") throw std::invalid_argument("--baseline-csv header must be 'timestamp,baseline_kw'");
        while (std::getline(in, line)) {
            if (trim(line).empty()) continue;
            const auto c = line.find(',');
            if (c == std::string::npos) throw std::invalid_argument("--baseline-csv: malformed row '" + line + "'");
            planted[parse_timestamp(line.substr(0, c))] = std::stod(line.substr(c + 1));
        }
    }

    std::vector<CvrInput> inputs;
    for (std::size_t i = 0; i < cvr.size(); ++i) {
        const auto& s = cvr[i];
        CvrInput in;
        in.id = "cvr-" + std::to_string(i);
        in.season = s.season;
        in.start = s.time_at(s.event.start_index, set.resolution);
        in.resolution = set.resolution;
        in.delta_v = s.event.delta_v;
        in.measured = kw(s.measured_event, ck.stats);
        in.baseline = est[i].stage2;
        for (std::size_t k = 0; k < in.baseline.size(); ++k) {
            auto it = planted.find(s.time_at(s.event.start_index + k, set.resolution));
            if (it != planted.end()) in.baseline[k] = it->second;
        }
        inputs.push_back(std::move(in));
    }
    const CvrReport r = cvr_report(inputs, test_events);

    const fs::path dir(o.c.out);
    fs::create_directories(dir);
    write_with(dir / "cvr.json", [&](std::ostream& out) { write_cvr_json(out, r); });
    write_with(dir / "cvr.txt", [&](std::ostream& out) { write_cvr_text(out, r); });
    write_with(dir / "events.csv", [&](std::ostream& out) { write_cvr_csv(out, r); });
    write_with(dir / "effect_curve.csv", [&](std::ostream& out) { write_effect_curve_csv(out, r.curve, set.resolution); });
    write_with(dir / "cvr_baselines.csv", [&](std::ostream& out) {
        out << "event_id,timestamp,measured_kw,baseline_kw\n";
        char buf[64];
        for (std::size_t i = 0; i < inputs.size(); ++i)
            for (std::size_t k = 0; k < inputs[i].measured.size(); ++k) {
                std::snprintf(buf, sizeof buf, "%.6f,%.6f", inputs[i].measured[k], inputs[i].baseline[k]);
                out << inputs[i].id << ','
                    << format_timestamp(cvr[i].time_at(cvr[i].event.start_index + k, set.resolution)) << ',' << buf << '\n';
            }
    });
    write_cvr_text(std::cout, r);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-stage GAN inpainting of electric load profiles and CVR baseline estimation"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();

    SynthOpts so;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic aggregate load/temperature series");
    add_common(synth, so.c);
    synth->add_option("--days", so.s.days, "length in days");
    synth->add_option("--resolution", so.s.resolution, "minutes per step")->check(CLI::IsMember({1, 5, 15, 30, 60}));
    synth->add_option("--users", so.s.n_users, "households in the aggregate");
    synth->add_option("--start", so.start, "first timestamp");
    synth->add_option("--load-noise", so.s.load_noise, "per-user AR(1) noise std as a fraction of base load");
    synth->add_option("--temp-noise", so.s.temp_noise, "temperature white noise, degC");
    synth->add_option("--weather-amp", so.s.weather_amp, "slow weather anomaly std, degC");
    synth->add_option("--user-spread", so.s.user_spread, "household heterogeneity (0 = identical)");
    synth->add_option("--cvr-events", so.cvr_events, "number of CVR events to plant");
    synth->add_option("--cvr-factor", so.cvr_factor, "load reduction per unit voltage reduction");
    synth->add_option("--delta-v", so.delta_v, "voltage reduction of planted events");

    IngestOpts io;
    auto* ingest = app.add_subcommand("ingest", "Validate a timestamp,load_kw,temperature_c CSV and optionally resample");
    add_common(ingest, io.c);
    ingest->add_option("--input", io.input, "input CSV (required)")->check(CLI::ExistingFile);
    ingest->add_option("--resolution", io.resolution, "target minutes per step (0 keeps the input's)");

    PrepareOpts po;
    auto* prepare = app.add_subcommand("prepare", "Cut 24-h masked samples and split 70/15/15");
    add_common(prepare, po.c);
    prepare->add_option("--series", po.series, "series CSV (required)")->check(CLI::ExistingFile);
    prepare->add_option("--resolution", po.resolution, "resample to this many minutes first (0 keeps)");
    prepare->add_option("--mask-hours", po.mask_hours, "mask duration range MIN:MAX in hours");
    prepare->add_option("--shift", po.shift, "window shift in steps (0 = one hour)");
    prepare->add_option("--events", po.events, "CVR events CSV (start,duration_min,delta_v)")->check(CLI::ExistingFile);

    TrainOpts to;
    auto* train = app.add_subcommand("train", "Train the two-stage generator and discriminator");
    add_common(train, to.c);
    train->add_option("--samples", to.samples, "sample-set directory (required)")->check(CLI::ExistingDirectory);
    train->add_option("--max-iters", to.t.max_iters, "training iterations");
    train->add_option("--batch", to.t.batch_size, "mini-batch size");
    train->add_option("--lambda-adv", to.t.lambda_adv, "adversarial loss weight");
    train->add_option("--lambda-feat", to.t.lambda_feat, "feature-matching loss weight");
    train->add_option("--lr-g", to.t.lr_g, "generator learning rate");
    train->add_option("--lr-d", to.t.lr_d, "discriminator learning rate");
    train->add_option("--beta1", to.t.beta1, "Adam beta1");
    train->add_option("--beta2", to.t.beta2, "Adam beta2");
    train->add_option("--d-steps", to.t.d_steps_per_g, "discriminator updates per generator update");
    train->add_option("--margin", to.margin, "loss-window margin in steps (-1 = half an hour)");
    train->add_option("--eval-every", to.t.eval_every, "validation cadence in iterations");
    train->add_option("--val-max", to.t.val_max, "validation samples per evaluation");
    train->add_option("--scale", to.scale, "divide layer widths by this factor");
    train->add_flag("--quiet", to.quiet, "no progress lines");

    InpaintOpts ino;
    auto* inp = app.add_subcommand("inpaint", "Restore one masked segment");
    add_common(inp, ino.c);
    inp->add_option("--checkpoint", ino.checkpoint, "checkpoint directory (required)")->check(CLI::ExistingDirectory);
    inp->add_option("--window", ino.window, "24-h CSV whose empty load cells mark the gap")->check(CLI::ExistingFile);
    inp->add_option("--samples", ino.samples, "sample-set directory")->check(CLI::ExistingDirectory);
    inp->add_option("--split", ino.split, "sample split");
    inp->add_option("--index", ino.index, "sample index within the split");

    EvalOpts eo;
    auto* ev = app.add_subcommand("eval", "nRMSE, energy error and bias on a split, with reference restorers");
    add_common(ev, eo.c);
    ev->add_option("--checkpoint", eo.checkpoint, "checkpoint directory (required)")->check(CLI::ExistingDirectory);
    ev->add_option("--samples", eo.samples, "sample-set directory (required)")->check(CLI::ExistingDirectory);
    ev->add_option("--split", eo.split, "split to evaluate");

    CvrOpts co;
    auto* cv = app.add_subcommand("cvr", "CVR baselines, raw/net reductions, CVR factor and effect curve");
    add_common(cv, co.c);
    cv->add_option("--checkpoint", co.checkpoint, "checkpoint directory (required)")->check(CLI::ExistingDirectory);
    cv->add_option("--samples", co.samples, "sample-set directory, required (its test split feeds the seasonal bias)")
        
        ->check(CLI::ExistingDirectory);
    cv->add_option("--series", co.series, "series CSV holding the CVR events")->check(CLI::ExistingFile);
    cv->add_option("--events", co.events, "CVR events CSV")->check(CLI::ExistingFile);
    cv->add_option("--baseline-csv", co.baseline_csv, "timestamp,baseline_kw rows overriding the model baseline")
        ->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        std::cerr << "error: " << msg << '\n';
        return 2;
    }

    try {
        CLI::App* sub = app.get_subcommands().front();
        const std::map<CLI::App*, Common*> common = {{synth, &so.c}, {ingest, &io.c}, {prepare, &po.c}, {train, &to.c},
                                                     {inp, &ino.c},  {ev, &eo.c},      {cv, &co.c}};
        const Common& c = *common.at(sub);
        if (!c.config.empty()) apply_config_file(sub, c.config);
        require(sub, {"--out"});
        if (sub == ingest) require(sub, {"--input"});
        if (sub == prepare) require(sub, {"--series"});
        if (sub == train) require(sub, {"--samples"});
        if (sub == inp) require(sub, {"--checkpoint"});
        if (sub == ev || sub == cv) require(sub, {"--checkpoint", "--samples"});
        write_run_config(sub, c.out);
        if (sub == synth) return cmd_synth(so);
        if (sub == ingest) return cmd_ingest(io);
        if (sub == prepare) return cmd_prepare(po);
        if (sub == train) return cmd_train(to);
        if (sub == inp) return cmd_inpaint(ino);
        if (sub == ev) return cmd_eval(eo);
        return cmd_cvr(co);
    } catch (const std::exception& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        std::cerr << "error: " << msg << '\n';
        return 1;
    }
}
