#include "loadpin/samples.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "loadpin/binio.hpp"

namespace loadpin {

namespace {

constexpr std::size_t kChannels = 5;  // load_masked, temperature, mask, event load, prior day

std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::vector<std::uint8_t> cvr_flags(const RawSeries& s, const std::vector<CvrEvent>& events) {
    std::vector<std::uint8_t> f(s.size(), 0);
    for (const auto& e : events) {
        const auto end = e.start + std::chrono::minutes(e.duration_min);
        for (std::size_t i = 0; i < s.size(); ++i) {
            const auto t = s.time_at(i);
            // a step covers [t, t + resolution)
            if (t < end && t + std::chrono::minutes(s.resolution) > e.start) f[i] = 1;
        }
    }
    return f;
}

/// Fills the 24-h span starting at `origin` into a padded window.
std::vector<float> padded_channel(const RawSeries& s, const std::vector<double>& src, std::size_t origin,
                                  std::size_t pad_left, std::size_t W, const NormStats& st, Channel c) {
    const std::size_t D = s.steps_per_day();
    std::vector<float> out(W);
    for (std::size_t i = 0; i < W; ++i) {
        const std::size_t k = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(pad_left), 0,
                                                         static_cast<std::ptrdiff_t>(D) - 1);
        out[i] = static_cast<float>(normalize(src[origin + k], st, c));
    }
    return out;
}

Sample build_sample(const RawSeries& s, std::size_t origin, std::size_t event_offset, std::size_t len,
                    const NormStats& st, EventKind kind, double delta_v) {
    const std::size_t D = s.steps_per_day(), W = padded_window(s.resolution);
    if (origin + D > s.size()) throw std::invalid_argument("window extends beyond the series");
    for (std::size_t k = 0; k < D; ++k)
        if (s.missing[origin + k])
            throw std::invalid_argument("window at " + format_timestamp(s.time_at(origin)) + " has missing load");
    Sample smp;
    smp.pad_left = (W - D) / 2;
    smp.origin = s.time_at(origin);
    smp.season = season_of(smp.origin);
    smp.event = EventSpec{smp.pad_left + event_offset, len, kind, delta_v};
    smp.load_masked = padded_channel(s, s.load, origin, smp.pad_left, W, st, Channel::load);
    smp.temperature = padded_channel(s, s.temperature, origin, smp.pad_left, W, st, Channel::temperature);
    smp.mask.assign(W, 0.0f);
    std::vector<float> inside(len);
    for (std::size_t k = 0; k < len; ++k) {
        const std::size_t i = smp.event.start_index + k;
        inside[k] = smp.load_masked[i];
        smp.load_masked[i] = 0.0f;
        smp.mask[i] = 1.0f;
    }
    if (kind == EventKind::mask)
        smp.truth_event = std::move(inside);
    else
        smp.measured_event = std::move(inside);
    const std::size_t first = origin + event_offset;
    if (first >= D) {
        bool ok = true;
        std::vector<float> prior(len);
        for (std::size_t k = 0; k < len && ok; ++k) {
            const std::size_t j = first + k - D;
            ok = !s.missing[j];
            if (ok) prior[k] = static_cast<float>(normalize(s.load[j], st, Channel::load));
        }
        if (ok) smp.prior_day = std::move(prior);
    }
    return smp;
}

}  // namespace

std::size_t day_steps(int resolution) {
    if (!valid_resolution(resolution)) throw std::invalid_argument("unsupported resolution " + std::to_string(resolution));
    return static_cast<std::size_t>(1440 / resolution);
}

std::size_t padded_window(int resolution) { return (day_steps(resolution) + 31) / 32 * 32; }

std::size_t centered_start(std::size_t window, std::size_t len) {
    if (len > window) throw std::invalid_argument("segment longer than window");
    return (window - len) / 2;
}

std::string to_string(EventKind k) { return k == EventKind::mask ? "mask" : "cvr"; }

void EventSpec::validate(std::size_t window, int resolution) const {
    if (length_steps == 0 || start_index + length_steps > window) throw std::invalid_argument("event outside window");
    const long minutes = static_cast<long>(length_steps) * resolution;
    if (minutes < 60 || minutes > 240)
        throw std::invalid_argument("event duration " + std::to_string(minutes) + " min outside [60, 240]");
    if (kind == EventKind::cvr && !(delta_v > 0 && delta_v <= 0.10))
        throw std::invalid_argument("CVR delta_v must lie in (0, 0.10]");
}

std::vector<float> Sample::truth_profile() const {
    if (!truth_event) throw std::logic_error("sample has no ground truth (CVR event)");
    std::vector<float> p = load_masked;
    for (std::size_t k = 0; k < event.length_steps; ++k) p[event.start_index + k] = (*truth_event)[k];
    return p;
}

Timestamp Sample::time_at(std::size_t i, int resolution) const {
    return origin + std::chrono::minutes(resolution * (static_cast<long>(i) - static_cast<long>(pad_left)));
}

void Sample::validate(int resolution) const {
    const std::size_t W = window();
    if (load_masked.size() != W || temperature.size() != W) throw std::invalid_argument("sample channel lengths differ");
    event.validate(W, resolution);
    std::size_t ones = 0;
    for (std::size_t i = 0; i < W; ++i) {
        const bool in = i >= event.start_index && i < event.end_index();
        if (mask[i] != (in ? 1.0f : 0.0f)) throw std::invalid_argument("mask does not match event");
        if (in && load_masked[i] != 0.0f) throw std::invalid_argument("masked load not zeroed");
        ones += in;
    }
    if (ones != event.length_steps) throw std::invalid_argument("mask length mismatch");
    if (truth_event && truth_event->size() != event.length_steps) throw std::invalid_argument("truth length mismatch");
    if (!prior_day.empty() && prior_day.size() != event.length_steps) throw std::invalid_argument("prior-day length mismatch");
}

std::vector<CvrEvent> read_cvr_events(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("empty events file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "start,duration_min,delta_v") throw std::invalid_argument("events header must be 'start,duration_min,delta_v'");
    std::vector<CvrEvent> out;
    std::size_t no = 1;
    while (std::getline(in, line)) {
        ++no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string a, b, c;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c))
            throw std::invalid_argument("events line " + std::to_string(no) + ": expected 3 fields");
        CvrEvent e;
        e.start = parse_timestamp(a);
        try {
            e.duration_min = std::stoi(b);
            e.delta_v = std::stod(c);
        } catch (const std::exception&) {
            throw std::invalid_argument("events line " + std::to_string(no) + ": bad number");
        }
        out.push_back(e);
    }
    return out;
}

std::vector<CvrEvent> read_cvr_events_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return read_cvr_events(in);
}

void write_cvr_events(std::ostream& out, const std::vector<CvrEvent>& events) {
    out << "start,duration_min,delta_v\n";
    for (const auto& e : events) out << format_timestamp(e.start) << ',' << e.duration_min << ',' << e.delta_v << '\n';
}

std::size_t SampleSet::window() const {
    for (const auto* v : {&train, &validation, &test, &cvr})
        if (!v->empty()) return v->front().window();
    return padded_window(resolution);
}

std::vector<std::size_t> candidate_origins(const RawSeries& s, std::size_t shift) {
    if (shift == 0) throw std::invalid_argument("shift must be positive");
    const std::size_t D = s.steps_per_day();
    if (s.size() < D) throw std::invalid_argument("series shorter than one 24-h window");
    std::vector<std::size_t> o;
    for (std::size_t i = 0; i + D <= s.size(); i += shift) o.push_back(i);
    return o;
}

std::pair<std::size_t, std::size_t> mask_step_range(double min_h, double max_h, int resolution) {
    if (!(min_h >= 1.0 && max_h <= 4.0 && min_h <= max_h))
        throw std::invalid_argument("mask hours must satisfy 1 <= min <= max <= 4");
    const auto lo = static_cast<std::size_t>(std::ceil(min_h * 60.0 / resolution - 1e-9));
    const auto hi = static_cast<std::size_t>(std::floor(max_h * 60.0 / resolution + 1e-9));
    if (lo > hi) throw std::invalid_argument("mask hour range contains no whole step count");
    return {lo, hi};
}

Sample make_window_sample(const RawSeries& s, std::size_t origin, std::size_t len, const NormStats& st) {
    const std::size_t D = s.steps_per_day();
    return build_sample(s, origin, centered_start(D, len), len, st, EventKind::mask, 0.0);
}

SampleSet generate_samples(const RawSeries& s, const SampleGenConfig& cfg) {
    s.validate();
    const std::size_t D = s.steps_per_day();
    if (s.size() < D) throw std::invalid_argument("series shorter than one 24-h window");
    if (!(cfg.train_frac > 0 && cfg.val_frac >= 0 && cfg.train_frac + cfg.val_frac <= 1))
        throw std::invalid_argument("bad split fractions");
    const std::size_t shift = cfg.shift_steps ? cfg.shift_steps : std::max<std::size_t>(1, 60 / s.resolution);
    const auto [lo, hi] = mask_step_range(cfg.min_hours, cfg.max_hours, s.resolution);

    const auto cvr = cvr_flags(s, cfg.cvr_events);
    std::vector<std::size_t> bad_prefix(s.size() + 1, 0);
    for (std::size_t i = 0; i < s.size(); ++i) bad_prefix[i + 1] = bad_prefix[i] + ((s.missing[i] || cvr[i]) ? 1 : 0);
    std::vector<std::size_t> origins;
    for (std::size_t o : candidate_origins(s, shift))
        if (bad_prefix[o + D] == bad_prefix[o]) origins.push_back(o);
    if (origins.empty()) throw std::invalid_argument("no clean 24-h windows in the series");

    std::mt19937_64 rng(cfg.seed);
    std::shuffle(origins.begin(), origins.end(), rng);
    const std::size_t N = origins.size();
    std::size_t n_train = static_cast<std::size_t>(std::llround(cfg.train_frac * static_cast<double>(N)));
    std::size_t n_val = static_cast<std::size_t>(std::llround(cfg.val_frac * static_cast<double>(N)));
    n_train = std::clamp<std::size_t>(n_train, 1, N);
    n_val = std::min(n_val, N - n_train);

    std::vector<IndexRange> ranges;
    for (std::size_t i = 0; i < n_train; ++i) ranges.push_back({origins[i], origins[i] + D});
    SampleSet set;
    set.stats = fit_norm_stats(s, ranges);
    set.resolution = s.resolution;
    set.seed = cfg.seed;
    set.min_hours = cfg.min_hours;
    set.max_hours = cfg.max_hours;

    std::vector<Sample> all(N);
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < N; ++i) {
        std::mt19937_64 r(mix(cfg.seed ^ mix(origins[i])));
        std::uniform_int_distribution<std::size_t> len(lo, hi);
        all[i] = make_window_sample(s, origins[i], len(r), set.stats);
    }
    auto mv = [&](std::size_t b, std::size_t e) {
        return std::vector<Sample>(std::make_move_iterator(all.begin() + static_cast<std::ptrdiff_t>(b)),
                                   std::make_move_iterator(all.begin() + static_cast<std::ptrdiff_t>(e)));
    };
    set.train = mv(0, n_train);
    set.validation = mv(n_train, n_train + n_val);
    set.test = mv(n_train + n_val, N);
    return set;
}

std::vector<Sample> make_cvr_samples(const RawSeries& s, const std::vector<CvrEvent>& events, const NormStats& st) {
    s.validate();
    st.validate();
    const std::size_t D = s.steps_per_day();
    std::vector<Sample> out;
    for (const auto& e : events) {
        const std::string when = format_timestamp(e.start);
        if (e.duration_min > 240) throw std::invalid_argument("CVR event at " + when + " is longer than 4 h");
        if (e.duration_min < 60) throw std::invalid_argument("CVR event at " + when + " is shorter than 1 h");
        if (e.duration_min % s.resolution != 0)
            throw std::invalid_argument("CVR event at " + when + " duration is not a whole number of steps");
        if (!(e.delta_v > 0 && e.delta_v <= 0.10)) throw std::invalid_argument("CVR event at " + when + ": delta_v outside (0, 0.10]");
        const auto d = (e.start - s.start_time).count();
        if (d % s.resolution != 0) throw std::invalid_argument("CVR event at " + when + " is not on the series time grid");
        const std::size_t len = static_cast<std::size_t>(e.duration_min / s.resolution);
        const std::size_t off = centered_start(D, len);
        const long origin = d / s.resolution - static_cast<long>(off);
        if (origin < 0 || static_cast<std::size_t>(origin) + D > s.size())
            throw std::invalid_argument("24-h window around CVR event at " + when + " extends beyond the series");
        out.push_back(build_sample(s, static_cast<std::size_t>(origin), off, len, st, EventKind::cvr, e.delta_v));
    }
    return out;
}

void save_sample_set(const SampleSet& set, const std::filesystem::path& dir) {
    using nlohmann::json;
    std::filesystem::create_directories(dir);
    json m;
    m["format"] = "loadpin-samples";
    m["version"] = 1;
    m["seed"] = set.seed;
    m["resolution"] = set.resolution;
    m["window"] = set.window();
    m["mask_hours"] = {set.min_hours, set.max_hours};
    m["stats"] = {{"load_mean", set.stats.load_mean},
                  {"load_std", set.stats.load_std},
                  {"temp_mean", set.stats.temp_mean},
                  {"temp_std", set.stats.temp_std}};
    m["channels"] = {"load_masked", "temperature", "mask", "event_load", "prior_day"};
    const std::pair<const char*, const std::vector<Sample>*> splits[] = {
        {"train", &set.train}, {"validation", &set.validation}, {"test", &set.test}, {"cvr", &set.cvr}};
    const std::size_t W = set.window();
    for (const auto& [name, v] : splits) {
        m["counts"][name] = v->size();
        json meta = json::array();
        std::vector<float> blob;
        blob.reserve(v->size() * kChannels * W);
        for (const Sample& smp : *v) {
            if (smp.window() != W) throw std::invalid_argument("samples in a set must share one window length");
            meta.push_back({{"origin", format_timestamp(smp.origin)},
                            {"season", to_string(smp.season)},
                            {"start_index", smp.event.start_index},
                            {"length_steps", smp.event.length_steps},
                            {"kind", to_string(smp.event.kind)},
                            {"delta_v", smp.event.delta_v},
                            {"pad_left", smp.pad_left},
                            {"has_prior_day", !smp.prior_day.empty()}});
            blob.insert(blob.end(), smp.load_masked.begin(), smp.load_masked.end());
            blob.insert(blob.end(), smp.temperature.begin(), smp.temperature.end());
            blob.insert(blob.end(), smp.mask.begin(), smp.mask.end());
            std::vector<float> ev(W, 0.0f), pd(W, 0.0f);
            const auto& inside = smp.truth_event ? *smp.truth_event : smp.measured_event;
            for (std::size_t k = 0; k < smp.event.length_steps; ++k) {
                ev[smp.event.start_index + k] = inside[k];
                if (!smp.prior_day.empty()) pd[smp.event.start_index + k] = smp.prior_day[k];
            }
            blob.insert(blob.end(), ev.begin(), ev.end());
            blob.insert(blob.end(), pd.begin(), pd.end());
        }
        m["samples"][name] = std::move(meta);
        std::ofstream out(dir / (std::string(name) + ".f32"), std::ios::binary);
        if (!out) throw std::runtime_error("cannot write sample blob in " + dir.string());
        write_le_floats(out, blob);
    }
    std::ofstream mf(dir / "manifest.json");
    if (!mf) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
    mf << m.dump(1) << '\n';
}

SampleSet load_sample_set(const std::filesystem::path& dir) {
    using nlohmann::json;
    std::ifstream mf(dir / "manifest.json");
    if (!mf) throw std::runtime_error("no manifest.json in " + dir.string());
    json m;
    try {
        m = json::parse(mf);
    } catch (const json::exception& e) {
        throw std::runtime_error("malformed sample manifest: " + std::string(e.what()));
    }
    if (m.value("format", "") != "loadpin-samples") throw std::runtime_error("not a sample-set manifest");
    SampleSet set;
    set.seed = m.at("seed").get<std::uint64_t>();
    set.resolution = m.at("resolution").get<int>();
    set.min_hours = m.at("mask_hours").at(0).get<double>();
    set.max_hours = m.at("mask_hours").at(1).get<double>();
    const auto& st = m.at("stats");
    set.stats = {st.at("load_mean").get<double>(), st.at("load_std").get<double>(), st.at("temp_mean").get<double>(),
                 st.at("temp_std").get<double>()};
    set.stats.validate();
    const std::size_t W = m.at("window").get<std::size_t>();
    const std::pair<const char*, std::vector<Sample>*> splits[] = {
        {"train", &set.train}, {"validation", &set.validation}, {"test", &set.test}, {"cvr", &set.cvr}};
    for (const auto& [name, v] : splits) {
        const auto& meta = m.at("samples").at(name);
        std::ifstream in(dir / (std::string(name) + ".f32"), std::ios::binary);
        if (!in) throw std::runtime_error(std::string("missing blob for split ") + name);
        const auto blob = read_le_floats(in, meta.size() * kChannels * W);
        for (std::size_t n = 0; n < meta.size(); ++n) {
            const auto& j = meta[n];
            const float* base = blob.data() + n * kChannels * W;
            Sample smp;
            smp.origin = parse_timestamp(j.at("origin").get<std::string>());
            smp.season = parse_season(j.at("season").get<std::string>());
            smp.event.start_index = j.at("start_index").get<std::size_t>();
            smp.event.length_steps = j.at("length_steps").get<std::size_t>();
            smp.event.kind = j.at("kind").get<std::string>() == "cvr" ? EventKind::cvr : EventKind::mask;
            smp.event.delta_v = j.at("delta_v").get<double>();
            smp.pad_left = j.at("pad_left").get<std::size_t>();
            smp.load_masked.assign(base, base + W);
            smp.temperature.assign(base + W, base + 2 * W);
            smp.mask.assign(base + 2 * W, base + 3 * W);
            std::vector<float> inside(base + 3 * W + smp.event.start_index, base + 3 * W + smp.event.end_index());
            if (smp.event.kind == EventKind::mask)
                smp.truth_event = std::move(inside);
            else
                smp.measured_event = std::move(inside);
            if (j.at("has_prior_day").get<bool>())
                smp.prior_day.assign(base + 4 * W + smp.event.start_index, base + 4 * W + smp.event.end_index());
            smp.validate(set.resolution);
            v->push_back(std::move(smp));
        }
    }
    return set;
}

}  // namespace loadpin
