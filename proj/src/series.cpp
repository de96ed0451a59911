#include "loadpin/series.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace loadpin {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    for (auto& f : out) {
        while (!f.empty() && f.back() == ' ') f.pop_back();
        while (!f.empty() && f.front() == ' ') f.erase(f.begin());
    }
    return out;
}

double parse_double(const std::string& s, std::size_t line_no) {
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != s.size() || !std::isfinite(v))
        throw std::invalid_argument("line " + std::to_string(line_no) + ": bad number '" + s + "'");
    return v;
}

void fill_linear(std::vector<double>& v, const std::string& what) {
    std::size_t n = v.size(), first = n;
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isnan(v[i])) {
            first = i;
            break;
        }
    if (first == n) throw std::invalid_argument("no " + what + " values present");
    for (std::size_t i = 0; i < first; ++i) v[i] = v[first];
    std::size_t last = first;
    for (std::size_t i = first + 1; i < n; ++i) {
        if (std::isnan(v[i])) continue;
        for (std::size_t j = last + 1; j < i; ++j)
            v[j] = v[last] + (v[i] - v[last]) * static_cast<double>(j - last) / static_cast<double>(i - last);
        last = i;
    }
    for (std::size_t i = last + 1; i < n; ++i) v[i] = v[last];
}

}  // namespace

bool valid_resolution(int m) { return m == 1 || m == 5 || m == 15 || m == 30 || m == 60; }

std::optional<std::size_t> RawSeries::index_of(Timestamp t) const {
    const auto d = (t - start_time).count();
    if (d < 0 || d % resolution != 0) return std::nullopt;
    const auto i = static_cast<std::size_t>(d / resolution);
    if (i >= size()) return std::nullopt;
    return i;
}

void RawSeries::validate() const {
    if (!valid_resolution(resolution))
        throw std::invalid_argument("resolution must be one of 1, 5, 15, 30, 60 minutes (got " +
                                    std::to_string(resolution) + ")");
    if (load.empty()) throw std::invalid_argument("series is empty");
    if (temperature.size() != load.size() || missing.size() != load.size())
        throw std::invalid_argument("series channels differ in length");
    for (const auto& e : extra)
        if (e.size() != load.size()) throw std::invalid_argument("explanatory channel length differs from load");
    for (std::size_t i = 0; i < load.size(); ++i) {
        if (!missing[i] && !std::isfinite(load[i])) throw std::invalid_argument("non-finite load not flagged missing");
        if (!std::isfinite(temperature[i])) throw std::invalid_argument("non-finite temperature");
    }
}

RawSeries ingest_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!split_csv_line(line).front().empty()) break;
        line.clear();
    }
    if (line.empty()) throw std::invalid_argument("empty CSV input");
    const auto header = split_csv_line(line);
    if (header.size() < 3 || header[0] != "timestamp" || header[1] != "load_kw" || header[2] != "temperature_c")
        throw std::invalid_argument("CSV header must be 'timestamp,load_kw,temperature_c'");

    RawSeries s;
    std::vector<Timestamp> times;
    while (std::getline(in, line)) {
        ++line_no;
        auto f = split_csv_line(line);
        if (f.size() == 1 && f[0].empty()) continue;
        if (f.size() < 3) throw std::invalid_argument("line " + std::to_string(line_no) + ": expected 3 fields");
        Timestamp t;
        try {
            t = parse_timestamp(f[0]);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!times.empty()) {
            if (t <= times.back())
                throw std::invalid_argument("line " + std::to_string(line_no) + ": non-monotone timestamp " + f[0]);
            const auto step = (t - times.back()).count();
            if (times.size() >= 2 && step != (times[1] - times[0]).count())
                throw std::invalid_argument("line " + std::to_string(line_no) + ": inconsistent step size");
        }
        times.push_back(t);
        const bool miss = f[1].empty();
        s.load.push_back(miss ? std::numeric_limits<double>::quiet_NaN() : parse_double(f[1], line_no));
        s.missing.push_back(miss ? 1 : 0);
        s.temperature.push_back(f[2].empty() ? std::numeric_limits<double>::quiet_NaN() : parse_double(f[2], line_no));
    }
    if (times.empty()) throw std::invalid_argument("CSV contains no data rows");
    s.start_time = times.front();
    if (times.size() >= 2) {
        s.resolution = static_cast<int>((times[1] - times[0]).count());
    } else {
        s.resolution = 60;
    }
    if (!valid_resolution(s.resolution))
        throw std::invalid_argument("unsupported step size " + std::to_string(s.resolution) + " min");
    fill_linear(s.temperature, "temperature");
    s.validate();
    return s;
}

RawSeries ingest_csv_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return ingest_csv(in);
}

void write_csv(std::ostream& out, const RawSeries& s) {
    out << "timestamp,load_kw,temperature_c\n";
    char buf[64];
    for (std::size_t i = 0; i < s.size(); ++i) {
        out << format_timestamp(s.time_at(i)) << ',';
        if (!s.missing[i]) {
            std::snprintf(buf, sizeof buf, "%.6f", s.load[i]);
            out << buf;
        }
        std::snprintf(buf, sizeof buf, "%.4f", s.temperature[i]);
        out << ',' << buf << '\n';
    }
}

void write_csv_file(const std::filesystem::path& path, const RawSeries& s) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_csv(out, s);
}

RawSeries resample(const RawSeries& s, int target) {
    s.validate();
    if (target <= 0 || target % s.resolution != 0)
        throw std::invalid_argument("resample target " + std::to_string(target) + " min is not a multiple of " +
                                    std::to_string(s.resolution) + " min");
    if (!valid_resolution(target)) throw std::invalid_argument("unsupported target resolution");
    const std::size_t f = static_cast<std::size_t>(target / s.resolution);
    const std::size_t n = s.size() / f;
    if (n == 0) throw std::invalid_argument("series shorter than one target bin");
    RawSeries r;
    r.start_time = s.start_time;
    r.resolution = target;
    r.load.resize(n);
    r.temperature.resize(n);
    r.missing.resize(n);
    r.extra.assign(s.extra.size(), std::vector<double>(n));
    for (std::size_t b = 0; b < n; ++b) {
        double lsum = 0, tsum = 0;
        bool miss = false;
        for (std::size_t j = b * f; j < (b + 1) * f; ++j) {
            miss = miss || s.missing[j];
            if (!s.missing[j]) lsum += s.load[j];
            tsum += s.temperature[j];
        }
        r.missing[b] = miss;
        r.load[b] = miss ? std::numeric_limits<double>::quiet_NaN() : lsum / static_cast<double>(f);
        r.temperature[b] = tsum / static_cast<double>(f);
        for (std::size_t e = 0; e < s.extra.size(); ++e) {
            double es = 0;
            for (std::size_t j = b * f; j < (b + 1) * f; ++j) es += s.extra[e][j];
            r.extra[e][b] = es / static_cast<double>(f);
        }
    }
    return r;
}

void NormStats::validate() const {
    if (!(load_std > 0) || !(temp_std > 0) || !std::isfinite(load_mean) || !std::isfinite(temp_mean))
        throw std::invalid_argument("normalization statistics need positive finite std");
}

NormStats fit_norm_stats(const RawSeries& s, std::span<const IndexRange> ranges) {
    s.validate();
    std::vector<std::uint8_t> use(s.size(), 0);
    for (const auto& r : ranges) {
        if (r.begin >= r.end || r.end > s.size()) throw std::invalid_argument("bad training range");
        for (std::size_t i = r.begin; i < r.end; ++i) use[i] = 1;
    }
    double ln = 0, lsum = 0, lsq = 0, tn = 0, tsum = 0, tsq = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!use[i]) continue;
        tn += 1;
        tsum += s.temperature[i];
        if (!s.missing[i]) {
            ln += 1;
            lsum += s.load[i];
        }
    }
    if (ln == 0) throw std::invalid_argument("training range contains no observed load");
    NormStats st;
    st.load_mean = lsum / ln;
    st.temp_mean = tsum / tn;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!use[i]) continue;
        tsq += (s.temperature[i] - st.temp_mean) * (s.temperature[i] - st.temp_mean);
        if (!s.missing[i]) lsq += (s.load[i] - st.load_mean) * (s.load[i] - st.load_mean);
    }
    st.load_std = std::sqrt(lsq / ln);
    st.temp_std = std::sqrt(tsq / tn);
    const double ltol = 1e-12 * std::max(1.0, std::abs(st.load_mean));
    const double ttol = 1e-12 * std::max(1.0, std::abs(st.temp_mean));
    if (st.load_std <= ltol)
        throw std::invalid_argument("load has zero variance over the training range (mean " +
                                    std::to_string(st.load_mean) + ")");
    if (st.temp_std <= ttol)
        throw std::invalid_argument("temperature has zero variance over the training range (mean " +
                                    std::to_string(st.temp_mean) + ")");
    return st;
}

NormStats fit_norm_stats(const RawSeries& s) {
    const IndexRange all{0, s.size()};
    return fit_norm_stats(s, std::span<const IndexRange>(&all, 1));
}

double normalize(double x, const NormStats& st, Channel c) {
    return c == Channel::load ? (x - st.load_mean) / st.load_std : (x - st.temp_mean) / st.temp_std;
}

double denormalize(double x, const NormStats& st, Channel c) {
    return c == Channel::load ? x * st.load_std + st.load_mean : x * st.temp_std + st.temp_mean;
}

std::vector<double> normalize(std::span<const double> x, const NormStats& st, Channel c) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = normalize(x[i], st, c);
    return out;
}

std::vector<double> denormalize(std::span<const double> x, const NormStats& st, Channel c) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = denormalize(x[i], st, c);
    return out;
}

}  // namespace loadpin
