#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "loadpin/timestamp.hpp"

namespace loadpin {

/// Regularly sampled load and explanatory series. `load` holds NaN wherever
/// `missing` is set.
struct RawSeries {
    Timestamp start_time{};
    int resolution = 60;  // minutes per step
    std::vector<double> load;
    std::vector<double> temperature;
    std::vector<std::uint8_t> missing;
    std::vector<std::vector<double>> extra;  // further explanatory channels, each length L

    std::size_t size() const { return load.size(); }
    Timestamp time_at(std::size_t i) const { return start_time + std::chrono::minutes(resolution * static_cast<long>(i)); }
    /// Index of `t` if it lies on the grid inside the series.
    std::optional<std::size_t> index_of(Timestamp t) const;
    std::size_t steps_per_day() const { return static_cast<std::size_t>(24 * 60 / resolution); }
    void validate() const;
};

bool valid_resolution(int minutes);

/// CSV with header `timestamp,load_kw,temperature_c`; an empty load field is
/// a missing reading, temperature gaps are filled linearly.
RawSeries ingest_csv(std::istream& in);
RawSeries ingest_csv_file(const std::filesystem::path& path);
void write_csv(std::ostream& out, const RawSeries& s);
void write_csv_file(const std::filesystem::path& path, const RawSeries& s);

RawSeries resample(const RawSeries& s, int target_minutes);

struct NormStats {
    double load_mean = 0, load_std = 1;
    double temp_mean = 0, temp_std = 1;
    void validate() const;
    bool operator==(const NormStats&) const = default;
};

enum class Channel { load, temperature };

/// Half-open step range [begin, end).
struct IndexRange {
    std::size_t begin = 0, end = 0;
};

/// Population statistics over non-missing points inside the union of the
/// given ranges (overlaps are counted once).
NormStats fit_norm_stats(const RawSeries& s, std::span<const IndexRange> train_ranges);
NormStats fit_norm_stats(const RawSeries& s);

double normalize(double x, const NormStats& st, Channel c);
double denormalize(double x, const NormStats& st, Channel c);
std::vector<double> normalize(std::span<const double> x, const NormStats& st, Channel c);
std::vector<double> denormalize(std::span<const double> x, const NormStats& st, Channel c);

}  // namespace loadpin
