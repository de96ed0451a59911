#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "loadpin/series.hpp"
#include "loadpin/timestamp.hpp"

namespace loadpin {

std::size_t day_steps(int resolution);
/// 24-h window length rounded up to a multiple of 32.
std::size_t padded_window(int resolution);
/// Start of a `len`-step segment centered in a `window`-step span.
std::size_t centered_start(std::size_t window, std::size_t len);

enum class EventKind { mask, cvr };
std::string to_string(EventKind k);

/// Event position in padded-window coordinates.
struct EventSpec {
    std::size_t start_index = 0;
    std::size_t length_steps = 0;
    EventKind kind = EventKind::mask;
    double delta_v = 0;
    void validate(std::size_t window, int resolution) const;
    std::size_t end_index() const { return start_index + length_steps; }
    bool operator==(const EventSpec&) const = default;
};

/// One model input window. All load values are normalized. The 24-h span sits
/// at [pad_left, pad_left + day) of the padded window; padding repeats the edge
/// values and carries mask 0.
struct Sample {
    std::vector<float> load_masked;
    std::vector<float> temperature;
    std::vector<float> mask;
    std::optional<std::vector<float>> truth_event;
    std::vector<float> measured_event;  // CVR samples: observed load during the event
    std::vector<float> prior_day;       // load 24 h before each event step; empty when unavailable
    EventSpec event;
    Season season = Season::winter;
    Timestamp origin{};  // time of the first step of the 24-h span
    std::size_t pad_left = 0;

    std::size_t window() const { return mask.size(); }
    /// load_masked with the truth written back into the event (throws for CVR samples).
    std::vector<float> truth_profile() const;
    /// Timestamp of window index i (padding indices extrapolate the grid).
    Timestamp time_at(std::size_t i, int resolution) const;
    void validate(int resolution) const;
};

struct CvrEvent {
    Timestamp start{};
    int duration_min = 0;
    double delta_v = 0;
};

std::vector<CvrEvent> read_cvr_events(std::istream& in);
std::vector<CvrEvent> read_cvr_events_file(const std::filesystem::path& path);
void write_cvr_events(std::ostream& out, const std::vector<CvrEvent>& events);

struct SampleGenConfig {
    double min_hours = 1, max_hours = 4;
    std::size_t shift_steps = 0;  // 0 means one hour
    std::uint64_t seed = 1;
    std::vector<CvrEvent> cvr_events;  // windows overlapping these are excluded
    double train_frac = 0.70, val_frac = 0.15;
};

struct SampleSet {
    std::vector<Sample> train, validation, test, cvr;
    NormStats stats;
    int resolution = 60;
    std::uint64_t seed = 0;
    double min_hours = 1, max_hours = 4;
    std::size_t window() const;
};

/// Origins (step indices) of every full 24-h window at the given shift.
std::vector<std::size_t> candidate_origins(const RawSeries& s, std::size_t shift_steps);

/// Mask-length bounds in steps for an hour range.
std::pair<std::size_t, std::size_t> mask_step_range(double min_hours, double max_hours, int resolution);

SampleSet generate_samples(const RawSeries& s, const SampleGenConfig& cfg);

/// Builds a sample at `origin` with a centered mask of `len` steps.
Sample make_window_sample(const RawSeries& s, std::size_t origin, std::size_t len, const NormStats& st);

std::vector<Sample> make_cvr_samples(const RawSeries& s, const std::vector<CvrEvent>& events, const NormStats& st);

void save_sample_set(const SampleSet& set, const std::filesystem::path& dir);
SampleSet load_sample_set(const std::filesystem::path& dir);

}  // namespace loadpin
