#pragma once

#include <vector>

#include "loadpin/samples.hpp"
#include "loadpin/series.hpp"

namespace loadpin {

/// Straight line from the last pre-event to the first post-event value, kW.
std::vector<double> linear_interp(const Sample& s, const NormStats& st);
/// The load 24 h earlier when the sample carries it, else the last pre-event value, kW.
std::vector<double> persistence(const Sample& s, const NormStats& st);

}  // namespace loadpin
