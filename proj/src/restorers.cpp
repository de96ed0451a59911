#include "loadpin/restorers.hpp"

#include <stdexcept>

namespace loadpin {

namespace {

void need_context(const Sample& s) {
    if (s.event.start_index == 0 || s.event.end_index() >= s.window())
        throw std::invalid_argument("restorer: event needs observations on both sides");
}

}  // namespace

std::vector<double> linear_interp(const Sample& s, const NormStats& st) {
    need_context(s);
    const double a = denormalize(s.load_masked[s.event.start_index - 1], st, Channel::load);
    const double b = denormalize(s.load_masked[s.event.end_index()], st, Channel::load);
    const std::size_t n = s.event.length_steps;
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = a + (b - a) * static_cast<double>(k + 1) / static_cast<double>(n + 1);
    return out;
}

std::vector<double> persistence(const Sample& s, const NormStats& st) {
    std::vector<double> out(s.event.length_steps);
    if (!s.prior_day.empty()) {
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = denormalize(s.prior_day[k], st, Channel::load);
        return out;
    }
    need_context(s);
    const double a = denormalize(s.load_masked[s.event.start_index - 1], st, Channel::load);
    for (double& v : out) v = a;
    return out;
}

}  // namespace loadpin
