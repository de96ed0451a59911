#include "loadpin/losses.hpp"

#include <algorithm>
#include <stdexcept>

namespace loadpin {

IndexRange loss_window(const EventSpec& ev, std::size_t margin, std::size_t window) {
    const std::size_t b = ev.start_index > margin ? ev.start_index - margin : 0;
    const std::size_t e = std::min(window, ev.end_index() + margin);
    return {b, e};
}

namespace {

template <typename T>
void check_range(std::span<const T> a, std::span<const T> b, IndexRange r) {
    if (a.size() != b.size()) throw std::invalid_argument("content loss: length mismatch");
    if (r.begin >= r.end) throw std::invalid_argument("content loss: empty range");
    if (r.end > a.size()) throw std::invalid_argument("content loss: range outside the profile");
}

}  // namespace

template <typename T>
double content_loss(std::span<const T> est, std::span<const T> truth, IndexRange r) {
    check_range(est, truth, r);
    double s = 0;
    for (std::size_t i = r.begin; i < r.end; ++i) {
        const double d = static_cast<double>(est[i]) - static_cast<double>(truth[i]);
        s += d * d;
    }
    return s / static_cast<double>(r.end - r.begin);
}

template <typename T>
void content_loss_grad(std::span<const T> est, std::span<const T> truth, IndexRange r, double scale,
                       std::span<T> grad) {
    check_range(est, truth, r);
    if (grad.size() != est.size()) throw std::invalid_argument("content loss: gradient length mismatch");
    const double k = 2.0 * scale / static_cast<double>(r.end - r.begin);
    for (std::size_t i = r.begin; i < r.end; ++i)
        grad[i] += static_cast<T>(k * (static_cast<double>(est[i]) - static_cast<double>(truth[i])));
}

template <typename T>
double adv_loss(std::span<const T> scores) {
    if (scores.empty()) throw std::invalid_argument("adv loss: no scores");
    double s = 0;
    for (T v : scores) s += static_cast<double>(v);
    return -s / static_cast<double>(scores.size());
}

template <typename T>
double feat_loss(const std::vector<Tensor3<T>>& fake, const std::vector<Tensor3<T>>& real) {
    if (fake.size() != real.size()) throw std::invalid_argument("feature loss: layer counts differ");
    double total = 0;
    for (std::size_t j = 0; j < fake.size(); ++j) {
        require_same_shape(fake[j], real[j], "feature loss");
        double s = 0;
        for (std::size_t i = 0; i < fake[j].size(); ++i) {
            const double d = static_cast<double>(fake[j][i]) - static_cast<double>(real[j][i]);
            s += d * d;
        }
        total += s / static_cast<double>(fake[j].size());
    }
    return total;
}

double refine_loss(double content, double adv, double feat, double l1, double l2) {
    return content + l1 * adv + l2 * feat;
}

template <typename T>
double disc_loss(std::span<const T> real, std::span<const T> fake) {
    if (real.empty() || fake.empty()) throw std::invalid_argument("disc loss: no scores");
    double r = 0, f = 0;
    for (T v : real) r += std::max(0.0, 1.0 - static_cast<double>(v));
    for (T v : fake) f += std::max(0.0, 1.0 + static_cast<double>(v));
    return r / static_cast<double>(real.size()) + f / static_cast<double>(fake.size());
}

#define LOADPIN_LOSSES(T)                                                                                     \
    template double content_loss<T>(std::span<const T>, std::span<const T>, IndexRange);                     \
    template void content_loss_grad<T>(std::span<const T>, std::span<const T>, IndexRange, double, std::span<T>); \
    template double adv_loss<T>(std::span<const T>);                                                          \
    template double feat_loss<T>(const std::vector<Tensor3<T>>&, const std::vector<Tensor3<T>>&);             \
    template double disc_loss<T>(std::span<const T>, std::span<const T>);
LOADPIN_LOSSES(float)
LOADPIN_LOSSES(double)
#undef LOADPIN_LOSSES

}  // namespace loadpin
