#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace loadpin {

/// Dense batch x channels x time array, row-major with time fastest.
template <typename T>
class Tensor3 {
public:
    using value_type = T;

    Tensor3() = default;
    Tensor3(std::size_t batch, std::size_t channels, std::size_t time, T fill = T{0})
        : batch_(batch), channels_(channels), time_(time), data_(batch * channels * time, fill) {}

    std::size_t batch() const { return batch_; }
    std::size_t channels() const { return channels_; }
    std::size_t time() const { return time_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }
    std::array<std::size_t, 3> shape() const { return {batch_, channels_, time_}; }

    T& operator()(std::size_t b, std::size_t c, std::size_t t) {
        return data_[(b * channels_ + c) * time_ + t];
    }
    const T& operator()(std::size_t b, std::size_t c, std::size_t t) const {
        return data_[(b * channels_ + c) * time_ + t];
    }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::span<T> values() { return data_; }
    std::span<const T> values() const { return data_; }

    /// Pointer to the time series of (b, c).
    T* row(std::size_t b, std::size_t c) { return data_.data() + (b * channels_ + c) * time_; }
    const T* row(std::size_t b, std::size_t c) const { return data_.data() + (b * channels_ + c) * time_; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
    bool same_shape(const Tensor3& o) const {
        return batch_ == o.batch_ && channels_ == o.channels_ && time_ == o.time_;
    }

    template <typename U>
    Tensor3<U> cast() const {
        Tensor3<U> out(batch_, channels_, time_);
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return out;
    }

    bool all_finite() const {
        for (T v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    friend bool operator==(const Tensor3& a, const Tensor3& b) {
        return a.same_shape(b) && a.data_ == b.data_;
    }

private:
    std::size_t batch_ = 0;
    std::size_t channels_ = 0;
    std::size_t time_ = 0;
    std::vector<T> data_;
};

inline std::string shape_string(const std::array<std::size_t, 3>& s) {
    return "(" + std::to_string(s[0]) + "," + std::to_string(s[1]) + "," + std::to_string(s[2]) + ")";
}

template <typename T>
void require_same_shape(const Tensor3<T>& a, const Tensor3<T>& b, const char* what) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(what) + ": shape mismatch " + shape_string(a.shape()) +
                                    " vs " + shape_string(b.shape()));
}

template <typename T>
void add_inplace(Tensor3<T>& dst, const Tensor3<T>& src) {
    require_same_shape(dst, src, "add_inplace");
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <typename T>
T dot(const Tensor3<T>& a, const Tensor3<T>& b) {
    require_same_shape(a, b, "dot");
    T s{0};
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace loadpin
