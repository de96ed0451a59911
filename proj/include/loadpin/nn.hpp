#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "loadpin/tensor.hpp"

namespace loadpin::nn {

enum class LayerKind { gc, gtc, cnn, attention, dense };
enum class Activation { leaky_relu, identity };

constexpr double kLeakySlope = 0.2;

std::string to_string(LayerKind kind);
std::string to_string(Activation act);
LayerKind parse_layer_kind(const std::string& s);
Activation parse_activation(const std::string& s);

struct LayerSpec {
    LayerKind kind = LayerKind::gc;
    std::size_t kernel_size = 1;
    std::size_t out_channels = 1;
    std::size_t stride = 1;
    std::size_t heads = 0;  // attention only
    Activation activation = Activation::leaky_relu;
    bool spectral_norm = false;

    void validate() const;
    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

template <typename T>
struct Param {
    std::string name;
    Tensor3<T> value;
    Tensor3<T> grad;
    std::vector<T> sn_u;  // power-iteration state, unit norm; empty when unused

    Param() = default;
    Param(std::string n, std::size_t a, std::size_t b, std::size_t c)
        : name(std::move(n)), value(a, b, c), grad(a, b, c) {}
    void zero_grad() { grad.fill(T{0}); }
};

/// Per-call saved activations; owned by the caller so a frozen layer can be
/// evaluated concurrently.
template <typename T>
struct Cache {
    std::vector<Tensor3<T>> saved;
};

template <typename T>
struct SpectralNormResult {
    Tensor3<T> normalized;
    T sigma{1};
    std::vector<T> v;  // right singular estimate, unit norm
};

/// Views `w.value` as an (out x rest) matrix, runs `power_iters` updates of
/// the persistent `w.sn_u`, and returns w / sigma with sigma = |W^T u|.
template <typename T>
SpectralNormResult<T> spectral_normalize(Param<T>& w, int power_iters);

/// Gradient w.r.t. the raw weight given the gradient w.r.t. the normalized
/// weight, holding u fixed.
template <typename T>
Tensor3<T> spectral_norm_backward(const Param<T>& w, const SpectralNormResult<T>& sn, const Tensor3<T>& d_normalized);

template <typename T>
class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor3<T> forward(const Tensor3<T>& x, Cache<T>* cache) const = 0;
    /// Accumulates parameter gradients; returns the input gradient (empty when
    /// `input_grad` is false).
    virtual Tensor3<T> backward(const Cache<T>& cache, const Tensor3<T>& grad_out, bool input_grad = true) = 0;
    virtual std::vector<Param<T>*> params() = 0;
    std::vector<const Param<T>*> params() const {
        auto ps = const_cast<Layer*>(this)->params();
        return {ps.begin(), ps.end()};
    }
    virtual const LayerSpec& spec() const = 0;
    virtual std::size_t in_channels() const = 0;
    virtual std::size_t out_time(std::size_t in_time) const = 0;
    /// Draws weights uniform in +-sqrt(1/fan_in); biases and gate biases zero.
    virtual void init(std::uint64_t seed) = 0;
    /// Recomputes the cached spectrally normalized weights (no-op for layers
    /// without spectral normalization).
    virtual void refresh_spectral_norm(int /*power_iters*/) {}
};

template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec, std::size_t in_channels, const std::string& name);

/// Uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) draws in parameter order.
template <typename T>
void init_params(Layer<T>& layer, std::uint64_t seed) {
    layer.init(seed);
}

template <typename T>
class GatedConv final : public Layer<T> {
public:
    GatedConv(const LayerSpec& spec, std::size_t in_channels, const std::string& name);
    Tensor3<T> forward(const Tensor3<T>& x, Cache<T>* cache) const override;
    Tensor3<T> backward(const Cache<T>& cache, const Tensor3<T>& grad_out, bool input_grad) override;
    using Layer<T>::params;
    std::vector<Param<T>*> params() override { return {&w_, &b_, &u_, &c_}; }
    const LayerSpec& spec() const override { return spec_; }
    std::size_t in_channels() const override { return in_; }
    std::size_t out_time(std::size_t in_time) const override;
    void init(std::uint64_t seed) override;

private:
    bool transpose() const { return spec_.kind == LayerKind::gtc; }
    Tensor3<T> apply(const Tensor3<T>& x, const Param<T>& w, const Param<T>& b) const;

    LayerSpec spec_;
    std::size_t in_;
    Param<T> w_, b_, u_, c_;
};

/// Plain convolution ("cnn") or pointwise projection ("dense", kernel 1),
/// optionally spectrally normalized.
template <typename T>
class Conv final : public Layer<T> {
public:
    Conv(const LayerSpec& spec, std::size_t in_channels, const std::string& name);
    Tensor3<T> forward(const Tensor3<T>& x, Cache<T>* cache) const override;
    Tensor3<T> backward(const Cache<T>& cache, const Tensor3<T>& grad_out, bool input_grad) override;
    using Layer<T>::params;
    std::vector<Param<T>*> params() override { return {&w_, &b_}; }
    const LayerSpec& spec() const override { return spec_; }
    std::size_t in_channels() const override { return in_; }
    std::size_t out_time(std::size_t in_time) const override;
    void init(std::uint64_t seed) override;
    void refresh_spectral_norm(int power_iters) override;

    /// The weight the forward pass consumes.
    const Tensor3<T>& effective_weight() const { return spec_.spectral_norm ? sn_.normalized : w_.value; }
    const SpectralNormResult<T>& spectral_state() const { return sn_; }

private:
    LayerSpec spec_;
    std::size_t in_;
    Param<T> w_, b_;
    SpectralNormResult<T> sn_;
};

/// Multi-head self-attention over time positions, channels as the embedding,
/// with a residual connection: y = x + Wo * concat_i(softmax(Q_i K_i^T / a) V_i).
template <typename T>
class MultiHeadAttention final : public Layer<T> {
public:
    MultiHeadAttention(const LayerSpec& spec, std::size_t channels, const std::string& name);
    Tensor3<T> forward(const Tensor3<T>& x, Cache<T>* cache) const override;
    Tensor3<T> backward(const Cache<T>& cache, const Tensor3<T>& grad_out, bool input_grad) override;
    using Layer<T>::params;
    std::vector<Param<T>*> params() override { return {&wq_, &wk_, &wv_, &wo_}; }
    const LayerSpec& spec() const override { return spec_; }
    std::size_t in_channels() const override { return channels_; }
    std::size_t out_time(std::size_t in_time) const override { return in_time; }
    void init(std::uint64_t seed) override;

    std::size_t heads() const { return spec_.heads; }
    T scale() const;
    /// Softmax probabilities from a cached forward: (batch*heads, T, T).
    static const Tensor3<T>& probabilities(const Cache<T>& cache) { return cache.saved.at(4); }

private:
    LayerSpec spec_;
    std::size_t channels_;
    Param<T> wq_, wk_, wv_, wo_;
};

/// Forward trace of a layer stack: per-layer caches and outputs.
template <typename T>
struct Trace {
    std::vector<Cache<T>> caches;
    std::vector<Tensor3<T>> outputs;
};

template <typename T>
class Sequential {
public:
    Sequential() = default;
    Sequential(const std::vector<LayerSpec>& specs, std::size_t in_channels, const std::string& prefix);

    Tensor3<T> forward(const Tensor3<T>& x, Trace<T>* trace) const;
    /// `extra_grads[i]`, when non-empty, is added to the gradient arriving at
    /// layer i's output (used for feature taps).
    Tensor3<T> backward(const Trace<T>& trace, const Tensor3<T>& grad_out, bool input_grad = true,
                        const std::vector<Tensor3<T>>* extra_grads = nullptr);

    std::size_t size() const { return layers_.size(); }
    Layer<T>& layer(std::size_t i) { return *layers_.at(i); }
    const Layer<T>& layer(std::size_t i) const { return *layers_.at(i); }
    std::vector<Param<T>*> params();
    std::vector<const Param<T>*> params() const;
    std::size_t in_channels() const { return in_channels_; }
    std::size_t out_channels() const;
    void init(std::uint64_t seed);
    void refresh_spectral_norm(int power_iters);
    void zero_grad();

private:
    std::size_t in_channels_ = 0;
    std::vector<std::unique_ptr<Layer<T>>> layers_;
};

}  // namespace loadpin::nn
