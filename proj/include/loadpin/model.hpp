#pragma once

#include <cstdint>
#include <utility>
#include <span>
#include <vector>

#include "loadpin/nn.hpp"
#include "loadpin/samples.hpp"
#include "loadpin/series.hpp"

namespace loadpin {

struct GeneratorConfig {
    std::vector<nn::LayerSpec> coarse;
    std::vector<nn::LayerSpec> fine;
    std::size_t input_channels = 3;  // masked load, temperature, mask
    std::size_t window = 0;          // expected W; 0 accepts any multiple of 4

    static GeneratorConfig standard();
    /// Every non-output width divided by `divisor` (attention keeps its heads).
    GeneratorConfig scaled(std::size_t divisor) const;
    std::size_t attention_blocks() const;
    void validate() const;
    bool operator==(const GeneratorConfig&) const = default;
};

struct DiscConfig {
    std::vector<nn::LayerSpec> layers;
    std::size_t input_channels = 2;  // profile, mask

    static DiscConfig standard();
    DiscConfig scaled(std::size_t divisor) const;
    void validate() const;
    bool operator==(const DiscConfig&) const = default;
};

/// observed * (1 - mask) + generated * mask
std::vector<float> splice(std::span<const float> observed, std::span<const float> generated, std::span<const float> mask);

template <typename T>
struct GeneratorOutput {
    Tensor3<T> stage1;  // (B, 1, W)
    Tensor3<T> stage2;
};

template <typename T>
struct GeneratorTrace {
    nn::Trace<T> coarse, fine;
    Tensor3<T> mask;  // (B, 1, W)
};

template <typename T>
class Generator {
public:
    Generator() = default;
    explicit Generator(GeneratorConfig cfg);

    /// z is (B, 3, W): masked load, temperature, mask.
    GeneratorOutput<T> forward(const Tensor3<T>& z, GeneratorTrace<T>* trace = nullptr) const;
    /// The fine-network input built from z and a stage-1 profile.
    static Tensor3<T> fine_input(const Tensor3<T>& z, const Tensor3<T>& stage1);
    /// Accumulates parameter gradients for losses on both stages. Gradient
    /// reaching stage 1 through the splice is masked like the splice itself.
    void backward(const GeneratorTrace<T>& trace, const Tensor3<T>& d_stage1, const Tensor3<T>& d_stage2);

    nn::Sequential<T>& coarse() { return coarse_; }
    nn::Sequential<T>& fine() { return fine_; }
    const nn::Sequential<T>& coarse() const { return coarse_; }
    const nn::Sequential<T>& fine() const { return fine_; }
    std::vector<nn::Param<T>*> params();
    std::vector<const nn::Param<T>*> params() const;
    void init(std::uint64_t seed);
    void zero_grad();
    const GeneratorConfig& config() const { return cfg_; }

private:
    void check_input(const Tensor3<T>& z) const;
    GeneratorConfig cfg_;
    nn::Sequential<T> coarse_, fine_;
};

template <typename T>
struct DiscOutput {
    Tensor3<T> scores;                 // (B, C_last, ceil(W/32))
    std::vector<Tensor3<T>> features;  // outputs of all but the last layer
    std::size_t per_sample() const { return scores.channels() * scores.time(); }
};

template <typename T>
class Discriminator {
public:
    Discriminator() = default;
    explicit Discriminator(DiscConfig cfg);

    /// x is (B, 2, W): profile, mask. Uses the spectral-norm state from the
    /// last refresh.
    DiscOutput<T> forward(const Tensor3<T>& x, nn::Trace<T>* trace = nullptr) const;
    /// Accumulates parameter gradients. `d_features` may be null or hold
    /// empty tensors for untouched taps.
    Tensor3<T> backward(const nn::Trace<T>& trace, const Tensor3<T>& d_scores,
                        const std::vector<Tensor3<T>>* d_features, bool input_grad);
    void refresh_spectral_norm(int power_iters) { net_.refresh_spectral_norm(power_iters); }

    nn::Sequential<T>& net() { return net_; }
    const nn::Sequential<T>& net() const { return net_; }
    std::vector<nn::Param<T>*> params() { return net_.params(); }
    std::vector<const nn::Param<T>*> params() const { return std::as_const(net_).params(); }
    void init(std::uint64_t seed) { net_.init(seed); }
    void zero_grad() { net_.zero_grad(); }
    const DiscConfig& config() const { return cfg_; }
    std::size_t feature_taps() const { return net_.size() - 1; }

private:
    DiscConfig cfg_;
    nn::Sequential<T> net_;
};

/// (B, 3, W) generator input.
template <typename T>
Tensor3<T> pack_inputs(std::span<const Sample* const> batch);
/// (B, 1, W) full truth profiles (mask samples only).
template <typename T>
Tensor3<T> pack_truth(std::span<const Sample* const> batch);

/// Restored event segment in kW: denormalized stage-2 values at the mask.
std::vector<double> inpaint(const Generator<float>& g, const Sample& s, const NormStats& st);

struct StageEstimates {
    std::vector<double> stage1, stage2;  // kW over the event
};
/// Batched inference for many samples at once.
std::vector<StageEstimates> inpaint_stages(const Generator<float>& g, std::span<const Sample> samples, const NormStats& st,
                                           std::size_t batch = 32);

}  // namespace loadpin
