#include "loadpin/model.hpp"

#include <algorithm>
#include <stdexcept>
#include <utility>

namespace loadpin {

using nn::Activation;
using nn::LayerKind;
using nn::LayerSpec;

namespace {

LayerSpec gc(std::size_t k, std::size_t n, std::size_t s) { return {LayerKind::gc, k, n, s, 0, Activation::leaky_relu, false}; }
LayerSpec gtc(std::size_t k, std::size_t n, std::size_t s) { return {LayerKind::gtc, k, n, s, 0, Activation::leaky_relu, false}; }
LayerSpec attn(std::size_t width, std::size_t heads) {
    return {LayerKind::attention, 1, width, 1, heads, Activation::identity, false};
}

void check_strides(const std::vector<LayerSpec>& layers, const char* what) {
    std::size_t down = 1, up = 1;
    for (const auto& l : layers) {
        l.validate();
        if (l.kind == LayerKind::gtc)
            up *= l.stride;
        else
            down *= l.stride;
    }
    if (down != up) throw std::invalid_argument(std::string(what) + ": down- and up-sampling strides differ");
    if (layers.empty() || layers.back().out_channels != 1)
        throw std::invalid_argument(std::string(what) + ": last layer must have one output channel");
}

std::vector<LayerSpec> scale_layers(std::vector<LayerSpec> layers, std::size_t d, bool keep_last) {
    if (d == 0) throw std::invalid_argument("scale divisor must be positive");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (keep_last && i + 1 == layers.size()) continue;
        auto& l = layers[i];
        std::size_t n = std::max<std::size_t>(1, l.out_channels / d);
        if (l.kind == LayerKind::attention) n = std::max(n, l.heads) / l.heads * l.heads;
        l.out_channels = n;
    }
    return layers;
}

std::vector<std::size_t> batch_windows(std::span<const Sample* const> batch) {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    const std::size_t W = batch.front()->window();
    for (const Sample* s : batch)
        if (s->window() != W) throw std::invalid_argument("samples in a batch must share one window length");
    return {batch.size(), W};
}

}  // namespace

GeneratorConfig GeneratorConfig::standard() {
    GeneratorConfig c;
    c.coarse = {gc(5, 64, 1), gc(4, 128, 2), gc(3, 128, 1), gc(4, 256, 2), gc(3, 256, 1),
                gtc(3, 128, 2), gc(3, 128, 1), gtc(3, 64, 2), gc(3, 1, 1)};
    c.coarse.back().activation = Activation::identity;
    c.fine = {gc(5, 64, 1), gc(4, 128, 2), gc(3, 128, 1), gc(4, 256, 2), gc(3, 256, 1),
              attn(256, 4), attn(256, 4), attn(256, 4), attn(256, 4),
              gc(3, 256, 1), gtc(3, 128, 2), gc(3, 128, 1), gtc(3, 64, 2), gc(3, 1, 1)};
    c.fine.back().activation = Activation::identity;
    return c;
}

GeneratorConfig GeneratorConfig::scaled(std::size_t d) const {
    GeneratorConfig c = *this;
    c.coarse = scale_layers(coarse, d, true);
    c.fine = scale_layers(fine, d, true);
    return c;
}

std::size_t GeneratorConfig::attention_blocks() const {
    return static_cast<std::size_t>(std::count_if(fine.begin(), fine.end(),
                                                  [](const LayerSpec& l) { return l.kind == LayerKind::attention; }));
}

void GeneratorConfig::validate() const {
    if (input_channels != 3) throw std::invalid_argument("generator: input must have 3 channels");
    check_strides(coarse, "coarse network");
    check_strides(fine, "fine network");
    if (attention_blocks() != 4) throw std::invalid_argument("fine network must contain exactly 4 attention blocks");
    if (window % 4 != 0) throw std::invalid_argument("generator: window must be a multiple of 4");
}

DiscConfig DiscConfig::standard() {
    DiscConfig c;
    for (std::size_t n : {16u, 32u, 64u, 128u, 256u})
        c.layers.push_back({LayerKind::cnn, 4, n, 2, 0, Activation::leaky_relu, true});
    c.layers.back().activation = Activation::identity;
    return c;
}

DiscConfig DiscConfig::scaled(std::size_t d) const {
    DiscConfig c = *this;
    c.layers = scale_layers(layers, d, false);
    return c;
}

void DiscConfig::validate() const {
    if (input_channels != 2) throw std::invalid_argument("discriminator: input must have 2 channels");
    if (layers.size() != 5) throw std::invalid_argument("discriminator: exactly 5 layers required");
    for (const auto& l : layers) {
        l.validate();
        if (l.kind != LayerKind::cnn || !l.spectral_norm)
            throw std::invalid_argument("discriminator: layers must be spectrally normalized convolutions");
    }
}

std::vector<float> splice(std::span<const float> observed, std::span<const float> generated, std::span<const float> mask) {
    if (observed.size() != generated.size() || observed.size() != mask.size())
        throw std::invalid_argument("splice: length mismatch");
    std::vector<float> out(observed.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = observed[i] * (1.0f - mask[i]) + generated[i] * mask[i];
    return out;
}

// ---------------------------------------------------------------------------

template <typename T>
Generator<T>::Generator(GeneratorConfig cfg)
    : cfg_(std::move(cfg)),
      coarse_((cfg_.validate(), cfg_.coarse), cfg_.input_channels, "g1"),
      fine_(cfg_.fine, cfg_.input_channels, "g2") {}

template <typename T>
void Generator<T>::check_input(const Tensor3<T>& z) const {
    if (z.channels() != cfg_.input_channels)
        throw std::invalid_argument("generator: expected " + std::to_string(cfg_.input_channels) + " input channels, got " +
                                    std::to_string(z.channels()));
    if (z.time() % 4 != 0) throw std::invalid_argument("generator: window length must be a multiple of 4");
    if (cfg_.window != 0 && z.time() != cfg_.window)
        throw std::invalid_argument("generator: window length " + std::to_string(z.time()) + " does not match trained W=" +
                                    std::to_string(cfg_.window));
}

template <typename T>
Tensor3<T> Generator<T>::fine_input(const Tensor3<T>& z, const Tensor3<T>& stage1) {
    Tensor3<T> f = z;
    for (std::size_t b = 0; b < z.batch(); ++b) {
        const T* m = z.row(b, 2);
        const T* s1 = stage1.row(b, 0);
        T* c = f.row(b, 0);
        for (std::size_t t = 0; t < z.time(); ++t) c[t] = c[t] * (T{1} - m[t]) + s1[t] * m[t];
    }
    return f;
}

template <typename T>
GeneratorOutput<T> Generator<T>::forward(const Tensor3<T>& z, GeneratorTrace<T>* trace) const {
    check_input(z);
    GeneratorOutput<T> out;
    out.stage1 = coarse_.forward(z, trace ? &trace->coarse : nullptr);
    out.stage2 = fine_.forward(fine_input(z, out.stage1), trace ? &trace->fine : nullptr);
    if (trace) {
        trace->mask = Tensor3<T>(z.batch(), 1, z.time());
        for (std::size_t b = 0; b < z.batch(); ++b) std::copy_n(z.row(b, 2), z.time(), trace->mask.row(b, 0));
    }
    return out;
}

template <typename T>
void Generator<T>::backward(const GeneratorTrace<T>& trace, const Tensor3<T>& d_stage1, const Tensor3<T>& d_stage2) {
    Tensor3<T> d1 = d_stage1;
    if (!d_stage2.empty()) {
        const Tensor3<T> d_in = fine_.backward(trace.fine, d_stage2, true);
        if (d1.empty()) d1 = Tensor3<T>(d_in.batch(), 1, d_in.time());
        for (std::size_t b = 0; b < d_in.batch(); ++b) {
            const T* m = trace.mask.row(b, 0);
            const T* g = d_in.row(b, 0);
            T* o = d1.row(b, 0);
            for (std::size_t t = 0; t < d_in.time(); ++t) o[t] += g[t] * m[t];
        }
    }
    if (!d1.empty()) coarse_.backward(trace.coarse, d1, false);
}

template <typename T>
std::vector<nn::Param<T>*> Generator<T>::params() {
    auto a = coarse_.params();
    auto b = fine_.params();
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

template <typename T>
std::vector<const nn::Param<T>*> Generator<T>::params() const {
    auto ps = const_cast<Generator*>(this)->params();
    return {ps.begin(), ps.end()};
}

template <typename T>
void Generator<T>::init(std::uint64_t seed) {
    coarse_.init(seed);
    fine_.init(seed ^ 0xf1e2d3c4b5a69788ULL);
}

template <typename T>
void Generator<T>::zero_grad() {
    coarse_.zero_grad();
    fine_.zero_grad();
}

// ---------------------------------------------------------------------------

template <typename T>
Discriminator<T>::Discriminator(DiscConfig cfg)
    : cfg_(std::move(cfg)), net_((cfg_.validate(), cfg_.layers), cfg_.input_channels, "d") {}

template <typename T>
DiscOutput<T> Discriminator<T>::forward(const Tensor3<T>& x, nn::Trace<T>* trace) const {
    if (x.channels() != cfg_.input_channels)
        throw std::invalid_argument("discriminator: expected 2 input channels (profile, mask)");
    nn::Trace<T> local;
    nn::Trace<T>& tr = trace ? *trace : local;
    DiscOutput<T> out;
    out.scores = net_.forward(x, &tr);
    out.features.assign(tr.outputs.begin(), tr.outputs.end() - 1);
    return out;
}

template <typename T>
Tensor3<T> Discriminator<T>::backward(const nn::Trace<T>& trace, const Tensor3<T>& d_scores,
                                      const std::vector<Tensor3<T>>* d_features, bool input_grad) {
    if (!d_features) return net_.backward(trace, d_scores, input_grad, nullptr);
    std::vector<Tensor3<T>> extra(net_.size());
    for (std::size_t j = 0; j < d_features->size() && j < extra.size(); ++j) extra[j] = (*d_features)[j];
    return net_.backward(trace, d_scores, input_grad, &extra);
}

// ---------------------------------------------------------------------------

template <typename T>
Tensor3<T> pack_inputs(std::span<const Sample* const> batch) {
    const auto bw = batch_windows(batch);
    Tensor3<T> z(bw[0], 3, bw[1]);
    for (std::size_t b = 0; b < batch.size(); ++b) {
        std::copy(batch[b]->load_masked.begin(), batch[b]->load_masked.end(), z.row(b, 0));
        std::copy(batch[b]->temperature.begin(), batch[b]->temperature.end(), z.row(b, 1));
        std::copy(batch[b]->mask.begin(), batch[b]->mask.end(), z.row(b, 2));
    }
    return z;
}

template <typename T>
Tensor3<T> pack_truth(std::span<const Sample* const> batch) {
    const auto bw = batch_windows(batch);
    Tensor3<T> y(bw[0], 1, bw[1]);
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto p = batch[b]->truth_profile();
        std::copy(p.begin(), p.end(), y.row(b, 0));
    }
    return y;
}

std::vector<StageEstimates> inpaint_stages(const Generator<float>& g, std::span<const Sample> samples, const NormStats& st,
                                           std::size_t batch) {
    std::vector<StageEstimates> out(samples.size());
    for (std::size_t b0 = 0; b0 < samples.size(); b0 += batch) {
        const std::size_t n = std::min(batch, samples.size() - b0);
        std::vector<const Sample*> ptrs;
        for (std::size_t i = 0; i < n; ++i) ptrs.push_back(&samples[b0 + i]);
        const auto z = pack_inputs<float>(ptrs);
        const auto y = g.forward(z);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& ev = ptrs[i]->event;
            auto& e = out[b0 + i];
            for (std::size_t k = 0; k < ev.length_steps; ++k) {
                const std::size_t t = ev.start_index + k;
                e.stage1.push_back(denormalize(y.stage1(i, 0, t), st, Channel::load));
                e.stage2.push_back(denormalize(y.stage2(i, 0, t), st, Channel::load));
            }
        }
    }
    return out;
}

std::vector<double> inpaint(const Generator<float>& g, const Sample& s, const NormStats& st) {
    return inpaint_stages(g, std::span<const Sample>(&s, 1), st, 1).front().stage2;
}

template class Generator<float>;
template class Generator<double>;
template class Discriminator<float>;
template class Discriminator<double>;
template Tensor3<float> pack_inputs<float>(std::span<const Sample* const>);
template Tensor3<double> pack_inputs<double>(std::span<const Sample* const>);
template Tensor3<float> pack_truth<float>(std::span<const Sample* const>);
template Tensor3<double> pack_truth<double>(std::span<const Sample* const>);

}  // namespace loadpin
