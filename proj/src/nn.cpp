#include "loadpin/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "loadpin/kernels.hpp"

namespace loadpin::nn {

namespace {

constexpr double kSnEps = 1e-12;

template <typename T>
T activate(Activation a, T x) {
    if (a == Activation::identity) return x;
    return x > T{0} ? x : static_cast<T>(kLeakySlope) * x;
}

template <typename T>
T activate_grad(Activation a, T x) {
    if (a == Activation::identity) return T{1};
    return x > T{0} ? T{1} : static_cast<T>(kLeakySlope);
}

template <typename T>
T sigmoid(T x) {
    return T{1} / (T{1} + std::exp(-x));
}

template <typename T>
void fill_uniform(Tensor3<T>& t, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(dist(rng));
}

template <typename T>
void random_unit(std::vector<T>& u, std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<double> tmp(n);
    double norm = 0;
    for (auto& v : tmp) {
        v = dist(rng);
        norm += v * v;
    }
    norm = std::sqrt(std::max(norm, kSnEps));
    u.resize(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = static_cast<T>(tmp[i] / norm);
}

template <typename T>
void normalize(std::vector<T>& v) {
    T n{0};
    for (T x : v) n += x * x;
    n = std::sqrt(std::max(n, static_cast<T>(kSnEps)));
    for (T& x : v) x /= n;
}

template <typename T>
std::span<const T> span_of(const Param<T>& p) {
    return p.value.values();
}

}  // namespace

std::string to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::gc: return "gc";
        case LayerKind::gtc: return "gtc";
        case LayerKind::cnn: return "cnn";
        case LayerKind::attention: return "attention";
        case LayerKind::dense: return "dense";
    }
    return "?";
}

std::string to_string(Activation act) { return act == Activation::leaky_relu ? "leaky_relu" : "identity"; }

LayerKind parse_layer_kind(const std::string& s) {
    for (auto k : {LayerKind::gc, LayerKind::gtc, LayerKind::cnn, LayerKind::attention, LayerKind::dense})
        if (to_string(k) == s) return k;
    throw std::invalid_argument("unknown layer kind '" + s + "'");
}

Activation parse_activation(const std::string& s) {
    if (s == "leaky_relu") return Activation::leaky_relu;
    if (s == "identity") return Activation::identity;
    throw std::invalid_argument("unknown activation '" + s + "'");
}

void LayerSpec::validate() const {
    if (kernel_size < 1) throw std::invalid_argument("layer spec: kernel_size must be >= 1");
    if (stride != 1 && stride != 2) throw std::invalid_argument("layer spec: stride must be 1 or 2");
    if (out_channels < 1) throw std::invalid_argument("layer spec: out_channels must be >= 1");
    if (kind == LayerKind::attention) {
        if (heads < 1 || out_channels % heads != 0)
            throw std::invalid_argument("layer spec: heads must divide the attention width");
        if (stride != 1) throw std::invalid_argument("layer spec: attention stride must be 1");
    }
    if (kind == LayerKind::dense && (kernel_size != 1 || stride != 1))
        throw std::invalid_argument("layer spec: dense layers are pointwise (kernel 1, stride 1)");
}

// ---------------------------------------------------------------------------
// Spectral normalization

template <typename T>
SpectralNormResult<T> spectral_normalize(Param<T>& w, int power_iters) {
    const std::size_t rows = w.value.batch();
    const std::size_t cols = w.value.channels() * w.value.time();
    const T* W = w.value.data();
    if (w.sn_u.size() != rows) {
        std::mt19937_64 rng(0x5eedULL + rows);
        random_unit(w.sn_u, rows, rng);
    }
    std::vector<T>& u = w.sn_u;
    std::vector<T> v(cols);
    auto wt_u = [&] {
        std::fill(v.begin(), v.end(), T{0});
        for (std::size_t r = 0; r < rows; ++r) {
            const T ur = u[r];
            const T* wr = W + r * cols;
            for (std::size_t c = 0; c < cols; ++c) v[c] += wr[c] * ur;
        }
    };
    for (int it = 0; it < power_iters; ++it) {
        wt_u();
        normalize(v);
        for (std::size_t r = 0; r < rows; ++r) {
            const T* wr = W + r * cols;
            T s{0};
            for (std::size_t c = 0; c < cols; ++c) s += wr[c] * v[c];
            u[r] = s;
        }
        normalize(u);
    }
    wt_u();
    T sigma{0};
    for (T x : v) sigma += x * x;
    sigma = std::sqrt(sigma);
    sigma = std::max(sigma, static_cast<T>(kSnEps));
    for (T& x : v) x /= sigma;

    SpectralNormResult<T> out;
    out.sigma = sigma;
    out.v = std::move(v);
    out.normalized = w.value;
    for (std::size_t i = 0; i < out.normalized.size(); ++i) out.normalized[i] /= sigma;
    return out;
}

template <typename T>
Tensor3<T> spectral_norm_backward(const Param<T>& w, const SpectralNormResult<T>& sn, const Tensor3<T>& d_normalized) {
    require_same_shape(w.value, d_normalized, "spectral_norm_backward");
    const std::size_t rows = w.value.batch();
    const std::size_t cols = w.value.channels() * w.value.time();
    const T inner = dot(d_normalized, sn.normalized);
    Tensor3<T> g(w.value.batch(), w.value.channels(), w.value.time());
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            g[r * cols + c] = (d_normalized[r * cols + c] - inner * w.sn_u[r] * sn.v[c]) / sn.sigma;
    return g;
}

// ---------------------------------------------------------------------------
// Gated convolution

template <typename T>
GatedConv<T>::GatedConv(const LayerSpec& spec, std::size_t in_channels, const std::string& name)
    : spec_(spec), in_(in_channels) {
    spec_.validate();
    const std::size_t K = spec.kernel_size, out = spec.out_channels;
    if (transpose()) {
        w_ = Param<T>(name + ".W", in_channels, out, K);
        u_ = Param<T>(name + ".U", in_channels, out, K);
    } else {
        w_ = Param<T>(name + ".W", out, in_channels, K);
        u_ = Param<T>(name + ".U", out, in_channels, K);
    }
    b_ = Param<T>(name + ".b", out, 1, 1);
    c_ = Param<T>(name + ".c", out, 1, 1);
}

template <typename T>
std::size_t GatedConv<T>::out_time(std::size_t in_time) const {
    return transpose() ? in_time * spec_.stride : (in_time + spec_.stride - 1) / spec_.stride;
}

template <typename T>
void GatedConv<T>::init(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const double bound = std::sqrt(1.0 / static_cast<double>(in_ * spec_.kernel_size));
    fill_uniform(w_.value, bound, rng);
    fill_uniform(u_.value, bound, rng);
    b_.value.fill(T{0});
    c_.value.fill(T{0});
}

template <typename T>
Tensor3<T> GatedConv<T>::apply(const Tensor3<T>& x, const Param<T>& w, const Param<T>& b) const {
    return transpose() ? kernels::tconv1d(x, w.value, span_of(b), spec_.stride)
                       : kernels::conv1d(x, w.value, span_of(b), spec_.stride);
}

template <typename T>
Tensor3<T> GatedConv<T>::forward(const Tensor3<T>& x, Cache<T>* cache) const {
    Tensor3<T> f = apply(x, w_, b_);
    Tensor3<T> g = apply(x, u_, c_);
    Tensor3<T> h(f.batch(), f.channels(), f.time());
    const Activation act = spec_.activation;
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < h.size(); ++i) h[i] = activate(act, f[i]) * sigmoid(g[i]);
    if (cache) cache->saved = {x, std::move(f), std::move(g)};
    return h;
}

template <typename T>
Tensor3<T> GatedConv<T>::backward(const Cache<T>& cache, const Tensor3<T>& dh, bool input_grad) {
    const Tensor3<T>& x = cache.saved.at(0);
    const Tensor3<T>& f = cache.saved.at(1);
    const Tensor3<T>& g = cache.saved.at(2);
    require_same_shape(dh, f, "GatedConv::backward");
    Tensor3<T> df(f.batch(), f.channels(), f.time()), dg(f.batch(), f.channels(), f.time());
    const Activation act = spec_.activation;
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < dh.size(); ++i) {
        const T s = sigmoid(g[i]);
        df[i] = dh[i] * s * activate_grad(act, f[i]);
        dg[i] = dh[i] * activate(act, f[i]) * s * (T{1} - s);
    }
    Tensor3<T> dx_f, dx_g;
    auto bwd = transpose() ? &kernels::tconv1d_backward<T> : &kernels::conv1d_backward<T>;
    bwd(x, w_.value, spec_.stride, df, input_grad ? &dx_f : nullptr, &w_.grad, b_.grad.values());
    bwd(x, u_.value, spec_.stride, dg, input_grad ? &dx_g : nullptr, &u_.grad, c_.grad.values());
    if (!input_grad) return {};
    add_inplace(dx_f, dx_g);
    return dx_f;
}

// ---------------------------------------------------------------------------
// Plain / dense convolution

template <typename T>
Conv<T>::Conv(const LayerSpec& spec, std::size_t in_channels, const std::string& name)
    : spec_(spec), in_(in_channels) {
    spec_.validate();
    if (spec.kind != LayerKind::cnn && spec.kind != LayerKind::dense)
        throw std::invalid_argument("Conv: layer kind must be cnn or dense");
    w_ = Param<T>(name + ".W", spec.out_channels, in_channels, spec.kernel_size);
    b_ = Param<T>(name + ".b", spec.out_channels, 1, 1);
}

template <typename T>
std::size_t Conv<T>::out_time(std::size_t in_time) const {
    return (in_time + spec_.stride - 1) / spec_.stride;
}

template <typename T>
void Conv<T>::init(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    fill_uniform(w_.value, std::sqrt(1.0 / static_cast<double>(in_ * spec_.kernel_size)), rng);
    b_.value.fill(T{0});
    if (spec_.spectral_norm) {
        random_unit(w_.sn_u, spec_.out_channels, rng);
        refresh_spectral_norm(1);
    }
}

template <typename T>
void Conv<T>::refresh_spectral_norm(int power_iters) {
    if (spec_.spectral_norm) sn_ = spectral_normalize(w_, power_iters);
}

template <typename T>
Tensor3<T> Conv<T>::forward(const Tensor3<T>& x, Cache<T>* cache) const {
    if (spec_.spectral_norm && sn_.normalized.size() != w_.value.size())
        throw std::logic_error("Conv::forward: spectral norm not refreshed for " + w_.name);
    Tensor3<T> pre = kernels::conv1d(x, effective_weight(), span_of(b_), spec_.stride);
    Tensor3<T> y = pre;
    if (spec_.activation != Activation::identity)
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = activate(spec_.activation, y[i]);
    if (cache) cache->saved = {x, std::move(pre)};
    return y;
}

template <typename T>
Tensor3<T> Conv<T>::backward(const Cache<T>& cache, const Tensor3<T>& dy, bool input_grad) {
    const Tensor3<T>& x = cache.saved.at(0);
    const Tensor3<T>& pre = cache.saved.at(1);
    require_same_shape(dy, pre, "Conv::backward");
    Tensor3<T> dpre = dy;
    if (spec_.activation != Activation::identity)
        for (std::size_t i = 0; i < dpre.size(); ++i) dpre[i] *= activate_grad(spec_.activation, pre[i]);
    Tensor3<T> dx;
    if (spec_.spectral_norm) {
        Tensor3<T> dw_hat(w_.value.batch(), w_.value.channels(), w_.value.time());
        kernels::conv1d_backward(x, sn_.normalized, spec_.stride, dpre, input_grad ? &dx : nullptr, &dw_hat,
                                 b_.grad.values());
        add_inplace(w_.grad, spectral_norm_backward(w_, sn_, dw_hat));
    } else {
        kernels::conv1d_backward(x, w_.value, spec_.stride, dpre, input_grad ? &dx : nullptr, &w_.grad,
                                 b_.grad.values());
    }
    return dx;
}

// ---------------------------------------------------------------------------
// Multi-head self-attention

template <typename T>
MultiHeadAttention<T>::MultiHeadAttention(const LayerSpec& spec, std::size_t channels, const std::string& name)
    : spec_(spec), channels_(channels) {
    spec_.validate();
    if (spec.out_channels != channels)
        throw std::invalid_argument("attention: width " + std::to_string(spec.out_channels) +
                                    " must equal input channels " + std::to_string(channels));
    wq_ = Param<T>(name + ".Wq", channels, channels, 1);
    wk_ = Param<T>(name + ".Wk", channels, channels, 1);
    wv_ = Param<T>(name + ".Wv", channels, channels, 1);
    wo_ = Param<T>(name + ".Wo", channels, channels, 1);
}

template <typename T>
T MultiHeadAttention<T>::scale() const {
    return static_cast<T>(std::sqrt(static_cast<double>(channels_ / spec_.heads)));
}

template <typename T>
void MultiHeadAttention<T>::init(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const double bound = std::sqrt(1.0 / static_cast<double>(channels_));
    for (Param<T>* p : params()) fill_uniform(p->value, bound, rng);
}

template <typename T>
Tensor3<T> MultiHeadAttention<T>::forward(const Tensor3<T>& x, Cache<T>* cache) const {
    if (x.channels() != channels_)
        throw std::invalid_argument("attention: expected " + std::to_string(channels_) + " channels, got " +
                                    std::to_string(x.channels()));
    const std::size_t B = x.batch(), Tt = x.time(), H = spec_.heads, d = channels_ / H;
    const std::span<const T> nobias;
    Tensor3<T> q = kernels::conv1d(x, wq_.value, nobias, 1);
    Tensor3<T> k = kernels::conv1d(x, wk_.value, nobias, 1);
    Tensor3<T> v = kernels::conv1d(x, wv_.value, nobias, 1);
    Tensor3<T> p(B * H, Tt, Tt);
    Tensor3<T> o(B, channels_, Tt);
    const T inv_scale = T{1} / scale();
#pragma omp parallel for schedule(static)
    for (std::size_t bh = 0; bh < B * H; ++bh) {
        const std::size_t b = bh / H, h = bh % H;
        std::vector<T> row(Tt);
        for (std::size_t t1 = 0; t1 < Tt; ++t1) {
            T mx = -std::numeric_limits<T>::infinity();
            for (std::size_t t2 = 0; t2 < Tt; ++t2) {
                T s{0};
                for (std::size_t f = h * d; f < (h + 1) * d; ++f) s += q(b, f, t1) * k(b, f, t2);
                row[t2] = s * inv_scale;
                mx = std::max(mx, row[t2]);
            }
            T z{0};
            for (std::size_t t2 = 0; t2 < Tt; ++t2) {
                row[t2] = std::exp(row[t2] - mx);
                z += row[t2];
            }
            for (std::size_t t2 = 0; t2 < Tt; ++t2) p(bh, t1, t2) = row[t2] / z;
        }
        for (std::size_t f = h * d; f < (h + 1) * d; ++f) {
            const T* vf = v.row(b, f);
            T* of = o.row(b, f);
            for (std::size_t t1 = 0; t1 < Tt; ++t1) {
                const T* pr = p.row(bh, t1);
                T s{0};
                for (std::size_t t2 = 0; t2 < Tt; ++t2) s += pr[t2] * vf[t2];
                of[t1] = s;
            }
        }
    }
    Tensor3<T> y = kernels::conv1d(o, wo_.value, nobias, 1);
    add_inplace(y, x);
    if (cache) cache->saved = {x, std::move(q), std::move(k), std::move(v), std::move(p), std::move(o)};
    return y;
}

template <typename T>
Tensor3<T> MultiHeadAttention<T>::backward(const Cache<T>& cache, const Tensor3<T>& dy, bool input_grad) {
    const Tensor3<T>& x = cache.saved.at(0);
    const Tensor3<T>& q = cache.saved.at(1);
    const Tensor3<T>& k = cache.saved.at(2);
    const Tensor3<T>& v = cache.saved.at(3);
    const Tensor3<T>& p = cache.saved.at(4);
    const Tensor3<T>& o = cache.saved.at(5);
    require_same_shape(dy, x, "MultiHeadAttention::backward");
    const std::size_t B = x.batch(), Tt = x.time(), H = spec_.heads, d = channels_ / H;
    const std::span<T> nobias;

    Tensor3<T> d_o;
    kernels::conv1d_backward(o, wo_.value, 1, dy, &d_o, &wo_.grad, nobias);

    Tensor3<T> dq(B, channels_, Tt), dk(B, channels_, Tt), dv(B, channels_, Tt);
    const T inv_scale = T{1} / scale();
#pragma omp parallel for schedule(static)
    for (std::size_t bh = 0; bh < B * H; ++bh) {
        const std::size_t b = bh / H, h = bh % H;
        std::vector<T> dp(Tt * Tt, T{0});
        for (std::size_t f = h * d; f < (h + 1) * d; ++f) {
            const T* dof = d_o.row(b, f);
            const T* vf = v.row(b, f);
            T* dvf = dv.row(b, f);
            for (std::size_t t1 = 0; t1 < Tt; ++t1) {
                const T* pr = p.row(bh, t1);
                for (std::size_t t2 = 0; t2 < Tt; ++t2) {
                    dp[t1 * Tt + t2] += dof[t1] * vf[t2];
                    dvf[t2] += pr[t2] * dof[t1];
                }
            }
        }
        // softmax adjoint, folded with the 1/scale factor
        for (std::size_t t1 = 0; t1 < Tt; ++t1) {
            const T* pr = p.row(bh, t1);
            T inner{0};
            for (std::size_t t2 = 0; t2 < Tt; ++t2) inner += dp[t1 * Tt + t2] * pr[t2];
            for (std::size_t t2 = 0; t2 < Tt; ++t2) dp[t1 * Tt + t2] = pr[t2] * (dp[t1 * Tt + t2] - inner) * inv_scale;
        }
        for (std::size_t f = h * d; f < (h + 1) * d; ++f) {
            const T* qf = q.row(b, f);
            const T* kf = k.row(b, f);
            T* dqf = dq.row(b, f);
            T* dkf = dk.row(b, f);
            for (std::size_t t1 = 0; t1 < Tt; ++t1)
                for (std::size_t t2 = 0; t2 < Tt; ++t2) {
                    const T ds = dp[t1 * Tt + t2];
                    dqf[t1] += ds * kf[t2];
                    dkf[t2] += ds * qf[t1];
                }
        }
    }

    Tensor3<T> dx = input_grad ? dy : Tensor3<T>{};
    Tensor3<T> tmp;
    for (auto [proj, grad] : {std::pair{&wq_, &dq}, std::pair{&wk_, &dk}, std::pair{&wv_, &dv}}) {
        kernels::conv1d_backward(x, proj->value, 1, *grad, input_grad ? &tmp : nullptr, &proj->grad, nobias);
        if (input_grad) add_inplace(dx, tmp);
    }
    return dx;
}

// ---------------------------------------------------------------------------

template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec, std::size_t in_channels, const std::string& name) {
    switch (spec.kind) {
        case LayerKind::gc:
        case LayerKind::gtc: return std::make_unique<GatedConv<T>>(spec, in_channels, name);
        case LayerKind::cnn:
        case LayerKind::dense: return std::make_unique<Conv<T>>(spec, in_channels, name);
        case LayerKind::attention: return std::make_unique<MultiHeadAttention<T>>(spec, in_channels, name);
    }
    throw std::invalid_argument("make_layer: unknown kind");
}

template <typename T>
Sequential<T>::Sequential(const std::vector<LayerSpec>& specs, std::size_t in_channels, const std::string& prefix)
    : in_channels_(in_channels) {
    std::size_t ch = in_channels;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        layers_.push_back(make_layer<T>(specs[i], ch, prefix + "." + std::to_string(i)));
        ch = specs[i].out_channels;
    }
}

template <typename T>
std::size_t Sequential<T>::out_channels() const {
    return layers_.empty() ? in_channels_ : layers_.back()->spec().out_channels;
}

template <typename T>
Tensor3<T> Sequential<T>::forward(const Tensor3<T>& x, Trace<T>* trace) const {
    if (trace) {
        trace->caches.assign(layers_.size(), {});
        trace->outputs.assign(layers_.size(), {});
    }
    Tensor3<T> h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        h = layers_[i]->forward(h, trace ? &trace->caches[i] : nullptr);
        if (trace) trace->outputs[i] = h;
    }
    return h;
}

template <typename T>
Tensor3<T> Sequential<T>::backward(const Trace<T>& trace, const Tensor3<T>& grad_out, bool input_grad,
                                   const std::vector<Tensor3<T>>* extra_grads) {
    if (trace.caches.size() != layers_.size()) throw std::logic_error("Sequential::backward: trace mismatch");
    Tensor3<T> g = grad_out;
    for (std::size_t i = layers_.size(); i-- > 0;) {
        if (extra_grads && i < extra_grads->size() && !(*extra_grads)[i].empty()) add_inplace(g, (*extra_grads)[i]);
        g = layers_[i]->backward(trace.caches[i], g, i > 0 || input_grad);
    }
    return g;
}

template <typename T>
std::vector<Param<T>*> Sequential<T>::params() {
    std::vector<Param<T>*> out;
    for (auto& l : layers_)
        for (Param<T>* p : l->params()) out.push_back(p);
    return out;
}

template <typename T>
std::vector<const Param<T>*> Sequential<T>::params() const {
    std::vector<const Param<T>*> out;
    for (const auto& l : layers_)
        for (const Param<T>* p : static_cast<const Layer<T>&>(*l).params()) out.push_back(p);
    return out;
}

template <typename T>
void Sequential<T>::init(std::uint64_t seed) {
    for (std::size_t i = 0; i < layers_.size(); ++i)
        layers_[i]->init(seed ^ (0x9e3779b97f4a7c15ULL * (i + 1)));
}

template <typename T>
void Sequential<T>::refresh_spectral_norm(int power_iters) {
    for (auto& l : layers_) l->refresh_spectral_norm(power_iters);
}

template <typename T>
void Sequential<T>::zero_grad() {
    for (Param<T>* p : params()) p->zero_grad();
}

#define LOADPIN_INSTANTIATE(T)                                                                                  \
    template SpectralNormResult<T> spectral_normalize<T>(Param<T>&, int);                                       \
    template Tensor3<T> spectral_norm_backward<T>(const Param<T>&, const SpectralNormResult<T>&,                \
                                                  const Tensor3<T>&);                                           \
    template class GatedConv<T>;                                                                                \
    template class Conv<T>;                                                                                     \
    template class MultiHeadAttention<T>;                                                                       \
    template class Sequential<T>;                                                                               \
    template std::unique_ptr<Layer<T>> make_layer<T>(const LayerSpec&, std::size_t, const std::string&);

LOADPIN_INSTANTIATE(float)
LOADPIN_INSTANTIATE(double)

#undef LOADPIN_INSTANTIATE

}  // namespace loadpin::nn
