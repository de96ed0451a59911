#include "loadpin/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <random>

#include "loadpin/losses.hpp"

namespace loadpin {

void TrainConfig::validate() const {
    if (lambda_adv < 0 || lambda_feat < 0) throw std::invalid_argument("train config: lambda weights must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
    if (d_steps_per_g < 1) throw std::invalid_argument("train config: d_steps_per_g must be >= 1");
    if (lr_g < 0 || lr_d < 0) throw std::invalid_argument("train config: learning rates must be >= 0");
    if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) throw std::invalid_argument("train config: betas must lie in [0, 1)");
    if (eval_every < 1) throw std::invalid_argument("train config: eval_every must be >= 1");
    if (sn_iters < 0) throw std::invalid_argument("train config: sn_iters must be >= 0");
}

bool LossReport::all_finite() const {
    for (double v : {l_coarse, l_content2, l_adv, l_feat, l_refine, l_d})
        if (!std::isfinite(v)) return false;
    return true;
}

namespace {

nn::AdamConfig adam(const TrainConfig& c, double lr) { return {lr, c.beta1, c.beta2, 1e-8}; }

template <typename T>
struct Batch {
    Tensor3<T> z, y, mask;
    std::vector<IndexRange> win;
};

template <typename T>
Batch<T> make_batch(std::span<const Sample* const> samples, std::size_t margin) {
    Batch<T> b;
    b.z = pack_inputs<T>(samples);
    b.y = pack_truth<T>(samples);
    const std::size_t B = b.z.batch(), W = b.z.time();
    b.mask = Tensor3<T>(B, 1, W);
    for (std::size_t i = 0; i < B; ++i) {
        std::copy_n(b.z.row(i, 2), W, b.mask.row(i, 0));
        b.win.push_back(loss_window(samples[i]->event, margin, W));
    }
    return b;
}

/// Observed outside the mask, stage 2 inside.
template <typename T>
Tensor3<T> spliced(const Batch<T>& b, const Tensor3<T>& stage2) {
    Tensor3<T> c(b.z.batch(), 1, b.z.time());
    for (std::size_t i = 0; i < b.z.batch(); ++i) {
        const T* obs = b.z.row(i, 0);
        const T* gen = stage2.row(i, 0);
        const T* m = b.mask.row(i, 0);
        T* o = c.row(i, 0);
        for (std::size_t t = 0; t < b.z.time(); ++t) o[t] = obs[t] * (T{1} - m[t]) + gen[t] * m[t];
    }
    return c;
}

/// Stack [profile, mask] pairs: first `a`, then `b`, along the batch axis.
template <typename T>
Tensor3<T> disc_input(const Tensor3<T>& a, const Tensor3<T>& b, const Tensor3<T>& mask) {
    const std::size_t B = mask.batch(), W = mask.time();
    Tensor3<T> x(2 * B, 2, W);
    for (std::size_t i = 0; i < B; ++i) {
        std::copy_n(a.row(i, 0), W, x.row(i, 0));
        std::copy_n(mask.row(i, 0), W, x.row(i, 1));
        std::copy_n(b.row(i, 0), W, x.row(B + i, 0));
        std::copy_n(mask.row(i, 0), W, x.row(B + i, 1));
    }
    return x;
}

template <typename T>
Tensor3<T> batch_slice(const Tensor3<T>& t, std::size_t begin, std::size_t n) {
    Tensor3<T> out(n, t.channels(), t.time());
    std::copy_n(t.row(begin, 0), n * t.channels() * t.time(), out.data());
    return out;
}

void assert_finite(const LossReport& r, std::size_t iter) {
    if (r.all_finite()) return;
    throw TrainingDiverged("non-finite loss at iteration " + std::to_string(iter) + ": l_coarse=" +
                               std::to_string(r.l_coarse) + " l_content2=" + std::to_string(r.l_content2) +
                               " l_adv=" + std::to_string(r.l_adv) + " l_feat=" + std::to_string(r.l_feat) +
                               " l_d=" + std::to_string(r.l_d),
                           r);
}

/// Generator-side losses with D frozen. When `d1`/`d2` are given they
/// receive the gradients w.r.t. stage 1 and stage 2.
template <typename T>
void generator_losses(const Batch<T>& b, const GeneratorOutput<T>& out, Discriminator<T>& d, const TrainConfig& cfg,
                      LossReport& r, Tensor3<T>* d1, Tensor3<T>* d2) {
    const std::size_t B = b.z.batch(), W = b.z.time();
    const Tensor3<T> composite = spliced(b, out.stage2);
    nn::Trace<T> tr;
    const DiscOutput<T> o = d.forward(disc_input(composite, b.y, b.mask), d1 ? &tr : nullptr);
    const std::size_t half = o.scores.size() / 2;
    r.l_adv = adv_loss<T>({o.scores.data(), half});
    std::vector<Tensor3<T>> ff, rf;
    for (const auto& f : o.features) {
        ff.push_back(batch_slice(f, 0, B));
        rf.push_back(batch_slice(f, B, B));
    }
    r.l_feat = feat_loss(ff, rf);

    double c1 = 0, c2 = 0;
    for (std::size_t i = 0; i < B; ++i) {
        std::span<const T> truth(b.y.row(i, 0), W);
        c1 += content_loss<T>({out.stage1.row(i, 0), W}, truth, b.win[i]);
        c2 += content_loss<T>({out.stage2.row(i, 0), W}, truth, b.win[i]);
    }
    const double inv_b = 1.0 / static_cast<double>(B);
    r.l_coarse = c1 * inv_b;
    r.l_content2 = c2 * inv_b;
    r.l_refine = refine_loss(r.l_content2, r.l_adv, r.l_feat, cfg.lambda_adv, cfg.lambda_feat);
    if (!d1) return;

    // Real features are targets: only the fake half receives gradient.
    Tensor3<T> ds(o.scores.batch(), o.scores.channels(), o.scores.time());
    const T ga = static_cast<T>(-cfg.lambda_adv / static_cast<double>(half));
    for (std::size_t i = 0; i < half; ++i) ds[i] = ga;
    std::vector<Tensor3<T>> dfeat;
    for (std::size_t j = 0; j < ff.size(); ++j) {
        Tensor3<T> df(2 * B, ff[j].channels(), ff[j].time());
        const T k = static_cast<T>(2.0 * cfg.lambda_feat / static_cast<double>(ff[j].size()));
        for (std::size_t i = 0; i < ff[j].size(); ++i) df[i] = k * (ff[j][i] - rf[j][i]);
        dfeat.push_back(std::move(df));
    }
    const Tensor3<T> dx = d.backward(tr, ds, &dfeat, true);
    d.zero_grad();

    *d1 = Tensor3<T>(B, 1, W);
    *d2 = Tensor3<T>(B, 1, W);
    for (std::size_t i = 0; i < B; ++i) {
        std::span<const T> truth(b.y.row(i, 0), W);
        content_loss_grad<T>({out.stage1.row(i, 0), W}, truth, b.win[i], inv_b, {d1->row(i, 0), W});
        content_loss_grad<T>({out.stage2.row(i, 0), W}, truth, b.win[i], inv_b, {d2->row(i, 0), W});
        const T* m = b.mask.row(i, 0);
        const T* g = dx.row(i, 0);
        T* o2 = d2->row(i, 0);
        for (std::size_t t = 0; t < W; ++t) o2[t] += g[t] * m[t];
    }
}

}  // namespace

template <typename T>
BasicTrainer<T>::BasicTrainer(GeneratorConfig gen, DiscConfig disc, TrainConfig cfg, int resolution)
    : cfg_(cfg), margin_(cfg.margin_for(resolution)), g_(std::move(gen)), d_(std::move(disc)) {
    cfg_.validate();
    g_.init(cfg_.seed);
    d_.init(cfg_.seed ^ 0xd15c0000d15c0000ULL);
    g_opt_ = nn::Adam<T>(g_.params(), adam(cfg_, cfg_.lr_g));
    d_opt_ = nn::Adam<T>(d_.params(), adam(cfg_, cfg_.lr_d));
}

template <typename T>
LossReport BasicTrainer<T>::accumulate_gradients(std::span<const Sample* const> samples) {
    const Batch<T> b = make_batch<T>(samples, margin_);
    GeneratorTrace<T> gt;
    const GeneratorOutput<T> out = g_.forward(b.z, &gt);
    const Tensor3<T> composite = spliced(b, out.stage2);

    LossReport r;
    // Discriminator: real profiles first, spliced fakes second.
    const Tensor3<T> xd = disc_input(b.y, composite, b.mask);
    for (std::size_t k = 0; k < cfg_.d_steps_per_g; ++k) {
        d_.refresh_spectral_norm(cfg_.sn_iters);
        nn::Trace<T> tr;
        const DiscOutput<T> o = d_.forward(xd, &tr);
        const std::size_t half = o.scores.size() / 2;
        std::span<const T> real(o.scores.data(), half), fake(o.scores.data() + half, half);
        r.l_d = disc_loss(real, fake);
        Tensor3<T> ds(o.scores.batch(), o.scores.channels(), o.scores.time());
        const T inv = T{1} / static_cast<T>(half);
        for (std::size_t i = 0; i < half; ++i) {
            ds[i] = real[i] < T{1} ? -inv : T{0};
            ds[half + i] = fake[i] > T{-1} ? inv : T{0};
        }
        d_.zero_grad();
        d_.backward(tr, ds, nullptr, false);
        d_opt_.step(++d_iter_);
    }

    // Generator: D frozen, u vectors left alone.
    d_.refresh_spectral_norm(0);
    Tensor3<T> d1, d2;
    generator_losses(b, out, d_, cfg_, r, &d1, &d2);
    assert_finite(r, iter_ + 1);
    g_.zero_grad();
    g_.backward(gt, d1, d2);
    return r;
}

template <typename T>
LossReport BasicTrainer<T>::step(std::span<const Sample* const> samples) {
    const LossReport r = accumulate_gradients(samples);
    g_opt_.step(++iter_);
    return r;
}

template <typename T>
double BasicTrainer<T>::generator_objective(std::span<const Sample* const> samples) const {
    const Batch<T> b = make_batch<T>(samples, margin_);
    const GeneratorOutput<T> out = g_.forward(b.z);
    LossReport r;
    generator_losses<T>(b, out, const_cast<Discriminator<T>&>(d_), cfg_, r, nullptr, nullptr);
    return r.l_coarse + r.l_refine;
}

template <typename T>
double BasicTrainer<T>::validation_loss(std::span<const Sample> samples) const {
    if (samples.empty()) throw std::invalid_argument("validation_loss: no samples");
    double total = 0;
    const std::size_t chunk = 64;
    for (std::size_t b0 = 0; b0 < samples.size(); b0 += chunk) {
        const std::size_t n = std::min(chunk, samples.size() - b0);
        std::vector<const Sample*> ptrs;
        for (std::size_t i = 0; i < n; ++i) ptrs.push_back(&samples[b0 + i]);
        const auto z = pack_inputs<T>(ptrs);
        const auto y = pack_truth<T>(ptrs);
        const auto out = g_.forward(z);
        for (std::size_t i = 0; i < n; ++i)
            total += content_loss<T>({out.stage2.row(i, 0), z.time()}, {y.row(i, 0), z.time()},
                                     loss_window(ptrs[i]->event, margin_, z.time()));
    }
    return total / static_cast<double>(samples.size());
}

template class BasicTrainer<float>;
template class BasicTrainer<double>;

FitResult fit(const TrainConfig& cfg, const GeneratorConfig& gen_in, const DiscConfig& disc, const SampleSet& set,
              const FitProgress& progress) {
    if (set.train.empty()) throw std::invalid_argument("fit: training split is empty");
    GeneratorConfig gen = gen_in;
    gen.window = set.window();
    Trainer tr(gen, disc, cfg, set.resolution);
    FitResult res;
    auto snapshot = [&] {
        return Checkpoint::capture(tr.generator(), tr.discriminator(), cfg, set.stats, set.resolution, tr.iteration());
    };
    res.best = snapshot();
    res.best_val_loss = std::numeric_limits<double>::quiet_NaN();
    const bool have_val = !set.validation.empty();
    if (!have_val && cfg.max_iters > 0)
        std::clog << "warning: validation split is empty; keeping the final-iteration checkpoint\n";
    std::span<const Sample> val(set.validation.data(), std::min(set.validation.size(), cfg.val_max));

    std::mt19937_64 rng(cfg.seed ^ 0xba7c4ba7c4ULL);
    std::vector<std::size_t> order(set.train.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t pos = order.size();
    const std::size_t bs = std::min(cfg.batch_size, set.train.size());
    std::vector<const Sample*> batch(bs);
    for (std::size_t it = 1; it <= cfg.max_iters; ++it) {
        for (std::size_t k = 0; k < bs; ++k) {
            if (pos == order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                pos = 0;
            }
            batch[k] = &set.train[order[pos++]];
        }
        const LossReport r = tr.step(batch);
        res.history.push_back(r);
        if (progress) progress(it, r);
        if (have_val && (it % cfg.eval_every == 0 || it == cfg.max_iters)) {
            const double v = tr.validation_loss(val);
            res.validation.emplace_back(it, v);
            if (!(v >= res.best_val_loss)) {  // also true while best is NaN
                res.best_val_loss = v;
                res.best = snapshot();
                res.best_iteration = it;
            }
        }
    }
    if (!have_val) {
        res.best = snapshot();
        res.best_iteration = cfg.max_iters;
    }
    return res;
}

}  // namespace loadpin
