#include <cmath>
#include <numeric>

#include "doctest.h"
#include "loadpin/kernels.hpp"
#include "loadpin/nn.hpp"
#include "loadpin/optim.hpp"
#include "oracles.hpp"

using loadpin::Tensor3;
using namespace loadpin::nn;

namespace {

LayerSpec spec(LayerKind kind, std::size_t ks, std::size_t out, std::size_t st, Activation act = Activation::leaky_relu,
               bool sn = false, std::size_t heads = 0) {
    LayerSpec s;
    s.kind = kind;
    s.kernel_size = ks;
    s.out_channels = out;
    s.stride = st;
    s.activation = act;
    s.spectral_norm = sn;
    s.heads = heads;
    return s;
}

// Direct evaluation of multi-head self-attention from its definition, with a
// (channels x time) input and square projection matrices.
std::vector<double> attention_oracle(const std::vector<double>& x, std::size_t C, std::size_t T, std::size_t heads,
                                     const std::vector<double>& wq, const std::vector<double>& wk,
                                     const std::vector<double>& wv, const std::vector<double>& wo, double alpha) {
    auto proj = [&](const std::vector<double>& w) {
        std::vector<double> out(C * T, 0.0);
        for (std::size_t o = 0; o < C; ++o)
            for (std::size_t i = 0; i < C; ++i)
                for (std::size_t t = 0; t < T; ++t) out[o * T + t] += w[o * C + i] * x[i * T + t];
        return out;
    };
    const auto q = proj(wq), k = proj(wk), v = proj(wv);
    const std::size_t d = C / heads;
    std::vector<double> concat(C * T, 0.0);
    for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t t1 = 0; t1 < T; ++t1) {
            std::vector<double> s(T);
            double z = 0;
            for (std::size_t t2 = 0; t2 < T; ++t2) {
                double dotp = 0;
                for (std::size_t f = h * d; f < (h + 1) * d; ++f) dotp += q[f * T + t1] * k[f * T + t2];
                s[t2] = std::exp(dotp / alpha);
                z += s[t2];
            }
            for (std::size_t f = h * d; f < (h + 1) * d; ++f)
                for (std::size_t t2 = 0; t2 < T; ++t2) concat[f * T + t1] += s[t2] / z * v[f * T + t2];
        }
    std::vector<double> y(C * T, 0.0);
    for (std::size_t o = 0; o < C; ++o)
        for (std::size_t i = 0; i < C; ++i)
            for (std::size_t t = 0; t < T; ++t) y[o * T + t] += wo[o * C + i] * concat[i * T + t];
    for (std::size_t i = 0; i < C * T; ++i) y[i] += x[i];
    return y;
}

std::vector<double> values_of(const Param<double>& p) { return {p.value.values().begin(), p.value.values().end()}; }

}  // namespace

TEST_CASE("gated_conv evaluates phi(conv W) * sigmoid(conv U)") {
    SUBCASE("scalar identity-activation case") {
        GatedConv<double> g(spec(LayerKind::gc, 1, 1, 1, Activation::identity), 1, "g");
        auto ps = g.params();
        ps[0]->value[0] = 1.0;  // W
        ps[2]->value[0] = 1.0;  // U
        Tensor3<double> x(1, 1, 3);
        x[0] = 1, x[1] = 2, x[2] = 3;
        auto y = g.forward(x, nullptr);
        CHECK(y[0] == doctest::Approx(0.7311).epsilon(1e-4));
        CHECK(y[1] == doctest::Approx(1.7616).epsilon(1e-4));
        CHECK(y[2] == doctest::Approx(2.8577).epsilon(1e-4));
    }
    SUBCASE("zero parameters give zero output") {
        for (auto kind : {LayerKind::gc, LayerKind::gtc}) {
            GatedConv<double> g(spec(kind, 3, 4, 2), 3, "g");
            auto y = g.forward(oracle::random_tensor<double>(2, 3, 8, 1), nullptr);
            for (double v : y.values()) CHECK(v == 0.0);
        }
    }
    SUBCASE("saturated gate reduces to phi(conv)") {
        for (auto kind : {LayerKind::gc, LayerKind::gtc}) {
            GatedConv<double> g(spec(kind, 3, 4, 2), 3, "g");
            g.init(11);
            auto ps = g.params();
            ps[2]->value.fill(0.0);
            ps[3]->value.fill(100.0);
            Tensor3<double> x = oracle::random_tensor<double>(2, 3, 8, 2);
            auto y = g.forward(x, nullptr);
            auto f = kind == LayerKind::gc ? loadpin::kernels::conv1d<double>(x, ps[0]->value, ps[1]->value.values(), 2)
                                           : loadpin::kernels::tconv1d<double>(x, ps[0]->value, ps[1]->value.values(), 2);
            REQUIRE(f.same_shape(y));
            for (std::size_t i = 0; i < y.size(); ++i) {
                const double phi = f[i] > 0 ? f[i] : 0.2 * f[i];
                CHECK(std::abs(y[i] - phi) < 1e-6);
            }
            CHECK(y.time() == (kind == LayerKind::gc ? 4u : 16u));
        }
    }
}

TEST_CASE("multi-head attention") {
    SUBCASE("matches direct evaluation on random inputs") {
        const std::size_t C = 8, T = 5, H = 4;
        MultiHeadAttention<double> a(spec(LayerKind::attention, 1, C, 1, Activation::identity, false, H), C, "a");
        a.init(3);
        auto x = oracle::random_tensor<double>(1, C, T, 4);
        auto ps = a.params();
        auto expect = attention_oracle({x.values().begin(), x.values().end()}, C, T, H, values_of(*ps[0]),
                                       values_of(*ps[1]), values_of(*ps[2]), values_of(*ps[3]), std::sqrt(2.0));
        auto y = a.forward(x, nullptr);
        for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == doctest::Approx(expect[i]).epsilon(1e-12));
    }
    SUBCASE("two-step toy with identity projections and unit scale") {
        // Two heads of width one, so the scale sqrt(width) is 1.
        MultiHeadAttention<double> a(spec(LayerKind::attention, 1, 2, 1, Activation::identity, false, 2), 2, "a");
        for (auto* p : a.params()) {
            p->value.fill(0.0);
            p->value(0, 0, 0) = p->value(1, 1, 0) = 1.0;
        }
        CHECK(a.scale() == 1.0);
        Tensor3<double> x(1, 2, 2);
        x(0, 0, 0) = 1, x(0, 1, 1) = 1;
        auto y = a.forward(x, nullptr);
        const double e = std::exp(1.0);
        CHECK(y(0, 0, 0) == doctest::Approx(1 + e / (e + 1)));
        CHECK(y(0, 0, 1) == doctest::Approx(0.5));
        CHECK(y(0, 1, 0) == doctest::Approx(0.5));
        CHECK(y(0, 1, 1) == doctest::Approx(1 + e / (e + 1)));
    }
    SUBCASE("time length 1: output is Wo * Wv * x plus residual") {
        const std::size_t C = 4;
        MultiHeadAttention<double> a(spec(LayerKind::attention, 1, C, 1, Activation::identity, false, 2), C, "a");
        a.init(5);
        auto x = oracle::random_tensor<double>(1, C, 1, 6);
        auto ps = a.params();
        auto y = a.forward(x, nullptr);
        for (std::size_t o = 0; o < C; ++o) {
            double s = x[o];
            for (std::size_t i = 0; i < C; ++i)
                for (std::size_t j = 0; j < C; ++j) s += ps[3]->value(o, i, 0) * ps[2]->value(i, j, 0) * x[j];
            CHECK(y[o] == doctest::Approx(s));
        }
    }
    SUBCASE("zero query weights give uniform attention") {
        const std::size_t C = 4, T = 6;
        MultiHeadAttention<double> a(spec(LayerKind::attention, 1, C, 1, Activation::identity, false, 2), C, "a");
        a.init(8);
        a.params()[0]->value.fill(0.0);
        auto x = oracle::random_tensor<double>(1, C, T, 9);
        Cache<double> cache;
        a.forward(x, &cache);
        const auto& p = MultiHeadAttention<double>::probabilities(cache);
        for (double v : p.values()) CHECK(v == doctest::Approx(1.0 / T));
        // pre-residual output at every position is the time-mean of the projected values
        const auto& o = cache.saved.at(5);
        const auto& v = cache.saved.at(3);
        for (std::size_t c = 0; c < C; ++c) {
            double mean = 0;
            for (std::size_t t = 0; t < T; ++t) mean += v(0, c, t) / T;
            for (std::size_t t = 0; t < T; ++t) CHECK(o(0, c, t) == doctest::Approx(mean));
        }
    }
    SUBCASE("softmax rows sum to one") {
        MultiHeadAttention<float> a(spec(LayerKind::attention, 1, 16, 1, Activation::identity, false, 4), 16, "a");
        a.init(1);
        Cache<float> cache;
        a.forward(oracle::random_tensor<float>(3, 16, 12, 2, 3.0), &cache);
        const auto& p = MultiHeadAttention<float>::probabilities(cache);
        for (std::size_t r = 0; r < p.batch(); ++r)
            for (std::size_t t = 0; t < p.channels(); ++t) {
                double s = 0;
                for (std::size_t u = 0; u < p.time(); ++u) s += p(r, t, u);
                CHECK(std::abs(s - 1.0) < 1e-6);
            }
    }
    SUBCASE("width not divisible by heads is rejected") {
        CHECK_THROWS_AS(MultiHeadAttention<double>(spec(LayerKind::attention, 1, 6, 1, Activation::identity, false, 4), 6, "a"),
                        std::invalid_argument);
    }
}

TEST_CASE("gradient contract for every layer kind (finite differences, 64-bit)") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        CAPTURE(seed);
        {
            GatedConv<double> l(spec(LayerKind::gc, 4, 5, 2), 3, "gc");
            CHECK(oracle::layer_gradient_error(l, oracle::random_tensor<double>(2, 3, 10, seed), seed) < 1e-3);
        }
        {
            GatedConv<double> l(spec(LayerKind::gtc, 3, 4, 2), 5, "gtc");
            CHECK(oracle::layer_gradient_error(l, oracle::random_tensor<double>(2, 5, 6, seed), seed) < 1e-3);
        }
        {
            MultiHeadAttention<double> l(spec(LayerKind::attention, 1, 8, 1, Activation::identity, false, 4), 8, "at");
            CHECK(oracle::layer_gradient_error(l, oracle::random_tensor<double>(2, 8, 7, seed), seed) < 1e-3);
        }
        {
            Conv<double> l(spec(LayerKind::cnn, 4, 6, 2, Activation::leaky_relu, true), 2, "sn");
            CHECK(oracle::layer_gradient_error(l, oracle::random_tensor<double>(2, 2, 16, seed), seed) < 1e-3);
        }
        {
            Conv<double> l(spec(LayerKind::dense, 1, 5, 1, Activation::leaky_relu), 3, "dense");
            CHECK(oracle::layer_gradient_error(l, oracle::random_tensor<double>(2, 3, 4, seed), seed) < 1e-3);
        }
    }
}

TEST_CASE("spectral normalization") {
    SUBCASE("diagonal matrix") {
        Param<double> w("w", 2, 2, 1);
        w.value(0, 0, 0) = 3;
        w.value(1, 1, 0) = 1;
        auto r = spectral_normalize(w, 50);
        CHECK(r.sigma == doctest::Approx(3.0));
        CHECK(r.normalized(0, 0, 0) == doctest::Approx(1.0));
        CHECK(r.normalized(1, 1, 0) == doctest::Approx(1.0 / 3.0));
        CHECK(std::abs(r.normalized(0, 1, 0)) < 1e-12);
    }
    SUBCASE("random 3x3 against a Jacobi singular value oracle") {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            Param<double> w("w", 3, 3, 1);
            w.value = oracle::random_tensor<double>(3, 3, 1, seed);
            const double truth = oracle::largest_singular_value(w.value);
            auto r = spectral_normalize(w, 50);
            CHECK(std::abs(r.sigma - truth) < 1e-3);
            CHECK(std::abs(oracle::largest_singular_value(r.normalized) - 1.0) < 1e-3);
        }
    }
    SUBCASE("unit spectral norm is a fixed point") {
        Param<double> w("w", 2, 2, 1);
        const double c = std::cos(0.3), s = std::sin(0.3);
        w.value(0, 0, 0) = c, w.value(0, 1, 0) = -0.5 * s, w.value(1, 0, 0) = s, w.value(1, 1, 0) = 0.5 * c;
        auto r = spectral_normalize(w, 30);
        for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(r.normalized[i] - w.value[i]) < 1e-3);
    }
    SUBCASE("zero matrix stays finite") {
        Param<double> w("w", 3, 2, 2);
        auto r = spectral_normalize(w, 5);
        CHECK(std::isfinite(r.sigma));
        CHECK(r.normalized.all_finite());
        for (double u : w.sn_u) CHECK(std::isfinite(u));
    }
}

TEST_CASE("adam_step") {
    Param<double> p("p", 1, 1, 3);
    p.value[0] = 1, p.value[1] = -2, p.value[2] = 0.5;
    SUBCASE("zero gradient leaves parameters unchanged") {
        Adam<double> opt({&p}, {1e-2, 0.5, 0.9, 1e-8});
        auto before = p.value;
        for (std::size_t t = 1; t <= 5; ++t) opt.step(t);
        CHECK(p.value == before);
    }
    SUBCASE("first step from zero moments is lr*g/(|g|+eps)") {
        const double lr = 1e-3, eps = 1e-8;
        Adam<double> opt({&p}, {lr, 0.5, 0.9, eps});
        p.grad[0] = 0.3, p.grad[1] = -4.0, p.grad[2] = 1e-9;
        auto before = p.value;
        opt.step(1);
        for (std::size_t i = 0; i < 3; ++i) {
            const double g = p.grad[i];
            CHECK(before[i] - p.value[i] == doctest::Approx(lr * g / (std::abs(g) + eps)).epsilon(1e-9));
        }
    }
    SUBCASE("constant gradient: step magnitude approaches lr") {
        const double lr = 1e-3;
        Adam<double> opt({&p}, {lr, 0.5, 0.9, 1e-8});
        p.grad.fill(0.7);
        double last = 0;
        for (std::size_t t = 1; t <= 200; ++t) {
            const double before = p.value[0];
            opt.step(t);
            last = before - p.value[0];
        }
        CHECK(last == doctest::Approx(lr).epsilon(1e-6));
    }
    SUBCASE("t = 0 is rejected") {
        Adam<double> opt({&p}, {});
        CHECK_THROWS_AS(opt.step(0), std::invalid_argument);
    }
}

TEST_CASE("init_params") {
    Conv<double> a(spec(LayerKind::dense, 1, 100, 1), 100, "d");
    Conv<double> b(spec(LayerKind::dense, 1, 100, 1), 100, "d");
    init_params<double>(a, 42);
    init_params<double>(b, 42);
    CHECK(a.params()[0]->value == b.params()[0]->value);
    const auto& w = a.params()[0]->value;
    double mean = 0;
    for (double v : w.values()) {
        CHECK(std::abs(v) <= 0.1);
        mean += v;
    }
    REQUIRE(w.size() == 10000);
    mean /= static_cast<double>(w.size());
    const double se = 0.1 / std::sqrt(3.0 * 10000);
    CHECK(std::abs(mean) < 3 * se);
    for (double v : a.params()[1]->value.values()) CHECK(v == 0.0);

    GatedConv<double> g(spec(LayerKind::gc, 3, 4, 1), 2, "g");
    g.init(1);
    for (double v : g.params()[3]->value.values()) CHECK(v == 0.0);  // gate bias c
}
