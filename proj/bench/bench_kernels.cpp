// Serial reference kernels against the OpenMP/packed versions, at the
// shapes the generator actually runs (batch 16, 96-step window).
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "loadpin/kernels.hpp"

namespace k = loadpin::kernels;
using loadpin::Tensor3;

namespace {

Tensor3<float> random(std::size_t b, std::size_t c, std::size_t t, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<float> d(-1, 1);
    Tensor3<float> x(b, c, t);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = d(rng);
    return x;
}

// args: in channels, out channels, kernel, stride, time
template <bool Reference>
void conv_forward(benchmark::State& st) {
    const auto cin = static_cast<std::size_t>(st.range(0)), cout = static_cast<std::size_t>(st.range(1));
    const auto K = static_cast<std::size_t>(st.range(2)), s = static_cast<std::size_t>(st.range(3));
    const auto T = static_cast<std::size_t>(st.range(4));
    auto x = random(16, cin, T, 1);
    auto w = random(cout, cin, K, 2);
    std::vector<float> b(cout, 0.1f);
    for (auto _ : st) {
        auto y = Reference ? k::reference::conv1d<float>(x, w, b, s) : k::conv1d<float>(x, w, b, s);
        benchmark::DoNotOptimize(y.data());
    }
    st.SetItemsProcessed(st.iterations() * static_cast<long>(16 * cout * cin * K * (T / s)));
}

template <bool Reference>
void conv_backward(benchmark::State& st) {
    const auto cin = static_cast<std::size_t>(st.range(0)), cout = static_cast<std::size_t>(st.range(1));
    const auto K = static_cast<std::size_t>(st.range(2)), s = static_cast<std::size_t>(st.range(3));
    const auto T = static_cast<std::size_t>(st.range(4));
    auto x = random(16, cin, T, 1);
    auto w = random(cout, cin, K, 2);
    auto dy = random(16, cout, (T + s - 1) / s, 3);
    for (auto _ : st) {
        Tensor3<float> dx, dw(cout, cin, K);
        std::vector<float> db(cout);
        if (Reference)
            k::reference::conv1d_backward<float>(x, w, s, dy, &dx, &dw, db);
        else
            k::conv1d_backward<float>(x, w, s, dy, &dx, &dw, db);
        benchmark::DoNotOptimize(dx.data());
    }
}

template <bool Reference>
void tconv_forward(benchmark::State& st) {
    const auto cin = static_cast<std::size_t>(st.range(0)), cout = static_cast<std::size_t>(st.range(1));
    const auto T = static_cast<std::size_t>(st.range(2));
    auto x = random(16, cin, T, 1);
    auto w = random(cin, cout, 3, 2);
    std::vector<float> b(cout, 0.1f);
    for (auto _ : st) {
        auto y = Reference ? k::reference::tconv1d<float>(x, w, b, 2) : k::tconv1d<float>(x, w, b, 2);
        benchmark::DoNotOptimize(y.data());
    }
}

template <bool Reference>
void gemm(benchmark::State& st) {
    const auto n = static_cast<std::size_t>(st.range(0));
    auto a = random(1, n, n, 1), b = random(1, n, n, 2);
    std::vector<float> c(n * n);
    for (auto _ : st) {
        if (Reference)
            k::reference::gemm(k::Trans::no, k::Trans::no, n, n, n, a.data(), n, b.data(), n, c.data(), n, false);
        else
            k::gemm(k::Trans::no, k::Trans::no, n, n, n, a.data(), n, b.data(), n, c.data(), n, false);
        benchmark::DoNotOptimize(c.data());
    }
    st.SetItemsProcessed(st.iterations() * static_cast<long>(2 * n * n * n));
}

void conv_shapes(benchmark::internal::Benchmark* b) {
    b->Args({3, 64, 5, 1, 96})->Args({64, 128, 4, 2, 96})->Args({128, 128, 3, 1, 48})->Args({256, 256, 3, 1, 24});
}

}  // namespace

BENCHMARK(conv_forward<true>)->Name("conv1d/reference")->Apply(conv_shapes);
BENCHMARK(conv_forward<false>)->Name("conv1d/parallel")->Apply(conv_shapes);
BENCHMARK(conv_backward<true>)->Name("conv1d_backward/reference")->Apply(conv_shapes);
BENCHMARK(conv_backward<false>)->Name("conv1d_backward/parallel")->Apply(conv_shapes);
BENCHMARK(tconv_forward<true>)->Name("tconv1d/reference")->Args({256, 128, 24})->Args({128, 64, 48});
BENCHMARK(tconv_forward<false>)->Name("tconv1d/parallel")->Args({256, 128, 24})->Args({128, 64, 48});
BENCHMARK(gemm<true>)->Name("gemm/reference")->Arg(64)->Arg(256);
BENCHMARK(gemm<false>)->Name("gemm/parallel")->Arg(64)->Arg(256);

BENCHMARK_MAIN();
