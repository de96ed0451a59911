#include "loadpin/kernels.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>
#include <string>

namespace loadpin::kernels {

namespace {

template <typename T>
struct Simd {
    typedef T vec __attribute__((vector_size(64)));
    static constexpr std::size_t lanes = 64 / sizeof(T);
};

constexpr std::size_t kMr = 8;
constexpr std::size_t kKc = 256;

template <typename T>
constexpr std::size_t nr() {
    return 2 * Simd<T>::lanes;
}

// Packs op(A)[0:m, k0:k0+kc] into kMr-row strips laid out [strip][k][r].
template <typename T>
void pack_a(Trans ta, const T* a, std::size_t lda, std::size_t m, std::size_t k0, std::size_t kc, T* out) {
    const std::size_t strips = (m + kMr - 1) / kMr;
#pragma omp parallel for schedule(static)
    for (std::size_t s = 0; s < strips; ++s) {
        T* dst = out + s * kc * kMr;
        for (std::size_t kk = 0; kk < kc; ++kk) {
            for (std::size_t r = 0; r < kMr; ++r) {
                std::size_t i = s * kMr + r;
                T v{0};
                if (i < m) v = ta == Trans::no ? a[i * lda + k0 + kk] : a[(k0 + kk) * lda + i];
                dst[kk * kMr + r] = v;
            }
        }
    }
}

// Packs op(B)[k0:k0+kc, 0:n] into NR-column strips laid out [strip][k][j].
template <typename T>
void pack_b(Trans tb, const T* b, std::size_t ldb, std::size_t n, std::size_t k0, std::size_t kc, T* out) {
    constexpr std::size_t NR = nr<T>();
    const std::size_t strips = (n + NR - 1) / NR;
#pragma omp parallel for schedule(static)
    for (std::size_t s = 0; s < strips; ++s) {
        T* dst = out + s * kc * NR;
        const std::size_t j0 = s * NR;
        const std::size_t width = std::min(NR, n - j0);
        for (std::size_t kk = 0; kk < kc; ++kk) {
            T* drow = dst + kk * NR;
            if (tb == Trans::no) {
                const T* src = b + (k0 + kk) * ldb + j0;
                std::memcpy(drow, src, width * sizeof(T));
            } else {
                for (std::size_t j = 0; j < width; ++j) drow[j] = b[(j0 + j) * ldb + k0 + kk];
            }
            for (std::size_t j = width; j < NR; ++j) drow[j] = T{0};
        }
    }
}

template <typename T>
void micro_kernel(std::size_t kc, const T* __restrict ap, const T* __restrict bp, T* __restrict tile) {
    using V = typename Simd<T>::vec;
    constexpr std::size_t L = Simd<T>::lanes;
    V acc0[kMr] = {};
    V acc1[kMr] = {};
    for (std::size_t kk = 0; kk < kc; ++kk) {
        V b0, b1;
        std::memcpy(&b0, bp + kk * 2 * L, sizeof(V));
        std::memcpy(&b1, bp + kk * 2 * L + L, sizeof(V));
        const T* arow = ap + kk * kMr;
        for (std::size_t r = 0; r < kMr; ++r) {
            const T av = arow[r];
            acc0[r] += av * b0;
            acc1[r] += av * b1;
        }
    }
    for (std::size_t r = 0; r < kMr; ++r) {
        std::memcpy(tile + r * 2 * L, &acc0[r], sizeof(V));
        std::memcpy(tile + r * 2 * L + L, &acc1[r], sizeof(V));
    }
}

template <typename T>
void require_weight(const Tensor3<T>& x, const Tensor3<T>& w, bool transpose, const char* what) {
    const std::size_t expect = transpose ? w.batch() : w.channels();
    if (x.channels() != expect)
        throw std::invalid_argument(std::string(what) + ": input has " + std::to_string(x.channels()) +
                                    " channels, weight expects " + std::to_string(expect));
    if (w.time() == 0) throw std::invalid_argument(std::string(what) + ": empty kernel");
}

template <typename T>
void check_stride(std::size_t stride, const char* what) {
    if (stride == 0) throw std::invalid_argument(std::string(what) + ": stride must be >= 1");
}

// col[(c*K + k), (b*To + to)] = x[b, c, to*s + k - pad] (zero outside).
template <typename T>
std::vector<T> im2col(const Tensor3<T>& x, const ConvGeometry& g) {
    const std::size_t B = x.batch(), C = x.channels(), K = g.kernel, To = g.out_time;
    const std::size_t cols = B * To;
    std::vector<T> col(C * K * cols);
#pragma omp parallel for schedule(static)
    for (std::size_t r = 0; r < C * K; ++r) {
        const std::size_t c = r / K, k = r % K;
        T* dst = col.data() + r * cols;
        for (std::size_t b = 0; b < B; ++b) {
            const T* src = x.row(b, c);
            for (std::size_t to = 0; to < To; ++to) {
                const std::ptrdiff_t ti = static_cast<std::ptrdiff_t>(to * g.stride + k) -
                                          static_cast<std::ptrdiff_t>(g.pad_left);
                dst[b * To + to] = (ti >= 0 && ti < static_cast<std::ptrdiff_t>(g.in_time)) ? src[ti] : T{0};
            }
        }
    }
    return col;
}

// Adjoint of im2col: scatters columns back onto a (B, C, in_time) tensor.
template <typename T>
Tensor3<T> col2im(const std::vector<T>& col, const ConvGeometry& g, std::size_t B, std::size_t C) {
    const std::size_t K = g.kernel, To = g.out_time, cols = B * To;
    Tensor3<T> out(B, C, g.in_time);
#pragma omp parallel for schedule(static)
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t k = 0; k < K; ++k) {
            const T* src = col.data() + (c * K + k) * cols;
            for (std::size_t b = 0; b < B; ++b) {
                T* dst = out.row(b, c);
                for (std::size_t to = 0; to < To; ++to) {
                    const std::ptrdiff_t ti = static_cast<std::ptrdiff_t>(to * g.stride + k) -
                                              static_cast<std::ptrdiff_t>(g.pad_left);
                    if (ti >= 0 && ti < static_cast<std::ptrdiff_t>(g.in_time)) dst[ti] += src[b * To + to];
                }
            }
        }
    }
    return out;
}

// (B, C, T) -> (C, B*T) matrix and back.
template <typename T>
std::vector<T> to_channel_major(const Tensor3<T>& x) {
    const std::size_t B = x.batch(), C = x.channels(), Tt = x.time();
    std::vector<T> m(C * B * Tt);
#pragma omp parallel for schedule(static)
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t b = 0; b < B; ++b) std::memcpy(m.data() + (c * B + b) * Tt, x.row(b, c), Tt * sizeof(T));
    return m;
}

template <typename T>
Tensor3<T> from_channel_major(const std::vector<T>& m, std::size_t B, std::size_t C, std::size_t Tt,
                              std::span<const T> bias) {
    Tensor3<T> y(B, C, Tt);
#pragma omp parallel for schedule(static)
    for (std::size_t c = 0; c < C; ++c) {
        const T bc = bias.empty() ? T{0} : bias[c];
        for (std::size_t b = 0; b < B; ++b) {
            const T* src = m.data() + (c * B + b) * Tt;
            T* dst = y.row(b, c);
            for (std::size_t t = 0; t < Tt; ++t) dst[t] = src[t] + bc;
        }
    }
    return y;
}

template <typename T>
void accumulate_bias_grad(const Tensor3<T>& dy, std::span<T> db) {
    if (db.empty()) return;
    if (db.size() != dy.channels()) throw std::invalid_argument("bias gradient size mismatch");
    for (std::size_t c = 0; c < dy.channels(); ++c) {
        T s{0};
        for (std::size_t b = 0; b < dy.batch(); ++b) {
            const T* r = dy.row(b, c);
            for (std::size_t t = 0; t < dy.time(); ++t) s += r[t];
        }
        db[c] += s;
    }
}

}  // namespace

ConvGeometry conv_geometry(std::size_t in_time, std::size_t kernel, std::size_t stride) {
    if (stride == 0 || kernel == 0) throw std::invalid_argument("conv_geometry: kernel and stride must be >= 1");
    ConvGeometry g;
    g.in_time = in_time;
    g.kernel = kernel;
    g.stride = stride;
    g.out_time = (in_time + stride - 1) / stride;
    const std::ptrdiff_t need = static_cast<std::ptrdiff_t>((g.out_time - 1) * stride + kernel) -
                                static_cast<std::ptrdiff_t>(in_time);
    g.pad_left = need > 0 ? static_cast<std::size_t>(need) / 2 : 0;
    return g;
}

template <typename T>
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
          const T* b, std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
    constexpr std::size_t NR = nr<T>();
    if (m == 0 || n == 0) return;
    if (k == 0) {
        if (!accumulate)
            for (std::size_t i = 0; i < m; ++i) std::fill(c + i * ldc, c + i * ldc + n, T{0});
        return;
    }
    const std::size_t mstrips = (m + kMr - 1) / kMr;
    const std::size_t nstrips = (n + NR - 1) / NR;
    std::vector<T> apack(mstrips * kMr * std::min(k, kKc));
    std::vector<T> bpack(nstrips * NR * std::min(k, kKc));
    for (std::size_t k0 = 0; k0 < k; k0 += kKc) {
        const std::size_t kc = std::min(kKc, k - k0);
        pack_a(ta, a, lda, m, k0, kc, apack.data());
        pack_b(tb, b, ldb, n, k0, kc, bpack.data());
        const bool add = accumulate || k0 > 0;
#pragma omp parallel for collapse(2) schedule(static)
        for (std::size_t js = 0; js < nstrips; ++js) {
            for (std::size_t is = 0; is < mstrips; ++is) {
                alignas(64) T tile[kMr * NR];
                micro_kernel(kc, apack.data() + is * kc * kMr, bpack.data() + js * kc * NR, tile);
                const std::size_t i0 = is * kMr, j0 = js * NR;
                const std::size_t rows = std::min(kMr, m - i0), width = std::min(NR, n - j0);
                for (std::size_t r = 0; r < rows; ++r) {
                    T* crow = c + (i0 + r) * ldc + j0;
                    const T* trow = tile + r * NR;
                    if (add)
                        for (std::size_t j = 0; j < width; ++j) crow[j] += trow[j];
                    else
                        for (std::size_t j = 0; j < width; ++j) crow[j] = trow[j];
                }
            }
        }
    }
}

template <typename T>
Tensor3<T> conv1d(const Tensor3<T>& x, const Tensor3<T>& w, std::span<const T> bias, std::size_t stride) {
    check_stride<T>(stride, "conv1d");
    require_weight(x, w, false, "conv1d");
    const std::size_t B = x.batch(), Cin = x.channels(), Cout = w.batch(), K = w.time();
    if (!bias.empty() && bias.size() != Cout) throw std::invalid_argument("conv1d: bias size mismatch");
    const ConvGeometry g = conv_geometry(x.time(), K, stride);
    const std::size_t cols = B * g.out_time;
    const std::vector<T> col = im2col(x, g);
    std::vector<T> y2(Cout * cols);
    gemm(Trans::no, Trans::no, Cout, cols, Cin * K, w.data(), Cin * K, col.data(), cols, y2.data(), cols, false);
    return from_channel_major(y2, B, Cout, g.out_time, bias);
}

template <typename T>
void conv1d_backward(const Tensor3<T>& x, const Tensor3<T>& w, std::size_t stride, const Tensor3<T>& dy,
                     Tensor3<T>* dx, Tensor3<T>* dw, std::span<T> db) {
    check_stride<T>(stride, "conv1d_backward");
    require_weight(x, w, false, "conv1d_backward");
    const std::size_t B = x.batch(), Cin = x.channels(), Cout = w.batch(), K = w.time();
    const ConvGeometry g = conv_geometry(x.time(), K, stride);
    if (dy.batch() != B || dy.channels() != Cout || dy.time() != g.out_time)
        throw std::invalid_argument("conv1d_backward: output gradient shape " + shape_string(dy.shape()));
    const std::size_t cols = B * g.out_time;
    const std::vector<T> dy2 = to_channel_major(dy);
    if (dw) {
        require_same_shape(*dw, w, "conv1d_backward dw");
        const std::vector<T> col = im2col(x, g);
        gemm(Trans::no, Trans::yes, Cout, Cin * K, cols, dy2.data(), cols, col.data(), cols, dw->data(), Cin * K,
             true);
    }
    accumulate_bias_grad(dy, db);
    if (dx) {
        std::vector<T> dcol(Cin * K * cols);
        gemm(Trans::yes, Trans::no, Cin * K, cols, Cout, w.data(), Cin * K, dy2.data(), cols, dcol.data(), cols,
             false);
        *dx = col2im(dcol, g, B, Cin);
    }
}

template <typename T>
Tensor3<T> tconv1d(const Tensor3<T>& x, const Tensor3<T>& w, std::span<const T> bias, std::size_t stride) {
    check_stride<T>(stride, "tconv1d");
    require_weight(x, w, true, "tconv1d");
    const std::size_t B = x.batch(), Cin = x.channels(), Cout = w.channels(), K = w.time();
    if (!bias.empty() && bias.size() != Cout) throw std::invalid_argument("tconv1d: bias size mismatch");
    const ConvGeometry g = conv_geometry(x.time() * stride, K, stride);
    const std::size_t cols = B * g.out_time;
    const std::vector<T> x2 = to_channel_major(x);
    std::vector<T> col(Cout * K * cols);
    gemm(Trans::yes, Trans::no, Cout * K, cols, Cin, w.data(), Cout * K, x2.data(), cols, col.data(), cols, false);
    Tensor3<T> y = col2im(col, g, B, Cout);
    if (!bias.empty())
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t c = 0; c < Cout; ++c) {
                T* r = y.row(b, c);
                for (std::size_t t = 0; t < y.time(); ++t) r[t] += bias[c];
            }
    return y;
}

template <typename T>
void tconv1d_backward(const Tensor3<T>& x, const Tensor3<T>& w, std::size_t stride, const Tensor3<T>& dy,
                      Tensor3<T>* dx, Tensor3<T>* dw, std::span<T> db) {
    check_stride<T>(stride, "tconv1d_backward");
    require_weight(x, w, true, "tconv1d_backward");
    const std::size_t B = x.batch(), Cin = x.channels(), Cout = w.channels(), K = w.time();
    const ConvGeometry g = conv_geometry(x.time() * stride, K, stride);
    if (dy.batch() != B || dy.channels() != Cout || dy.time() != g.in_time)
        throw std::invalid_argument("tconv1d_backward: output gradient shape " + shape_string(dy.shape()));
    const std::size_t cols = B * g.out_time;
    const std::vector<T> colg = im2col(dy, g);
    if (dw) {
        require_same_shape(*dw, w, "tconv1d_backward dw");
        const std::vector<T> x2 = to_channel_major(x);
        gemm(Trans::no, Trans::yes, Cin, Cout * K, cols, x2.data(), cols, colg.data(), cols, dw->data(), Cout * K,
             true);
    }
    accumulate_bias_grad(dy, db);
    if (dx) {
        std::vector<T> dx2(Cin * cols);
        gemm(Trans::no, Trans::no, Cin, cols, Cout * K, w.data(), Cout * K, colg.data(), cols, dx2.data(), cols,
             false);
        *dx = from_channel_major(dx2, B, Cin, x.time(), std::span<const T>{});
    }
}

namespace reference {

template <typename T>
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
          const T* b, std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            T s{0};
            for (std::size_t p = 0; p < k; ++p) {
                const T av = ta == Trans::no ? a[i * lda + p] : a[p * lda + i];
                const T bv = tb == Trans::no ? b[p * ldb + j] : b[j * ldb + p];
                s += av * bv;
            }
            c[i * ldc + j] = accumulate ? c[i * ldc + j] + s : s;
        }
}

template <typename T>
Tensor3<T> conv1d(const Tensor3<T>& x, const Tensor3<T>& w, std::span<const T> bias, std::size_t stride) {
    check_stride<T>(stride, "reference::conv1d");
    require_weight(x, w, false, "reference::conv1d");
    const ConvGeometry g = conv_geometry(x.time(), w.time(), stride);
    Tensor3<T> y(x.batch(), w.batch(), g.out_time);
    for (std::size_t b = 0; b < x.batch(); ++b)
        for (std::size_t co = 0; co < w.batch(); ++co)
            for (std::size_t to = 0; to < g.out_time; ++to) {
                T s = bias.empty() ? T{0} : bias[co];
                for (std::size_t ci = 0; ci < x.channels(); ++ci)
                    for (std::size_t k = 0; k < w.time(); ++k) {
                        const std::ptrdiff_t ti = static_cast<std::ptrdiff_t>(to * stride + k) -
                                                  static_cast<std::ptrdiff_t>(g.pad_left);
                        if (ti >= 0 && ti < static_cast<std::ptrdiff_t>(x.time())) s += w(co, ci, k) * x(b, ci, ti);
                    }
                y(b, co, to) = s;
            }
    return y;
}

template <typename T>
void conv1d_backward(const Tensor3<T>& x, const Tensor3<T>& w, std::size_t stride, const Tensor3<T>& dy,
                     Tensor3<T>* dx, Tensor3<T>* dw, std::span<T> db) {
    const ConvGeometry g = conv_geometry(x.time(), w.time(), stride);
    if (dx) *dx = Tensor3<T>(x.batch(), x.channels(), x.time());
    for (std::size_t b = 0; b < x.batch(); ++b)
        for (std::size_t co = 0; co < w.batch(); ++co)
            for (std::size_t to = 0; to < g.out_time; ++to) {
                const T d = dy(b, co, to);
                if (!db.empty()) db[co] += d;
                for (std::size_t ci = 0; ci < x.channels(); ++ci)
                    for (std::size_t k = 0; k < w.time(); ++k) {
                        const std::ptrdiff_t ti = static_cast<std::ptrdiff_t>(to * stride + k) -
                                                  static_cast<std::ptrdiff_t>(g.pad_left);
                        if (ti < 0 || ti >= static_cast<std::ptrdiff_t>(x.time())) continue;
                        if (dw) (*dw)(co, ci, k) += d * x(b, ci, ti);
                        if (dx) (*dx)(b, ci, ti) += d * w(co, ci, k);
                    }
            }
}

template <typename T>
Tensor3<T> tconv1d(const Tensor3<T>& x, const Tensor3<T>& w, std::span<const T> bias, std::size_t stride) {
    check_stride<T>(stride, "reference::tconv1d");
    require_weight(x, w, true, "reference::tconv1d");
    const std::size_t Tout = x.time() * stride;
    const ConvGeometry g = conv_geometry(Tout, w.time(), stride);
    Tensor3<T> y(x.batch(), w.channels(), Tout);
    for (std::size_t b = 0; b < x.batch(); ++b)
        for (std::size_t co = 0; co < w.channels(); ++co) {
            if (!bias.empty())
                for (std::size_t t = 0; t < Tout; ++t) y(b, co, t) = bias[co];
            for (std::size_t ci = 0; ci < x.channels(); ++ci)
                for (std::size_t t = 0; t < x.time(); ++t)
                    for (std::size_t k = 0; k < w.time(); ++k) {
                        const std::ptrdiff_t to = static_cast<std::ptrdiff_t>(t * stride + k) -
                                                  static_cast<std::ptrdiff_t>(g.pad_left);
                        if (to >= 0 && to < static_cast<std::ptrdiff_t>(Tout)) y(b, co, to) += w(ci, co, k) * x(b, ci, t);
                    }
        }
    return y;
}

}  // namespace reference

#define LOADPIN_INSTANTIATE(T)                                                                                    \
    template void gemm<T>(Trans, Trans, std::size_t, std::size_t, std::size_t, const T*, std::size_t, const T*,   \
                          std::size_t, T*, std::size_t, bool);                                                    \
    template Tensor3<T> conv1d<T>(const Tensor3<T>&, const Tensor3<T>&, std::span<const T>, std::size_t);         \
    template void conv1d_backward<T>(const Tensor3<T>&, const Tensor3<T>&, std::size_t, const Tensor3<T>&,        \
                                     Tensor3<T>*, Tensor3<T>*, std::span<T>);                                     \
    template Tensor3<T> tconv1d<T>(const Tensor3<T>&, const Tensor3<T>&, std::span<const T>, std::size_t);        \
    template void tconv1d_backward<T>(const Tensor3<T>&, const Tensor3<T>&, std::size_t, const Tensor3<T>&,       \
                                      Tensor3<T>*, Tensor3<T>*, std::span<T>);                                    \
    template void reference::gemm<T>(Trans, Trans, std::size_t, std::size_t, std::size_t, const T*, std::size_t,  \
                                     const T*, std::size_t, T*, std::size_t, bool);                               \
    template Tensor3<T> reference::conv1d<T>(const Tensor3<T>&, const Tensor3<T>&, std::span<const T>,            \
                                             std::size_t);                                                        \
    template void reference::conv1d_backward<T>(const Tensor3<T>&, const Tensor3<T>&, std::size_t,                \
                                                const Tensor3<T>&, Tensor3<T>*, Tensor3<T>*, std::span<T>);       \
    template Tensor3<T> reference::tconv1d<T>(const Tensor3<T>&, const Tensor3<T>&, std::span<const T>,           \
                                              std::size_t);

LOADPIN_INSTANTIATE(float)
LOADPIN_INSTANTIATE(double)

#undef LOADPIN_INSTANTIATE

}  // namespace loadpin::kernels
