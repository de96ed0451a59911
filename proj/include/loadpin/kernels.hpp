#pragma once

// Hot numeric kernels. The top-level functions are the OpenMP-parallel
// im2col + packed-GEMM versions used by the network layers; the
// `reference` namespace holds serial direct-loop equivalents that the tests
// and the benchmark compare against.

#include <cstddef>
#include <span>
#include <vector>

#include "loadpin/tensor.hpp"

namespace loadpin::kernels {

enum class Trans { no, yes };

/// C (m x n) = op(A) (m x k) * op(B) (k x n), or C += ... when `accumulate`.
/// All matrices row-major with the given leading dimensions.
template <typename T>
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
          const T* b, std::size_t ldb, T* c, std::size_t ldc, bool accumulate);

/// "Same" padding geometry: out = ceil(in / stride), zero padding split with
/// the smaller half on the left.
struct ConvGeometry {
    std::size_t in_time = 0;
    std::size_t out_time = 0;
    std::size_t kernel = 1;
    std::size_t stride = 1;
    std::size_t pad_left = 0;
};

ConvGeometry conv_geometry(std::size_t in_time, std::size_t kernel, std::size_t stride);

// Convolution weights are (out_channels, in_channels, kernel).
// Transpose-convolution weights are (in_channels, out_channels, kernel), i.e.
// the weight of the strided convolution it is the adjoint of.
// An empty bias span means no bias.

template <typename T>
Tensor3<T> conv1d(const Tensor3<T>& x, const Tensor3<T>& w, std::span<const T> bias, std::size_t stride);

/// Accumulates into dw/db; assigns dx. Any output may be null/empty to skip it.
template <typename T>
void conv1d_backward(const Tensor3<T>& x, const Tensor3<T>& w, std::size_t stride, const Tensor3<T>& dy,
                     Tensor3<T>* dx, Tensor3<T>* dw, std::span<T> db);

template <typename T>
Tensor3<T> tconv1d(const Tensor3<T>& x, const Tensor3<T>& w, std::span<const T> bias, std::size_t stride);

template <typename T>
void tconv1d_backward(const Tensor3<T>& x, const Tensor3<T>& w, std::size_t stride, const Tensor3<T>& dy,
                      Tensor3<T>* dx, Tensor3<T>* dw, std::span<T> db);

namespace reference {

template <typename T>
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
          const T* b, std::size_t ldb, T* c, std::size_t ldc, bool accumulate);

template <typename T>
Tensor3<T> conv1d(const Tensor3<T>& x, const Tensor3<T>& w, std::span<const T> bias, std::size_t stride);

template <typename T>
void conv1d_backward(const Tensor3<T>& x, const Tensor3<T>& w, std::size_t stride, const Tensor3<T>& dy,
                     Tensor3<T>* dx, Tensor3<T>* dw, std::span<T> db);

template <typename T>
Tensor3<T> tconv1d(const Tensor3<T>& x, const Tensor3<T>& w, std::span<const T> bias, std::size_t stride);

}  // namespace reference

}  // namespace loadpin::kernels
