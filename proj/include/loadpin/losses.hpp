#pragma once

#include <span>
#include <vector>

#include "loadpin/samples.hpp"
#include "loadpin/series.hpp"
#include "loadpin/tensor.hpp"

namespace loadpin {

/// Mask plus `margin` steps either side, clipped to [0, window).
IndexRange loss_window(const EventSpec& ev, std::size_t margin_steps, std::size_t window);

/// Mean squared error over `r`.
template <typename T>
double content_loss(std::span<const T> estimate, std::span<const T> truth, IndexRange r);
/// Adds scale * d(content)/d(estimate) into `grad`.
template <typename T>
void content_loss_grad(std::span<const T> estimate, std::span<const T> truth, IndexRange r, double scale,
                       std::span<T> grad);

/// -mean(scores)
template <typename T>
double adv_loss(std::span<const T> scores);
/// Sum over layers of the per-layer mean squared difference.
template <typename T>
double feat_loss(const std::vector<Tensor3<T>>& fake, const std::vector<Tensor3<T>>& real);
/// content + lambda_adv * adv + lambda_feat * feat
double refine_loss(double content, double adv, double feat, double lambda_adv, double lambda_feat);
/// mean ReLU(1 - real) + mean ReLU(1 + fake)
template <typename T>
double disc_loss(std::span<const T> real, std::span<const T> fake);

}  // namespace loadpin
