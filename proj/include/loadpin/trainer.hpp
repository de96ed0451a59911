#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "loadpin/checkpoint.hpp"
#include "loadpin/model.hpp"
#include "loadpin/optim.hpp"
#include "loadpin/samples.hpp"
#include "loadpin/train_config.hpp"

namespace loadpin {

/// Raised when a loss turns non-finite; carries the offending report.
class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(const std::string& msg, LossReport r) : std::runtime_error(msg), report(r) {}
    LossReport report;
};

/// Generator, discriminator and their optimizers for one training run.
/// Training uses float; double exists for gradient checks.
template <typename T>
class BasicTrainer {
public:
    BasicTrainer(GeneratorConfig gen, DiscConfig disc, TrainConfig cfg, int resolution);

    /// d_steps_per_g discriminator updates on real vs spliced profiles, then
    /// one generator update on L_coarse + L_refine.
    LossReport step(std::span<const Sample* const> batch);

    /// The discriminator updates of `step` followed by the generator gradient,
    /// left in the generator's params without applying it.
    LossReport accumulate_gradients(std::span<const Sample* const> batch);
    /// L_coarse + L_refine for the current parameters, discriminator as last
    /// normalized.
    double generator_objective(std::span<const Sample* const> batch) const;

    /// Mean stage-2 content loss over the H-window.
    double validation_loss(std::span<const Sample> samples) const;

    Generator<T>& generator() { return g_; }
    Discriminator<T>& discriminator() { return d_; }
    const Generator<T>& generator() const { return g_; }
    const Discriminator<T>& discriminator() const { return d_; }
    std::size_t iteration() const { return iter_; }
    const TrainConfig& config() const { return cfg_; }
    std::size_t margin() const { return margin_; }

private:

    TrainConfig cfg_;
    std::size_t margin_;
    Generator<T> g_;
    Discriminator<T> d_;
    nn::Adam<T> g_opt_, d_opt_;
    std::size_t iter_ = 0, d_iter_ = 0;
};

using Trainer = BasicTrainer<float>;

struct FitResult {
    Checkpoint best;
    std::size_t best_iteration = 0;
    double best_val_loss = 0;  // NaN when no validation split
    std::vector<LossReport> history;
    std::vector<std::pair<std::size_t, double>> validation;  // (iteration, loss)
};

using FitProgress = std::function<void(std::size_t iteration, const LossReport&)>;

FitResult fit(const TrainConfig& cfg, const GeneratorConfig& gen, const DiscConfig& disc, const SampleSet& set,
              const FitProgress& progress = {});

}  // namespace loadpin
