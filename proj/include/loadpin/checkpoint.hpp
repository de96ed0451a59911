#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "loadpin/model.hpp"
#include "loadpin/series.hpp"
#include "loadpin/train_config.hpp"

namespace loadpin {

struct NamedTensor {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<float> values;
    bool operator==(const NamedTensor&) const = default;
};

/// Trained parameters for both generator stages and the discriminator, with
/// everything needed to rebuild and run them.
struct Checkpoint {
    static constexpr int kVersion = 1;
    int version = kVersion;
    GeneratorConfig gen;
    DiscConfig disc;
    TrainConfig train;
    NormStats stats;
    int resolution = 60;
    std::size_t iteration = 0;
    std::vector<NamedTensor> tensors;  // parameter values, then spectral-norm vectors as "<name>.sn_u"

    static Checkpoint capture(const Generator<float>& g, const Discriminator<float>& d, const TrainConfig& tc,
                              const NormStats& st, int resolution, std::size_t iteration);
    /// Copies stored values into matching parameters; every parameter must be present.
    void apply(Generator<float>& g, Discriminator<float>& d) const;
    Generator<float> generator() const;
    Discriminator<float> discriminator() const;
    bool operator==(const Checkpoint&) const = default;
};

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& dir);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace loadpin
