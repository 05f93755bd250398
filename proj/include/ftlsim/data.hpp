#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ftlsim/rng.hpp"

namespace ftlsim {

enum class Provenance { synthetic, csv };

struct Sample {
    std::vector<double> features;
    int label = 0;
};

struct Dataset {
    std::vector<Sample> samples;
    std::vector<std::string> class_names;
    Provenance provenance = Provenance::synthetic;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
    std::size_t num_classes() const { return class_names.size(); }
    std::size_t feature_dim() const {
        return samples.empty() ? 0 : samples.front().features.size();
    }
};

/// Four classes get the chest-CT names the simulator is modeled around;
/// any other count falls back to class0..classN-1.
std::vector<std::string> default_class_names(std::size_t num_classes);

struct SynthConfig {
    std::size_t num_classes = 4;
    std::size_t input_dim = 16;
    std::vector<std::size_t> class_counts;
    double class_separation = 3.0;
    double noise_std = 1.0;
    std::uint64_t seed = 0;
};

// Class means are random unit directions scaled by separation/sqrt(2), which
// puts random pairs of means near `separation` apart. Means are drawn for all
// classes before any sample, so datasets generated with the same seed share
// geometry regardless of counts.
std::vector<std::vector<double>> draw_class_means(Rng& rng, std::size_t num_classes,
                                                  std::size_t input_dim, double separation);
Sample draw_sample(Rng& rng, const std::vector<double>& mean, double noise_std, int label);

Dataset generate_synthetic(const SynthConfig& config);

/// Label-skewed split: per-class hospital proportions are Dirichlet(alpha)
/// draws, every sample is assigned by one uniform draw against that CDF, and
/// empty shards are repaired by moving the lowest-index sample out of the
/// largest shard. Deterministic per seed.
std::vector<Dataset> partition_dirichlet(const Dataset& dataset, std::size_t num_hospitals,
                                         double alpha, std::uint64_t seed);

/// Expects header f0,f1,...,f{d-1},label. Errors name the offending line.
Dataset load_csv(const std::string& path, std::size_t num_classes);

}  // namespace ftlsim
