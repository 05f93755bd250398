#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ftlsim/data.hpp"

namespace ftlsim {

struct ParamLayout {
    std::size_t base_len = 0;
    std::size_t head_len = 0;

    std::size_t total() const { return base_len + head_len; }
    bool operator==(const ParamLayout&) const = default;
};

// Flat parameter storage. The base segment is the feature transform
// (dense layer + tanh), the head segment the linear softmax classifier.
// When frozen_base is set, training never reads or writes base gradients,
// so the base bits are untouched by construction.
struct ParameterVector {
    std::vector<double> values;
    ParamLayout layout;
    bool frozen_base = false;

    std::span<double> base() { return {values.data(), layout.base_len}; }
    std::span<const double> base() const { return {values.data(), layout.base_len}; }
    std::span<double> head() { return {values.data() + layout.base_len, layout.head_len}; }
    std::span<const double> head() const {
        return {values.data() + layout.base_len, layout.head_len};
    }
};

enum class Activation { tanh };

struct ModelSpec {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;
    std::size_t num_classes = 0;
    Activation activation = Activation::tanh;

    // base: W1 (input_dim x hidden_dim, input-major) then b1
    // head: W2 (hidden_dim x num_classes, hidden-major) then b2
    std::size_t base_param_count() const { return input_dim * hidden_dim + hidden_dim; }
    std::size_t head_param_count() const { return hidden_dim * num_classes + num_classes; }
    ParamLayout layout() const { return {base_param_count(), head_param_count()}; }
};

struct TrainSettings {
    double learning_rate = 0.05;
    std::size_t local_epochs = 1;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
};

void validate(const ModelSpec& spec);
/// Checks layout consistency with the spec and that every value is finite.
void validate(const ParameterVector& params, const ModelSpec& spec);

/// Weights uniform in [-0.05, 0.05] drawn in index order; head biases zero.
ParameterVector init_params(const ModelSpec& spec, std::uint64_t seed);

std::vector<double> forward(const ParameterVector& params, const ModelSpec& spec,
                            std::span<const double> features);

/// Cross-entropy with a 1e-12 probability floor so a zero probability still
/// yields a finite value.
double loss(std::span<const double> probs, int label);

int predict_class(std::span<const double> probs);

/// Adds d(loss)/d(params) of one sample into grad (length = total parameter
/// count). With frozen_base the base portion of grad is left untouched.
/// Returns the sample's loss.
double accumulate_gradient(const ParameterVector& params, const ModelSpec& spec,
                           std::span<const double> features, int label, std::span<double> grad);

struct EvalResult {
    double mean_loss = 0.0;
    double accuracy = 0.0;
};

EvalResult evaluate(const ParameterVector& params, const ModelSpec& spec, const Dataset& dataset);

struct FineTuneResult {
    ParameterVector params;
    double mean_loss_before = 0.0;
    double mean_loss_after = 0.0;
    double train_accuracy_after = 0.0;
    bool improved = false;       // mean_loss_after <= mean_loss_before
    bool batch_clamped = false;  // batch_size exceeded the dataset and was clamped
};

/// Mini-batch SGD: per epoch, sample order is reshuffled by the seeded
/// generator and per-batch gradients accumulate in that order. Pure in
/// (inputs, seed): repeated calls are bit-identical.
FineTuneResult fine_tune(const ParameterVector& params, const ModelSpec& spec,
                         const Dataset& dataset, const TrainSettings& settings);

/// Trains a full model on the source data (whose label space may differ from
/// spec.num_classes), keeps the base, attaches a freshly initialized head for
/// the target classes, and marks the base frozen.
ParameterVector pretrain_base(const ModelSpec& spec, const Dataset& source,
                              const TrainSettings& settings);

}  // namespace ftlsim
