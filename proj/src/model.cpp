#include "ftlsim/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ftlsim/kernels.hpp"

namespace ftlsim {

namespace {

constexpr double kProbFloor = 1e-12;
constexpr double kInitRange = 0.05;

struct Offsets {
    std::size_t w1, b1, w2, b2;
};

Offsets offsets(const ModelSpec& spec) {
    const std::size_t w1 = 0;
    const std::size_t b1 = spec.input_dim * spec.hidden_dim;
    const std::size_t w2 = b1 + spec.hidden_dim;
    const std::size_t b2 = w2 + spec.hidden_dim * spec.num_classes;
    return {w1, b1, w2, b2};
}

void check_features(const ModelSpec& spec, std::span<const double> features) {
    if (features.size() != spec.input_dim) {
        throw std::invalid_argument("feature vector length " + std::to_string(features.size()) +
                                    " does not match input_dim " +
                                    std::to_string(spec.input_dim));
    }
}

// Hidden activations and class probabilities for one sample.
void forward_cache(const ParameterVector& params, const ModelSpec& spec,
                   std::span<const double> features, std::vector<double>& hidden,
                   std::vector<double>& probs) {
    const auto off = offsets(spec);
    const double* v = params.values.data();

    hidden.assign(v + off.b1, v + off.b1 + spec.hidden_dim);
    kernels::matvec_input_major(v + off.w1, features.data(), spec.input_dim, spec.hidden_dim,
                                hidden.data());
    for (std::size_t h = 0; h < spec.hidden_dim; ++h) hidden[h] = std::tanh(hidden[h]);

    probs.assign(v + off.b2, v + off.b2 + spec.num_classes);
    kernels::matvec_input_major(v + off.w2, hidden.data(), spec.hidden_dim, spec.num_classes,
                                probs.data());

    double max_logit = probs[0];
    for (std::size_t c = 1; c < spec.num_classes; ++c) max_logit = std::max(max_logit, probs[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
        probs[c] = std::exp(probs[c] - max_logit);
        sum += probs[c];
    }
    for (std::size_t c = 0; c < spec.num_classes; ++c) probs[c] /= sum;
}

void check_dataset(const ModelSpec& spec, const Dataset& dataset) {
    if (dataset.empty()) throw std::invalid_argument("no local data");
    for (std::size_t s = 0; s < dataset.size(); ++s) {
        const Sample& sample = dataset.samples[s];
        if (sample.features.size() != spec.input_dim) {
            throw std::invalid_argument("sample " + std::to_string(s) + " has " +
                                        std::to_string(sample.features.size()) +
                                        " features, expected " + std::to_string(spec.input_dim));
        }
        if (sample.label < 0 || sample.label >= static_cast<int>(spec.num_classes)) {
            throw std::invalid_argument("sample " + std::to_string(s) + " label " +
                                        std::to_string(sample.label) + " out of range");
        }
    }
}

}  // namespace

void validate(const ModelSpec& spec) {
    if (spec.input_dim < 1) throw std::invalid_argument("input_dim must be >= 1");
    if (spec.hidden_dim < 1) throw std::invalid_argument("hidden_dim must be >= 1");
    if (spec.num_classes < 2) throw std::invalid_argument("num_classes must be >= 2");
}

void validate(const ParameterVector& params, const ModelSpec& spec) {
    validate(spec);
    if (params.layout != spec.layout()) {
        throw std::invalid_argument("parameter layout does not match the model spec");
    }
    if (params.values.size() != params.layout.total()) {
        throw std::invalid_argument("parameter vector length " +
                                    std::to_string(params.values.size()) +
                                    " does not match its layout total " +
                                    std::to_string(params.layout.total()));
    }
    for (const double v : params.values) {
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite model parameter");
    }
}

ParameterVector init_params(const ModelSpec& spec, std::uint64_t seed) {
    validate(spec);
    ParameterVector params;
    params.layout = spec.layout();
    params.values.assign(params.layout.total(), 0.0);
    params.frozen_base = false;

    Rng rng(seed);
    const auto off = offsets(spec);
    for (std::size_t i = 0; i < off.b2; ++i) {
        params.values[i] = rng.uniform(-kInitRange, kInitRange);
    }
    // head biases stay zero
    return params;
}

std::vector<double> forward(const ParameterVector& params, const ModelSpec& spec,
                            std::span<const double> features) {
    validate(params, spec);
    check_features(spec, features);
    std::vector<double> hidden, probs;
    forward_cache(params, spec, features, hidden, probs);
    return probs;
}

double loss(std::span<const double> probs, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= probs.size()) {
        throw std::invalid_argument("label " + std::to_string(label) +
                                    " out of range for " + std::to_string(probs.size()) +
                                    " classes");
    }
    const double p = std::max(probs[static_cast<std::size_t>(label)], kProbFloor);
    return -std::log(p);
}

int predict_class(std::span<const double> probs) {
    if (probs.empty()) throw std::invalid_argument("empty probability vector");
    std::size_t best = 0;
    for (std::size_t c = 1; c < probs.size(); ++c) {
        if (probs[c] > probs[best]) best = c;
    }
    return static_cast<int>(best);
}

double accumulate_gradient(const ParameterVector& params, const ModelSpec& spec,
                           std::span<const double> features, int label, std::span<double> grad) {
    check_features(spec, features);
    if (grad.size() != params.layout.total()) {
        throw std::invalid_argument("gradient buffer length mismatch");
    }
    if (label < 0 || label >= static_cast<int>(spec.num_classes)) {
        throw std::invalid_argument("label out of range");
    }

    static thread_local std::vector<double> hidden, probs, dlogits, dpre;
    forward_cache(params, spec, features, hidden, probs);
    const double sample_loss = loss(probs, label);

    dlogits = probs;
    dlogits[static_cast<std::size_t>(label)] -= 1.0;

    const auto off = offsets(spec);
    kernels::rank1_update(grad.data() + off.w2, hidden.data(), spec.hidden_dim, dlogits.data(),
                          spec.num_classes);
    kernels::scaled_add(grad.data() + off.b2, dlogits.data(), 1.0, spec.num_classes);

    if (!params.frozen_base) {
        const double* w2 = params.values.data() + off.w2;
        dpre.assign(spec.hidden_dim, 0.0);
        for (std::size_t h = 0; h < spec.hidden_dim; ++h) {
            double dh = 0.0;
            const double* row = w2 + h * spec.num_classes;
            for (std::size_t c = 0; c < spec.num_classes; ++c) dh += row[c] * dlogits[c];
            dpre[h] = dh * (1.0 - hidden[h] * hidden[h]);
        }
        kernels::rank1_update(grad.data() + off.w1, features.data(), spec.input_dim, dpre.data(),
                              spec.hidden_dim);
        kernels::scaled_add(grad.data() + off.b1, dpre.data(), 1.0, spec.hidden_dim);
    }
    return sample_loss;
}

EvalResult evaluate(const ParameterVector& params, const ModelSpec& spec, const Dataset& dataset) {
    validate(params, spec);
    check_dataset(spec, dataset);
    std::vector<double> hidden, probs;
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (const Sample& sample : dataset.samples) {
        forward_cache(params, spec, sample.features, hidden, probs);
        loss_sum += loss(probs, sample.label);
        if (predict_class(probs) == sample.label) ++correct;
    }
    const double n = static_cast<double>(dataset.size());
    return {loss_sum / n, static_cast<double>(correct) / n};
}

FineTuneResult fine_tune(const ParameterVector& params, const ModelSpec& spec,
                         const Dataset& dataset, const TrainSettings& settings) {
    validate(params, spec);
    check_dataset(spec, dataset);
    if (settings.learning_rate < 0.0) {
        throw std::invalid_argument("learning_rate must be nonnegative");
    }
    if (settings.local_epochs < 1) throw std::invalid_argument("local_epochs must be >= 1");
    if (settings.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");

    const std::size_t n = dataset.size();
    std::size_t batch_size = settings.batch_size;
    const bool clamped = batch_size > n;
    if (clamped) batch_size = n;

    FineTuneResult result;
    result.batch_clamped = clamped;
    result.mean_loss_before = evaluate(params, spec, dataset).mean_loss;

    ParameterVector out = params;
    Rng rng(settings.seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> grad(out.layout.total());

    double* step_ptr = out.values.data();
    const double* grad_ptr = grad.data();
    std::size_t step_len = out.layout.total();
    if (out.frozen_base) {
        step_ptr += out.layout.base_len;
        grad_ptr += out.layout.base_len;
        step_len = out.layout.head_len;
    }

    for (std::size_t epoch = 0; epoch < settings.local_epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < n; start += batch_size) {
            const std::size_t count = std::min(batch_size, n - start);
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t i = start; i < start + count; ++i) {
                const Sample& sample = dataset.samples[order[i]];
                const double sample_loss =
                    accumulate_gradient(out, spec, sample.features, sample.label, grad);
                if (!std::isfinite(sample_loss)) {
                    throw std::runtime_error("non-finite training loss at epoch " +
                                             std::to_string(epoch) + ", batch " +
                                             std::to_string(start / batch_size));
                }
            }
            kernels::sgd_step(step_ptr, grad_ptr,
                              settings.learning_rate / static_cast<double>(count), step_len);
        }
    }

    const EvalResult after = evaluate(out, spec, dataset);
    result.mean_loss_after = after.mean_loss;
    result.train_accuracy_after = after.accuracy;
    result.improved = result.mean_loss_after <= result.mean_loss_before;
    validate(out, spec);
    result.params = std::move(out);
    return result;
}

ParameterVector pretrain_base(const ModelSpec& spec, const Dataset& source,
                              const TrainSettings& settings) {
    validate(spec);
    if (source.empty()) throw std::invalid_argument("no local data");
    if (source.num_classes() < 2) {
        throw std::invalid_argument("source dataset needs at least 2 classes");
    }

    ModelSpec source_spec = spec;
    source_spec.num_classes = source.num_classes();

    const ParameterVector start = init_params(source_spec, settings.seed);
    const FineTuneResult trained = fine_tune(start, source_spec, source, settings);

    ParameterVector out;
    out.layout = spec.layout();
    out.values.assign(out.layout.total(), 0.0);
    out.frozen_base = true;
    std::copy_n(trained.params.values.data(), out.layout.base_len, out.values.data());

    // fresh target head, weights uniform, biases zero
    Rng rng(derive_seed(settings.seed, 1));
    const std::size_t w2_len = spec.hidden_dim * spec.num_classes;
    for (std::size_t i = 0; i < w2_len; ++i) {
        out.values[out.layout.base_len + i] = rng.uniform(-kInitRange, kInitRange);
    }
    validate(out, spec);
    return out;
}

}  // namespace ftlsim
