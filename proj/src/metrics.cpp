#include "ftlsim/metrics.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ftlsim {

long long ConfusionMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), 0LL);
}

long long ConfusionMatrix::fn(std::size_t c) const {
    long long row = 0;
    for (std::size_t p = 0; p < num_classes; ++p) row += at(c, p);
    return row - tp(c);
}

long long ConfusionMatrix::fp(std::size_t c) const {
    long long col = 0;
    for (std::size_t t = 0; t < num_classes; ++t) col += at(t, c);
    return col - tp(c);
}

ConfusionMatrix confusion_matrix(std::span<const int> predictions, std::span<const int> labels,
                                 std::size_t num_classes, std::vector<std::string> class_names) {
    if (predictions.size() != labels.size()) {
        throw std::invalid_argument("predictions and labels differ in length");
    }
    if (predictions.empty()) throw std::invalid_argument("empty evaluation");
    if (num_classes < 1) throw std::invalid_argument("num_classes must be >= 1");

    ConfusionMatrix cm;
    cm.num_classes = num_classes;
    cm.counts.assign(num_classes * num_classes, 0);
    cm.class_names =
        class_names.empty() ? default_class_names(num_classes) : std::move(class_names);
    if (cm.class_names.size() != num_classes) {
        throw std::invalid_argument("class_names length must equal num_classes");
    }

    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const int t = labels[i];
        const int p = predictions[i];
        if (t < 0 || t >= static_cast<int>(num_classes) || p < 0 ||
            p >= static_cast<int>(num_classes)) {
            throw std::invalid_argument("class index out of range at position " +
                                        std::to_string(i));
        }
        ++cm.at(static_cast<std::size_t>(t), static_cast<std::size_t>(p));
    }
    return cm;
}

namespace {

void check_nonnegative(long long value, const char* name) {
    if (value < 0) {
        throw std::invalid_argument(std::string(name) + " must be nonnegative");
    }
}

}  // namespace

MetricValue precision(long long tp, long long fp) {
    check_nonnegative(tp, "tp");
    check_nonnegative(fp, "fp");
    if (tp + fp == 0) return {0.0, true};
    return {static_cast<double>(tp) / static_cast<double>(tp + fp), false};
}

MetricValue recall(long long tp, long long fn) {
    check_nonnegative(tp, "tp");
    check_nonnegative(fn, "fn");
    if (tp + fn == 0) return {0.0, true};
    return {static_cast<double>(tp) / static_cast<double>(tp + fn), false};
}

double f1(double precision, double recall) {
    if (!(precision >= 0.0 && precision <= 1.0) || !(recall >= 0.0 && recall <= 1.0)) {
        throw std::invalid_argument("precision and recall must lie in [0, 1]");
    }
    const double sum = precision + recall;
    if (sum == 0.0) return 0.0;
    return 2.0 * precision * recall / sum;
}

double class_accuracy(long long tp, long long tn, long long fp, long long fn) {
    check_nonnegative(tp, "tp");
    check_nonnegative(tn, "tn");
    check_nonnegative(fp, "fp");
    check_nonnegative(fn, "fn");
    const long long total = tp + tn + fp + fn;
    if (total == 0) throw std::invalid_argument("class_accuracy of an empty count set");
    return static_cast<double>(tp + tn) / static_cast<double>(total);
}

double overall_accuracy(const ConfusionMatrix& cm) {
    const long long total = cm.total();
    if (total == 0) throw std::invalid_argument("overall_accuracy of an empty matrix");
    long long trace = 0;
    for (std::size_t c = 0; c < cm.num_classes; ++c) trace += cm.tp(c);
    return static_cast<double>(trace) / static_cast<double>(total);
}

MetricsReport report(const ConfusionMatrix& cm) {
    if (cm.num_classes == 0 || cm.counts.size() != cm.num_classes * cm.num_classes) {
        throw std::invalid_argument("malformed confusion matrix");
    }
    for (const long long v : cm.counts) check_nonnegative(v, "confusion count");

    MetricsReport rep;
    rep.class_names = cm.class_names;
    for (std::size_t c = 0; c < cm.num_classes; ++c) {
        const long long tp = cm.tp(c);
        const long long fn = cm.fn(c);
        const long long fp = cm.fp(c);
        const long long tn = cm.tn(c);
        rep.support.push_back(tp + fn);
        rep.precision.push_back(precision(tp, fp));
        rep.recall.push_back(recall(tp, fn));
        rep.f1.push_back(f1(rep.precision.back().value, rep.recall.back().value));
        rep.class_accuracy.push_back(class_accuracy(tp, tn, fp, fn));
    }
    rep.overall_accuracy = overall_accuracy(cm);
    return rep;
}

std::optional<std::size_t> detect_convergence(std::span<const double> losses,
                                              std::span<const double> accuracies,
                                              const ConvergenceSettings& settings) {
    if (losses.size() < 2) {
        throw std::invalid_argument("need at least 2 evaluation records to detect convergence");
    }
    if (accuracies.size() != losses.size()) {
        throw std::invalid_argument("loss and accuracy sequences differ in length");
    }
    if (settings.patience < 1) throw std::invalid_argument("patience must be >= 1");
    if (!(settings.loss_epsilon > 0.0) || !(settings.accuracy_epsilon > 0.0)) {
        throw std::invalid_argument("convergence epsilons must be positive");
    }

    for (std::size_t r = settings.patience; r < losses.size(); ++r) {
        bool settled = true;
        for (std::size_t t = r - settings.patience + 1; t <= r; ++t) {
            const bool small_loss_delta =
                std::abs(losses[t] - losses[t - 1]) < settings.loss_epsilon;
            const bool small_accuracy_gain =
                accuracies[t] - accuracies[t - 1] < settings.accuracy_epsilon;
            if (!small_loss_delta || !small_accuracy_gain) {
                settled = false;
                break;
            }
        }
        if (settled) return r;
    }
    return std::nullopt;
}

}  // namespace ftlsim
