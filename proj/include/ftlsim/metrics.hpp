#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ftlsim/data.hpp"

namespace ftlsim {

// Rows are true classes, columns predicted classes. Per-class TP/FP/FN/TN
// follow the one-vs-rest reading of the matrix.
struct ConfusionMatrix {
    std::size_t num_classes = 0;
    std::vector<long long> counts;  // row-major
    std::vector<std::string> class_names;

    long long& at(std::size_t t, std::size_t p) { return counts[t * num_classes + p]; }
    long long at(std::size_t t, std::size_t p) const { return counts[t * num_classes + p]; }
    long long total() const;
    long long tp(std::size_t c) const { return at(c, c); }
    long long fn(std::size_t c) const;
    long long fp(std::size_t c) const;
    long long tn(std::size_t c) const { return total() - tp(c) - fn(c) - fp(c); }
};

ConfusionMatrix confusion_matrix(std::span<const int> predictions, std::span<const int> labels,
                                 std::size_t num_classes,
                                 std::vector<std::string> class_names = {});

struct MetricValue {
    double value = 0.0;
    bool undefined = false;  // zero denominator; value reported as 0
};

MetricValue precision(long long tp, long long fp);
MetricValue recall(long long tp, long long fn);
double f1(double precision, double recall);
double class_accuracy(long long tp, long long tn, long long fp, long long fn);
double overall_accuracy(const ConfusionMatrix& cm);

struct MetricsReport {
    std::vector<std::string> class_names;
    std::vector<long long> support;  // true-class counts
    std::vector<MetricValue> precision;
    std::vector<MetricValue> recall;
    std::vector<double> f1;
    std::vector<double> class_accuracy;
    double overall_accuracy = 0.0;
};

MetricsReport report(const ConfusionMatrix& cm);

struct ConvergenceSettings {
    double loss_epsilon = 1e-3;
    double accuracy_epsilon = 1e-3;
    std::size_t patience = 3;
};

/// Rounds are the 0-based positions in the evaluation sequence. Returns the
/// first r such that every pair (t-1, t) for t in [r-patience+1, r] has
/// |loss delta| < loss_epsilon and accuracy gain < accuracy_epsilon, or
/// nothing if no such round exists.
std::optional<std::size_t> detect_convergence(std::span<const double> losses,
                                              std::span<const double> accuracies,
                                              const ConvergenceSettings& settings);

}  // namespace ftlsim
