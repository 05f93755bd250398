#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ftlsim/protocol.hpp"

namespace ftlsim {

/// Configuration problems: bad file, bad key, bad value, missing seed.
/// The CLI maps these to exit code 2; everything else exits 1.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Method { fl, cfl, ftl, all };

std::string_view method_name(Method m);
Method parse_method(const std::string& name);

enum class DataSource { synthetic, csv };

struct ExperimentConfig {
    Method method = Method::all;

    DataSource data = DataSource::synthetic;
    std::string csv_path;
    double csv_test_fraction = 0.2;

    std::size_t num_classes = 4;
    std::size_t input_dim = 16;
    // Hospitals hold scarce local data (the rare classes especially), so the
    // pretrained source representation carries real weight; the held-out test
    // counts follow the benchmark class mix.
    std::vector<std::size_t> train_counts = {240, 20, 20, 180};
    std::vector<std::size_t> test_counts = {120, 51, 54, 90};
    double class_separation = 3.0;
    double noise_std = 1.0;

    std::size_t num_hospitals = 4;
    double dirichlet_alpha = 0.5;

    std::size_t hidden_dim = 16;
    double learning_rate = 0.05;
    std::size_t local_epochs = 2;
    std::size_t batch_size = 32;

    std::size_t cfl_clusters = 2;
    std::size_t max_rounds = 50;
    ConvergenceSettings convergence;

    std::size_t pretrain_per_class = 200;
    std::size_t pretrain_epochs = 20;
    std::size_t streaming_per_cycle = 0;  // twin-synced samples per hospital per cycle
    bool baselines_use_pretrained = false;
    bool parallel_clients = false;

    std::optional<std::uint64_t> seed;  // mandatory, never defaulted from the clock
    std::string out_dir = "out";

    std::uint64_t config_hash = 0;  // FNV-1a of the config file bytes
};

/// Flat `key = value` lines, `#` comments. Errors name the line.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);
void validate_config(const ExperimentConfig& config);

struct MethodOutcome {
    Method method = Method::fl;
    TrainingTrace trace;
    ConfusionMatrix confusion;
    MetricsReport metrics;
    ConvergenceSummary convergence;
};

/// Runs the configured method(s) in fl, cfl, ftl order and returns their
/// outcomes without touching the filesystem.
std::vector<MethodOutcome> execute_methods(const ExperimentConfig& config);

/// Fixed 4-decimal formatting, half away from zero (0.87301 -> "0.8730").
std::string format_fixed4(double x);

std::uint64_t fnv1a64(std::string_view bytes);

struct ComparisonReport {
    std::string text;  // aligned human-readable table
    std::string csv;   // machine-readable rows
};

/// Rows are emitted in fl, cfl, ftl order regardless of input order.
ComparisonReport compare_report(std::vector<MethodOutcome> outcomes);

std::string trace_csv(const TrainingTrace& trace);
std::string confusion_csv(const ConfusionMatrix& cm);
std::string metrics_csv(const MetricsReport& metrics);

/// Runs the experiment and writes trace_<m>.csv, confusion_<m>.csv,
/// metrics_<m>.csv per method plus summary.csv, summary.txt, manifest.txt.
void run_experiment(const ExperimentConfig& config);

}  // namespace ftlsim
