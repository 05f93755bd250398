#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "ftlsim/metrics.hpp"
#include "ftlsim/model.hpp"

namespace ftlsim {

struct HospitalNode {
    int id = 0;
    Dataset local_data;
    std::optional<ParameterVector> twin_params;  // mirror of the last model received
    std::vector<Sample> twin_buffer;             // fresh samples awaiting ingestion
    std::size_t sample_count = 0;
};

HospitalNode make_hospital(int id, Dataset data);

/// Queues fresh samples at the digital twin. They join local_data at the next
/// cycle boundary, before that cycle's local update.
void twin_sync(HospitalNode& node, const std::vector<Sample>& new_samples);
void merge_twin_buffer(HospitalNode& node);

struct GlobalModelState {
    ParameterVector w_global;
    std::size_t round_index = 0;
    std::vector<int> remaining;      // hospitals not yet visited this cycle
    double cumulative_weight = 0.0;  // samples absorbed so far this cycle
};

enum class RecordKind { update, eval };

struct TraceRecord {
    std::size_t round = 0;
    RecordKind kind = RecordKind::update;
    int actor_id = -1;        // hospital id for updates, -1 for evaluation rows
    double loss = 0.0;        // mean training loss; eval rows carry the round mean
    double accuracy = 0.0;    // training accuracy; eval rows carry held-out accuracy
    double elapsed_ms = 0.0;  // modeled work time (see modeled_update_ms)
};

struct TrainingTrace {
    std::vector<TraceRecord> records;

    std::vector<double> eval_losses() const;
    std::vector<double> eval_accuracies() const;
};

// Work-proportional time model shared by every method, so reported times are
// reproducible bit for bit across runs and thread counts. Real wall time is
// never written into result files.
double modeled_update_ms(std::size_t samples, std::size_t epochs, const ModelSpec& spec,
                         bool frozen_base);
double modeled_eval_ms(std::size_t samples, const ModelSpec& spec);

struct ConvergenceSummary {
    std::optional<std::size_t> round;  // 0-based round index where training settled
    double elapsed_ms = 0.0;           // modeled time of all rounds through that one
};

ConvergenceSummary summarize_convergence(const TrainingTrace& trace,
                                         const ConvergenceSettings& settings);

/// Two-hop routing of one local round: the hospital server hands the received
/// model to its digital twin, the twin mirrors it and fine-tunes on the local
/// data, and the tuned parameters travel back.
FineTuneResult local_update(HospitalNode& node, const ParameterVector& w_minus,
                            const ModelSpec& spec, const TrainSettings& settings);

/// Running sample-weighted average. With cumulative_weight zero the incoming
/// parameters replace w_global outright; afterwards
/// w_global += n/(C+n) * (w_plus - w_global), which keeps identical inputs an
/// exact fixed point.
GlobalModelState f_weight(GlobalModelState state, const ParameterVector& w_plus,
                          std::size_t n_i);

ParameterVector fedavg_aggregate(
    const std::vector<std::pair<ParameterVector, std::size_t>>& updates);

struct FtlOptions {
    std::size_t max_cycles = 50;
    ConvergenceSettings convergence;
    // invoked after each cycle's evaluation; the hook may twin_sync new data
    std::function<void(std::size_t cycle, std::vector<HospitalNode>&)> on_cycle_end;
    // observer for the aggregated model after each cycle
    std::function<void(std::size_t cycle, const ParameterVector& w_global)> on_round_model;
};

struct FtlResult {
    ParameterVector model;
    TrainingTrace trace;
};

/// Cycling update: every cycle reinitializes the remaining-hospital set and the
/// cumulative weight, visits hospitals in ascending id order, folds each local
/// result into w_global, then evaluates on the held-out set.
FtlResult run_ftl(std::vector<HospitalNode>& hospitals, const ModelSpec& spec,
                  const TrainSettings& settings, const ParameterVector& pretrained,
                  const Dataset& test_set, const FtlOptions& options);

struct FedAvgOptions {
    std::size_t max_rounds = 50;
    ConvergenceSettings convergence;
    bool parallel_clients = false;  // results aggregate in id order either way
};

struct FedAvgResult {
    ParameterVector model;
    TrainingTrace trace;
};

FedAvgResult run_fedavg(const std::vector<HospitalNode>& hospitals, const ModelSpec& spec,
                        const TrainSettings& settings, const ParameterVector& init,
                        const Dataset& test_set, const FedAvgOptions& options);

struct ClusterAssignment {
    std::vector<int> cluster_of;  // aligned with the hospitals list
    std::size_t num_clusters = 0;
};

/// Deterministic k-means on normalized label histograms: farthest-point
/// seeding from the lowest hospital id, fixed Lloyd iterations, and
/// lowest-id tie breaks throughout. Every cluster ends up nonempty.
ClusterAssignment cluster_clients(const std::vector<HospitalNode>& hospitals, std::size_t k);

/// Cluster whose training-label centroid is nearest (squared Euclidean) to the
/// one-hot vector of true_label; ties go to the lowest cluster id.
int route_cluster(const std::vector<std::vector<double>>& centroids, int true_label);

struct CflOptions {
    std::size_t max_rounds = 50;
    ConvergenceSettings convergence;
    bool parallel_clients = false;
};

struct CflResult {
    std::vector<ParameterVector> cluster_models;
    ClusterAssignment assignment;
    std::vector<std::vector<double>> centroids;  // per-cluster label histogram centroid
    TrainingTrace trace;
};

/// Independent federated averaging per cluster; evaluation routes each test
/// sample through route_cluster.
CflResult run_cfl(const std::vector<HospitalNode>& hospitals, const ModelSpec& spec,
                  const TrainSettings& settings, const ParameterVector& init,
                  const Dataset& test_set, std::size_t k, const CflOptions& options);

}  // namespace ftlsim
