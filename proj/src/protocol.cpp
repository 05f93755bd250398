#include "ftlsim/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "ftlsim/kernels.hpp"

namespace ftlsim {

namespace {

void check_layout(const ParameterVector& a, const ParameterVector& b) {
    if (a.layout != b.layout || a.values.size() != b.values.size()) {
        throw std::invalid_argument("parameter layout mismatch");
    }
}

// Running weighted average: the first contribution replaces the accumulator,
// later ones move it by n/(C+n) of the difference. Equal inputs produce a
// zero correction, so repeated identical updates leave the bits unchanged.
void weighted_average_into(ParameterVector& accum, double cumulative,
                           const ParameterVector& w, double n) {
    if (cumulative == 0.0) {
        accum.values = w.values;
        return;
    }
    kernels::blend_toward(accum.values.data(), w.values.data(), n / (cumulative + n),
                          accum.values.size());
}

std::vector<std::size_t> order_by_id(const std::vector<HospitalNode>& hospitals) {
    std::vector<std::size_t> order(hospitals.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return hospitals[a].id < hospitals[b].id; });
    for (std::size_t i = 1; i < order.size(); ++i) {
        if (hospitals[order[i - 1]].id == hospitals[order[i]].id) {
            throw std::invalid_argument("duplicate hospital id " +
                                        std::to_string(hospitals[order[i]].id));
        }
    }
    return order;
}

void check_hospitals(const std::vector<HospitalNode>& hospitals) {
    if (hospitals.empty()) throw std::invalid_argument("no hospitals");
    for (const HospitalNode& node : hospitals) {
        if (node.local_data.empty()) {
            throw std::invalid_argument("hospital " + std::to_string(node.id) +
                                        ": no local data");
        }
        if (node.sample_count != node.local_data.size()) {
            throw std::invalid_argument("hospital " + std::to_string(node.id) +
                                        ": sample_count out of sync with local data");
        }
    }
}

FineTuneResult tune_client(const HospitalNode& node, const ParameterVector& broadcast,
                           const ModelSpec& spec, const TrainSettings& settings) {
    try {
        return fine_tune(broadcast, spec, node.local_data, settings);
    } catch (const std::exception& e) {
        throw std::runtime_error("hospital " + std::to_string(node.id) + ": " + e.what());
    }
}

struct RoundStats {
    double weighted_loss = 0.0;
    double total_n = 0.0;
};

// One federated-averaging round over `members` (already in ascending id
// order): broadcast, local fine-tunes (optionally concurrent), then
// aggregation in member order. Serial and parallel execution produce the
// same bits because per-client work is pure and the fold order is fixed.
void client_round(const std::vector<const HospitalNode*>& members, ParameterVector& model,
                  const ModelSpec& spec, const TrainSettings& settings, bool parallel,
                  std::size_t round, TrainingTrace& trace, RoundStats& stats) {
    const ParameterVector broadcast = model;
    std::vector<FineTuneResult> results(members.size());
    if (parallel && members.size() > 1) {
        std::vector<std::future<FineTuneResult>> futures;
        futures.reserve(members.size());
        for (const HospitalNode* node : members) {
            futures.push_back(std::async(std::launch::async, [&broadcast, &spec, &settings,
                                                              node] {
                return tune_client(*node, broadcast, spec, settings);
            }));
        }
        for (std::size_t i = 0; i < members.size(); ++i) results[i] = futures[i].get();
    } else {
        for (std::size_t i = 0; i < members.size(); ++i) {
            results[i] = tune_client(*members[i], broadcast, spec, settings);
        }
    }

    double cumulative = 0.0;
    for (std::size_t i = 0; i < members.size(); ++i) {
        const double n = static_cast<double>(members[i]->sample_count);
        weighted_average_into(model, cumulative, results[i].params, n);
        cumulative += n;
        trace.records.push_back({round, RecordKind::update, members[i]->id,
                                 results[i].mean_loss_after, results[i].train_accuracy_after,
                                 modeled_update_ms(members[i]->sample_count,
                                                   settings.local_epochs, spec,
                                                   broadcast.frozen_base)});
        stats.weighted_loss += n * results[i].mean_loss_after;
        stats.total_n += n;
    }
}

bool trace_converged(const TrainingTrace& trace, const ConvergenceSettings& settings) {
    const auto losses = trace.eval_losses();
    if (losses.size() < 2) return false;
    return detect_convergence(losses, trace.eval_accuracies(), settings).has_value();
}

std::vector<double> label_histogram(const HospitalNode& node, std::size_t num_classes) {
    std::vector<double> hist(num_classes, 0.0);
    for (const Sample& s : node.local_data.samples) {
        hist[static_cast<std::size_t>(s.label)] += 1.0;
    }
    const double n = static_cast<double>(node.local_data.size());
    for (double& v : hist) v /= n;
    return hist;
}

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = a[i] - b[i];
        d += diff * diff;
    }
    return d;
}

}  // namespace

HospitalNode make_hospital(int id, Dataset data) {
    HospitalNode node;
    node.id = id;
    node.sample_count = data.size();
    node.local_data = std::move(data);
    return node;
}

void twin_sync(HospitalNode& node, const std::vector<Sample>& new_samples) {
    const std::size_t dim = node.local_data.feature_dim();
    const int num_classes = static_cast<int>(node.local_data.num_classes());
    for (const Sample& s : new_samples) {
        if (s.features.size() != dim) {
            throw std::invalid_argument("twin_sync: sample has " +
                                        std::to_string(s.features.size()) +
                                        " features, hospital data has " + std::to_string(dim));
        }
        if (s.label < 0 || s.label >= num_classes) {
            throw std::invalid_argument("twin_sync: label " + std::to_string(s.label) +
                                        " out of range");
        }
    }
    node.twin_buffer.insert(node.twin_buffer.end(), new_samples.begin(), new_samples.end());
}

void merge_twin_buffer(HospitalNode& node) {
    if (!node.twin_buffer.empty()) {
        node.local_data.samples.insert(node.local_data.samples.end(), node.twin_buffer.begin(),
                                       node.twin_buffer.end());
        node.twin_buffer.clear();
    }
    node.sample_count = node.local_data.size();
}

std::vector<double> TrainingTrace::eval_losses() const {
    std::vector<double> out;
    for (const TraceRecord& rec : records) {
        if (rec.kind == RecordKind::eval) out.push_back(rec.loss);
    }
    return out;
}

std::vector<double> TrainingTrace::eval_accuracies() const {
    std::vector<double> out;
    for (const TraceRecord& rec : records) {
        if (rec.kind == RecordKind::eval) out.push_back(rec.accuracy);
    }
    return out;
}

double modeled_update_ms(std::size_t samples, std::size_t epochs, const ModelSpec& spec,
                         bool frozen_base) {
    const double p = static_cast<double>(spec.layout().total());
    const double trainable =
        frozen_base ? static_cast<double>(spec.head_param_count()) : p;
    const double n = static_cast<double>(samples);
    // per sample per epoch: one forward (2p) and one backward+step (4 x trainable),
    // plus the two full-data loss passes around the run
    const double flops = n * static_cast<double>(epochs) * (2.0 * p + 4.0 * trainable) +
                         4.0 * n * p;
    return flops / 1e6;
}

double modeled_eval_ms(std::size_t samples, const ModelSpec& spec) {
    return static_cast<double>(samples) * 2.0 * static_cast<double>(spec.layout().total()) / 1e6;
}

ConvergenceSummary summarize_convergence(const TrainingTrace& trace,
                                         const ConvergenceSettings& settings) {
    const auto losses = trace.eval_losses();
    if (losses.size() < 2) return {};
    const auto round = detect_convergence(losses, trace.eval_accuracies(), settings);
    if (!round) return {};
    ConvergenceSummary summary;
    summary.round = round;
    for (const TraceRecord& rec : trace.records) {
        if (rec.round <= *round) summary.elapsed_ms += rec.elapsed_ms;
    }
    return summary;
}

FineTuneResult local_update(HospitalNode& node, const ParameterVector& w_minus,
                            const ModelSpec& spec, const TrainSettings& settings) {
    if (node.local_data.empty()) {
        throw std::invalid_argument("hospital " + std::to_string(node.id) + ": no local data");
    }
    // hospital server -> digital twin: the twin mirrors the received model,
    // fine-tunes it on the local data, and hands the result back
    node.twin_params = w_minus;
    return tune_client(node, w_minus, spec, settings);
}

GlobalModelState f_weight(GlobalModelState state, const ParameterVector& w_plus,
                          std::size_t n_i) {
    if (n_i < 1) throw std::invalid_argument("hospital weight n_i must be >= 1");
    check_layout(state.w_global, w_plus);
    weighted_average_into(state.w_global, state.cumulative_weight, w_plus,
                          static_cast<double>(n_i));
    state.cumulative_weight += static_cast<double>(n_i);
    return state;
}

ParameterVector fedavg_aggregate(
    const std::vector<std::pair<ParameterVector, std::size_t>>& updates) {
    if (updates.empty()) throw std::invalid_argument("no client updates to aggregate");
    ParameterVector out = updates.front().first;
    double cumulative = 0.0;
    for (const auto& [params, n] : updates) {
        if (n < 1) throw std::invalid_argument("client weight must be >= 1");
        check_layout(out, params);
        weighted_average_into(out, cumulative, params, static_cast<double>(n));
        cumulative += static_cast<double>(n);
    }
    return out;
}

FtlResult run_ftl(std::vector<HospitalNode>& hospitals, const ModelSpec& spec,
                  const TrainSettings& settings, const ParameterVector& pretrained,
                  const Dataset& test_set, const FtlOptions& options) {
    check_hospitals(hospitals);
    validate(pretrained, spec);
    if (!pretrained.frozen_base) {
        throw std::invalid_argument("run_ftl expects pretrained parameters with a frozen base");
    }
    if (test_set.empty()) throw std::invalid_argument("empty held-out test set");
    if (options.max_cycles < 1) throw std::invalid_argument("max_cycles must be >= 1");
    const auto order = order_by_id(hospitals);

    GlobalModelState state;
    state.w_global = pretrained;
    TrainingTrace trace;

    for (std::size_t cycle = 0; cycle < options.max_cycles; ++cycle) {
        try {
            for (const std::size_t idx : order) merge_twin_buffer(hospitals[idx]);
            state.remaining.clear();
            for (const std::size_t idx : order) state.remaining.push_back(hospitals[idx].id);
            state.cumulative_weight = 0.0;

            RoundStats stats;
            for (const std::size_t idx : order) {
                HospitalNode& node = hospitals[idx];
                const FineTuneResult result = local_update(node, state.w_global, spec, settings);
                state = f_weight(std::move(state), result.params, node.sample_count);
                std::erase(state.remaining, node.id);
                const double n = static_cast<double>(node.sample_count);
                trace.records.push_back({cycle, RecordKind::update, node.id,
                                         result.mean_loss_after, result.train_accuracy_after,
                                         modeled_update_ms(node.sample_count,
                                                           settings.local_epochs, spec, true)});
                stats.weighted_loss += n * result.mean_loss_after;
                stats.total_n += n;
            }

            const EvalResult eval = evaluate(state.w_global, spec, test_set);
            trace.records.push_back({cycle, RecordKind::eval, -1,
                                     stats.weighted_loss / stats.total_n, eval.accuracy,
                                     modeled_eval_ms(test_set.size(), spec)});
        } catch (const std::exception& e) {
            throw std::runtime_error("round " + std::to_string(cycle) + ": " + e.what());
        }
        state.round_index = cycle + 1;
        if (options.on_round_model) options.on_round_model(cycle, state.w_global);
        if (options.on_cycle_end) options.on_cycle_end(cycle, hospitals);
        if (trace_converged(trace, options.convergence)) break;
    }
    return {std::move(state.w_global), std::move(trace)};
}

FedAvgResult run_fedavg(const std::vector<HospitalNode>& hospitals, const ModelSpec& spec,
                        const TrainSettings& settings, const ParameterVector& init,
                        const Dataset& test_set, const FedAvgOptions& options) {
    check_hospitals(hospitals);
    validate(init, spec);
    if (test_set.empty()) throw std::invalid_argument("empty held-out test set");
    if (options.max_rounds < 1) throw std::invalid_argument("max_rounds must be >= 1");
    const auto order = order_by_id(hospitals);
    std::vector<const HospitalNode*> members;
    for (const std::size_t idx : order) members.push_back(&hospitals[idx]);

    ParameterVector model = init;
    TrainingTrace trace;
    for (std::size_t round = 0; round < options.max_rounds; ++round) {
        try {
            RoundStats stats;
            client_round(members, model, spec, settings, options.parallel_clients, round,
                         trace, stats);
            const EvalResult eval = evaluate(model, spec, test_set);
            trace.records.push_back({round, RecordKind::eval, -1,
                                     stats.weighted_loss / stats.total_n, eval.accuracy,
                                     modeled_eval_ms(test_set.size(), spec)});
        } catch (const std::exception& e) {
            throw std::runtime_error("round " + std::to_string(round) + ": " + e.what());
        }
        if (trace_converged(trace, options.convergence)) break;
    }
    return {std::move(model), std::move(trace)};
}

ClusterAssignment cluster_clients(const std::vector<HospitalNode>& hospitals, std::size_t k) {
    check_hospitals(hospitals);
    const std::size_t count = hospitals.size();
    if (k < 1 || k > count) {
        throw std::invalid_argument("cluster count k must lie in [1, " + std::to_string(count) +
                                    "]");
    }
    const auto order = order_by_id(hospitals);
    const std::size_t num_classes = hospitals.front().local_data.num_classes();
    for (const HospitalNode& node : hospitals) {
        if (node.local_data.num_classes() != num_classes) {
            throw std::invalid_argument("hospitals disagree on the class set");
        }
    }

    ClusterAssignment out;
    out.num_clusters = k;
    out.cluster_of.assign(count, 0);
    if (k == 1) return out;
    if (k == count) {
        for (std::size_t rank = 0; rank < count; ++rank) {
            out.cluster_of[order[rank]] = static_cast<int>(rank);
        }
        return out;
    }

    std::vector<std::vector<double>> hist(count);
    for (std::size_t i = 0; i < count; ++i) hist[i] = label_histogram(hospitals[i], num_classes);

    // farthest-point seeding from the lowest id; ties keep the lowest id
    std::vector<std::vector<double>> centroids;
    std::vector<bool> chosen(count, false);
    std::vector<double> nearest(count, std::numeric_limits<double>::infinity());
    centroids.push_back(hist[order[0]]);
    chosen[order[0]] = true;
    for (std::size_t i = 0; i < count; ++i) nearest[i] = sq_dist(hist[i], centroids[0]);
    while (centroids.size() < k) {
        std::size_t best = count;
        for (const std::size_t idx : order) {
            if (chosen[idx]) continue;
            if (best == count || nearest[idx] > nearest[best]) best = idx;
        }
        centroids.push_back(hist[best]);
        chosen[best] = true;
        for (std::size_t i = 0; i < count; ++i) {
            nearest[i] = std::min(nearest[i], sq_dist(hist[i], centroids.back()));
        }
    }

    std::vector<int> assign(count, 0);
    for (std::size_t iter = 0; iter < 20; ++iter) {
        std::vector<int> next(count, 0);
        for (std::size_t i = 0; i < count; ++i) {
            std::size_t best = 0;
            double best_d = sq_dist(hist[i], centroids[0]);
            for (std::size_t c = 1; c < k; ++c) {
                const double d = sq_dist(hist[i], centroids[c]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            next[i] = static_cast<int>(best);
        }

        // an empty cluster steals the farthest member of the fullest one
        std::vector<std::size_t> sizes(k, 0);
        for (const int c : next) ++sizes[static_cast<std::size_t>(c)];
        for (std::size_t c = 0; c < k; ++c) {
            if (sizes[c] != 0) continue;
            std::size_t donor = 0;
            for (std::size_t d = 1; d < k; ++d) {
                if (sizes[d] > sizes[donor]) donor = d;
            }
            std::size_t steal = count;
            for (const std::size_t idx : order) {
                if (next[idx] != static_cast<int>(donor)) continue;
                if (steal == count ||
                    sq_dist(hist[idx], centroids[donor]) > sq_dist(hist[steal], centroids[donor])) {
                    steal = idx;
                }
            }
            next[steal] = static_cast<int>(c);
            --sizes[donor];
            ++sizes[c];
        }

        for (std::size_t c = 0; c < k; ++c) {
            std::vector<double> mean(num_classes, 0.0);
            for (const std::size_t idx : order) {
                if (next[idx] != static_cast<int>(c)) continue;
                for (std::size_t j = 0; j < num_classes; ++j) mean[j] += hist[idx][j];
            }
            for (std::size_t j = 0; j < num_classes; ++j) {
                mean[j] /= static_cast<double>(sizes[c]);
            }
            centroids[c] = std::move(mean);
        }

        const bool stable = next == assign;
        assign = std::move(next);
        if (stable) break;
    }

    out.cluster_of = std::move(assign);
    return out;
}

int route_cluster(const std::vector<std::vector<double>>& centroids, int true_label) {
    if (centroids.empty()) throw std::invalid_argument("no cluster centroids");
    const std::size_t num_classes = centroids.front().size();
    if (true_label < 0 || true_label >= static_cast<int>(num_classes)) {
        throw std::invalid_argument("label out of range for routing");
    }
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        double d = 0.0;
        for (std::size_t j = 0; j < num_classes; ++j) {
            const double diff =
                centroids[c][j] - (static_cast<int>(j) == true_label ? 1.0 : 0.0);
            d += diff * diff;
        }
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return static_cast<int>(best);
}

CflResult run_cfl(const std::vector<HospitalNode>& hospitals, const ModelSpec& spec,
                  const TrainSettings& settings, const ParameterVector& init,
                  const Dataset& test_set, std::size_t k, const CflOptions& options) {
    check_hospitals(hospitals);
    validate(init, spec);
    if (test_set.empty()) throw std::invalid_argument("empty held-out test set");
    if (options.max_rounds < 1) throw std::invalid_argument("max_rounds must be >= 1");

    CflResult result;
    result.assignment = cluster_clients(hospitals, k);

    const auto order = order_by_id(hospitals);
    const std::size_t num_classes = hospitals.front().local_data.num_classes();
    std::vector<std::vector<const HospitalNode*>> members(k);
    for (const std::size_t idx : order) {
        members[static_cast<std::size_t>(result.assignment.cluster_of[idx])].push_back(
            &hospitals[idx]);
    }

    result.centroids.assign(k, std::vector<double>(num_classes, 0.0));
    for (std::size_t c = 0; c < k; ++c) {
        for (const HospitalNode* node : members[c]) {
            const auto hist = label_histogram(*node, num_classes);
            for (std::size_t j = 0; j < num_classes; ++j) result.centroids[c][j] += hist[j];
        }
        for (std::size_t j = 0; j < num_classes; ++j) {
            result.centroids[c][j] /= static_cast<double>(members[c].size());
        }
    }

    result.cluster_models.assign(k, init);
    TrainingTrace trace;
    for (std::size_t round = 0; round < options.max_rounds; ++round) {
        try {
            RoundStats stats;
            for (std::size_t c = 0; c < k; ++c) {
                client_round(members[c], result.cluster_models[c], spec, settings,
                             options.parallel_clients, round, trace, stats);
            }
            std::size_t correct = 0;
            for (const Sample& sample : test_set.samples) {
                const int cluster = route_cluster(result.centroids, sample.label);
                const auto probs = forward(result.cluster_models[static_cast<std::size_t>(cluster)],
                                           spec, sample.features);
                if (predict_class(probs) == sample.label) ++correct;
            }
            const double accuracy =
                static_cast<double>(correct) / static_cast<double>(test_set.size());
            trace.records.push_back({round, RecordKind::eval, -1,
                                     stats.weighted_loss / stats.total_n, accuracy,
                                     modeled_eval_ms(test_set.size(), spec)});
        } catch (const std::exception& e) {
            throw std::runtime_error("round " + std::to_string(round) + ": " + e.what());
        }
        if (trace_converged(trace, options.convergence)) break;
    }
    result.trace = std::move(trace);
    return result;
}

}  // namespace ftlsim
