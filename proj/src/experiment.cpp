#include "ftlsim/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <numeric>
#include <sstream>

#include "ftlsim/kernels.hpp"

namespace ftlsim {

namespace {

constexpr std::string_view kVersion = "1.0.0";

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t");
    return s.substr(first, last - first + 1);
}

std::uint64_t parse_u64(const std::string& value, const std::string& where,
                        const std::string& key) {
    if (value.empty() || value[0] == '-' || value[0] == '+') {
        throw ConfigError(where + ": invalid integer '" + value + "' for " + key);
    }
    errno = 0;
    char* end = nullptr;
    const unsigned long long x = std::strtoull(value.c_str(), &end, 10);
    if (end != value.c_str() + value.size() || errno == ERANGE) {
        throw ConfigError(where + ": invalid integer '" + value + "' for " + key);
    }
    return x;
}

double parse_double(const std::string& value, const std::string& where, const std::string& key) {
    if (value.empty()) throw ConfigError(where + ": invalid number '' for " + key);
    char* end = nullptr;
    const double x = std::strtod(value.c_str(), &end);
    if (end != value.c_str() + value.size() || !std::isfinite(x)) {
        throw ConfigError(where + ": invalid number '" + value + "' for " + key);
    }
    return x;
}

bool parse_bool(const std::string& value, const std::string& where, const std::string& key) {
    std::string v = value;
    for (char& c : v) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(where + ": invalid boolean '" + value + "' for " + key);
}

std::vector<std::size_t> parse_counts(const std::string& value, const std::string& where,
                                      const std::string& key) {
    std::vector<std::size_t> counts;
    std::size_t start = 0;
    while (start <= value.size()) {
        const auto pos = value.find(',', start);
        const std::string item =
            trim(value.substr(start, pos == std::string::npos ? pos : pos - start));
        counts.push_back(static_cast<std::size_t>(parse_u64(item, where, key)));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return counts;
}

void apply_key(ExperimentConfig& cfg, const std::string& key, const std::string& value,
               const std::string& where) {
    if (key == "method") {
        try {
            cfg.method = parse_method(value);
        } catch (const ConfigError& e) {
            throw ConfigError(where + ": " + e.what());
        }
    } else if (key == "data") {
        if (value == "synthetic") {
            cfg.data = DataSource::synthetic;
        } else if (value == "csv") {
            cfg.data = DataSource::csv;
        } else {
            throw ConfigError(where + ": unknown data source '" + value +
                              "' (expected synthetic or csv)");
        }
    } else if (key == "csv_path") {
        cfg.csv_path = value;
    } else if (key == "csv_test_fraction") {
        cfg.csv_test_fraction = parse_double(value, where, key);
    } else if (key == "num_classes") {
        cfg.num_classes = parse_u64(value, where, key);
    } else if (key == "input_dim") {
        cfg.input_dim = parse_u64(value, where, key);
    } else if (key == "hidden_dim") {
        cfg.hidden_dim = parse_u64(value, where, key);
    } else if (key == "train_counts") {
        cfg.train_counts = parse_counts(value, where, key);
    } else if (key == "test_counts") {
        cfg.test_counts = parse_counts(value, where, key);
    } else if (key == "class_separation") {
        cfg.class_separation = parse_double(value, where, key);
    } else if (key == "noise_std") {
        cfg.noise_std = parse_double(value, where, key);
    } else if (key == "num_hospitals") {
        cfg.num_hospitals = parse_u64(value, where, key);
    } else if (key == "dirichlet_alpha") {
        cfg.dirichlet_alpha = parse_double(value, where, key);
    } else if (key == "learning_rate") {
        cfg.learning_rate = parse_double(value, where, key);
    } else if (key == "local_epochs") {
        cfg.local_epochs = parse_u64(value, where, key);
    } else if (key == "batch_size") {
        cfg.batch_size = parse_u64(value, where, key);
    } else if (key == "cfl_clusters" || key == "k") {
        cfg.cfl_clusters = parse_u64(value, where, key);
    } else if (key == "max_rounds" || key == "max_cycles") {
        cfg.max_rounds = parse_u64(value, where, key);
    } else if (key == "loss_epsilon") {
        cfg.convergence.loss_epsilon = parse_double(value, where, key);
    } else if (key == "accuracy_epsilon") {
        cfg.convergence.accuracy_epsilon = parse_double(value, where, key);
    } else if (key == "patience") {
        cfg.convergence.patience = parse_u64(value, where, key);
    } else if (key == "pretrain_per_class") {
        cfg.pretrain_per_class = parse_u64(value, where, key);
    } else if (key == "pretrain_epochs") {
        cfg.pretrain_epochs = parse_u64(value, where, key);
    } else if (key == "streaming_per_cycle") {
        cfg.streaming_per_cycle = parse_u64(value, where, key);
    } else if (key == "baselines_use_pretrained") {
        cfg.baselines_use_pretrained = parse_bool(value, where, key);
    } else if (key == "parallel_clients") {
        cfg.parallel_clients = parse_bool(value, where, key);
    } else if (key == "seed") {
        cfg.seed = parse_u64(value, where, key);
    } else if (key == "out_dir") {
        cfg.out_dir = value;
    } else {
        throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

std::string hex16(std::uint64_t x) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(x));
    return buf;
}

std::vector<int> predict_all(const ParameterVector& model, const ModelSpec& spec,
                             const Dataset& test_set) {
    std::vector<int> preds;
    preds.reserve(test_set.size());
    for (const Sample& s : test_set.samples) {
        preds.push_back(predict_class(forward(model, spec, s.features)));
    }
    return preds;
}

std::vector<int> predict_routed(const std::vector<ParameterVector>& models,
                                const std::vector<std::vector<double>>& centroids,
                                const ModelSpec& spec, const Dataset& test_set) {
    std::vector<int> preds;
    preds.reserve(test_set.size());
    for (const Sample& s : test_set.samples) {
        const auto cluster = static_cast<std::size_t>(route_cluster(centroids, s.label));
        preds.push_back(predict_class(forward(models[cluster], spec, s.features)));
    }
    return preds;
}

std::vector<int> test_labels(const Dataset& test_set) {
    std::vector<int> labels;
    labels.reserve(test_set.size());
    for (const Sample& s : test_set.samples) labels.push_back(s.label);
    return labels;
}

std::string undefined_marker(const MetricsReport& metrics, std::size_t c) {
    const bool p = metrics.precision[c].undefined;
    const bool r = metrics.recall[c].undefined;
    if (p && r) return "precision+recall";
    if (p) return "precision";
    if (r) return "recall";
    return "";
}

}  // namespace

std::string_view method_name(Method m) {
    switch (m) {
        case Method::fl: return "fl";
        case Method::cfl: return "cfl";
        case Method::ftl: return "ftl";
        case Method::all: return "all";
    }
    return "unknown";
}

Method parse_method(const std::string& name) {
    if (name == "fl") return Method::fl;
    if (name == "cfl") return Method::cfl;
    if (name == "ftl") return Method::ftl;
    if (name == "all") return Method::all;
    throw ConfigError("unknown method '" + name + "' (expected fl, cfl, ftl, or all)");
}

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto comment = line.find('#');
        if (comment != std::string::npos) line.erase(comment);
        const std::string content = trim(line);
        if (content.empty()) continue;
        const std::string where = "line " + std::to_string(line_no);
        const auto eq = content.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected `key = value`");
        const std::string key = trim(content.substr(0, eq));
        const std::string value = trim(content.substr(eq + 1));
        if (key.empty()) throw ConfigError(where + ": empty key");
        apply_key(cfg, key, value, where);
    }
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    ExperimentConfig cfg = parse_config_text(text);
    cfg.config_hash = fnv1a64(text);
    return cfg;
}

void validate_config(const ExperimentConfig& config) {
    if (!config.seed.has_value()) {
        throw ConfigError("seed is required (set `seed = <integer>` or pass --seed)");
    }
    if (config.num_classes < 2) throw ConfigError("num_classes must be >= 2");
    if (config.hidden_dim < 1) throw ConfigError("hidden_dim must be >= 1");
    if (config.num_hospitals < 1) throw ConfigError("num_hospitals must be >= 1");
    if (!(config.dirichlet_alpha > 0.0)) throw ConfigError("dirichlet_alpha must be positive");
    if (config.learning_rate < 0.0) throw ConfigError("learning_rate must be nonnegative");
    if (config.local_epochs < 1) throw ConfigError("local_epochs must be >= 1");
    if (config.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (config.max_rounds < 1) throw ConfigError("max_rounds must be >= 1");
    if (config.convergence.patience < 1) throw ConfigError("patience must be >= 1");
    if (!(config.convergence.loss_epsilon > 0.0) || !(config.convergence.accuracy_epsilon > 0.0)) {
        throw ConfigError("convergence epsilons must be positive");
    }
    if (config.out_dir.empty()) throw ConfigError("out_dir must not be empty");

    const bool runs_cfl = config.method == Method::cfl || config.method == Method::all;
    const bool runs_ftl = config.method == Method::ftl || config.method == Method::all;
    if (runs_cfl &&
        (config.cfl_clusters < 1 || config.cfl_clusters > config.num_hospitals)) {
        throw ConfigError("cfl_clusters must lie in [1, num_hospitals]");
    }
    if (runs_ftl) {
        if (config.pretrain_per_class < 1) throw ConfigError("pretrain_per_class must be >= 1");
        if (config.pretrain_epochs < 1) throw ConfigError("pretrain_epochs must be >= 1");
    }

    if (config.data == DataSource::synthetic) {
        if (!config.csv_path.empty()) {
            throw ConfigError("exactly one data source: csv_path is set but data = synthetic");
        }
        if (config.input_dim < 1) throw ConfigError("input_dim must be >= 1");
        if (config.train_counts.size() != config.num_classes ||
            config.test_counts.size() != config.num_classes) {
            throw ConfigError("train_counts and test_counts must list one count per class");
        }
        std::size_t train_total = 0, test_total = 0;
        for (const std::size_t c : config.train_counts) train_total += c;
        for (const std::size_t c : config.test_counts) test_total += c;
        if (test_total == 0) throw ConfigError("test_counts sum to zero");
        if (train_total < config.num_hospitals) {
            throw ConfigError("train_counts must provide at least one sample per hospital");
        }
        if (!(config.class_separation > 0.0)) {
            throw ConfigError("class_separation must be positive");
        }
        if (!(config.noise_std > 0.0)) throw ConfigError("noise_std must be positive");
    } else {
        if (config.csv_path.empty()) throw ConfigError("data = csv requires csv_path");
        if (!(config.csv_test_fraction > 0.0 && config.csv_test_fraction < 1.0)) {
            throw ConfigError("csv_test_fraction must lie in (0, 1)");
        }
        if (config.streaming_per_cycle > 0) {
            throw ConfigError("streaming_per_cycle requires synthetic data");
        }
    }
}

std::vector<MethodOutcome> execute_methods(const ExperimentConfig& config) {
    validate_config(config);
    const std::uint64_t seed = *config.seed;
    const std::uint64_t data_seed = derive_seed(seed, 1);
    const std::uint64_t partition_seed = derive_seed(seed, 2);
    const std::uint64_t init_seed = derive_seed(seed, 3);
    const std::uint64_t pretrain_data_seed = derive_seed(seed, 4);
    const std::uint64_t pretrain_seed = derive_seed(seed, 5);
    const std::uint64_t train_seed = derive_seed(seed, 6);
    const std::uint64_t stream_seed = derive_seed(seed, 7);
    const std::uint64_t split_seed = derive_seed(seed, 8);

    Dataset train_pool, test_set;
    if (config.data == DataSource::synthetic) {
        SynthConfig synth;
        synth.num_classes = config.num_classes;
        synth.input_dim = config.input_dim;
        synth.class_separation = config.class_separation;
        synth.noise_std = config.noise_std;
        synth.seed = data_seed;
        synth.class_counts.resize(config.num_classes);
        for (std::size_t c = 0; c < config.num_classes; ++c) {
            synth.class_counts[c] = config.train_counts[c] + config.test_counts[c];
        }
        // one generator pass so train and test share class means
        Dataset all = generate_synthetic(synth);
        train_pool.class_names = test_set.class_names = all.class_names;
        train_pool.provenance = test_set.provenance = all.provenance;
        std::vector<std::size_t> taken(config.num_classes, 0);
        for (Sample& s : all.samples) {
            const auto c = static_cast<std::size_t>(s.label);
            if (taken[c] < config.train_counts[c]) {
                ++taken[c];
                train_pool.samples.push_back(std::move(s));
            } else {
                test_set.samples.push_back(std::move(s));
            }
        }
    } else {
        Dataset all = load_csv(config.csv_path, config.num_classes);
        if (all.size() < 2) throw ConfigError("csv dataset too small to split");
        std::vector<std::size_t> indices(all.size());
        std::iota(indices.begin(), indices.end(), std::size_t{0});
        Rng rng(split_seed);
        rng.shuffle(indices);
        auto test_n = static_cast<std::size_t>(
            std::llround(static_cast<double>(all.size()) * config.csv_test_fraction));
        test_n = std::clamp<std::size_t>(test_n, 1, all.size() - 1);
        train_pool.class_names = test_set.class_names = all.class_names;
        train_pool.provenance = test_set.provenance = all.provenance;
        for (std::size_t i = 0; i < indices.size(); ++i) {
            auto& dst = i < test_n ? test_set : train_pool;
            dst.samples.push_back(std::move(all.samples[indices[i]]));
        }
    }
    if (train_pool.empty() || test_set.empty()) {
        throw ConfigError("data split produced an empty train or test set");
    }

    ModelSpec spec;
    spec.input_dim = train_pool.feature_dim();
    spec.hidden_dim = config.hidden_dim;
    spec.num_classes = config.num_classes;
    const TrainSettings settings{config.learning_rate, config.local_epochs, config.batch_size,
                                 train_seed};

    auto shards =
        partition_dirichlet(train_pool, config.num_hospitals, config.dirichlet_alpha,
                            partition_seed);
    std::vector<HospitalNode> nodes;
    nodes.reserve(shards.size());
    for (std::size_t i = 0; i < shards.size(); ++i) {
        nodes.push_back(make_hospital(static_cast<int>(i), std::move(shards[i])));
    }

    std::vector<Method> methods;
    if (config.method == Method::all) {
        methods = {Method::fl, Method::cfl, Method::ftl};
    } else {
        methods = {config.method};
    }
    const bool runs_ftl =
        std::find(methods.begin(), methods.end(), Method::ftl) != methods.end();
    const bool runs_baseline = methods.front() != Method::ftl || methods.size() > 1;

    ParameterVector pretrained;
    if (runs_ftl || config.baselines_use_pretrained) {
        // Source domain: same class geometry as the target (related modality),
        // disjoint sample stream. CSV targets have no known geometry, so the
        // source falls back to its own.
        const std::uint64_t geometry_seed =
            config.data == DataSource::synthetic ? data_seed : pretrain_data_seed;
        Rng geometry_rng(geometry_seed);
        const auto means = draw_class_means(geometry_rng, config.num_classes, spec.input_dim,
                                            config.class_separation);
        Rng sample_rng(pretrain_data_seed);
        Dataset source;
        source.provenance = Provenance::synthetic;
        source.class_names = default_class_names(config.num_classes);
        for (std::size_t c = 0; c < config.num_classes; ++c) {
            for (std::size_t i = 0; i < config.pretrain_per_class; ++i) {
                source.samples.push_back(
                    draw_sample(sample_rng, means[c], config.noise_std, static_cast<int>(c)));
            }
        }
        const TrainSettings pretrain_settings{config.learning_rate, config.pretrain_epochs,
                                              config.batch_size, pretrain_seed};
        pretrained = pretrain_base(spec, source, pretrain_settings);
    }

    ParameterVector baseline_init;
    if (runs_baseline) {
        if (config.baselines_use_pretrained) {
            baseline_init = pretrained;
            baseline_init.frozen_base = false;
        } else {
            baseline_init = init_params(spec, init_seed);
        }
    }

    const auto labels = test_labels(test_set);
    std::vector<MethodOutcome> outcomes;
    for (const Method m : methods) {
        try {
            MethodOutcome outcome;
            outcome.method = m;
            std::vector<int> preds;
            if (m == Method::fl) {
                const FedAvgOptions options{config.max_rounds, config.convergence,
                                            config.parallel_clients};
                FedAvgResult res =
                    run_fedavg(nodes, spec, settings, baseline_init, test_set, options);
                preds = predict_all(res.model, spec, test_set);
                outcome.trace = std::move(res.trace);
            } else if (m == Method::cfl) {
                const CflOptions options{config.max_rounds, config.convergence,
                                         config.parallel_clients};
                CflResult res = run_cfl(nodes, spec, settings, baseline_init, test_set,
                                        config.cfl_clusters, options);
                preds = predict_routed(res.cluster_models, res.centroids, spec, test_set);
                outcome.trace = std::move(res.trace);
            } else {
                FtlOptions options;
                options.max_cycles = config.max_rounds;
                options.convergence = config.convergence;
                if (config.streaming_per_cycle > 0) {
                    auto stream_rng = std::make_shared<Rng>(stream_seed);
                    auto means = std::make_shared<const std::vector<std::vector<double>>>([&] {
                        Rng geometry_rng(data_seed);
                        return draw_class_means(geometry_rng, config.num_classes,
                                                config.input_dim, config.class_separation);
                    }());
                    const std::size_t per = config.streaming_per_cycle;
                    const std::size_t num_classes = config.num_classes;
                    const double noise = config.noise_std;
                    options.on_cycle_end = [stream_rng, means, per, num_classes,
                                            noise](std::size_t, std::vector<HospitalNode>& hs) {
                        for (HospitalNode& node : hs) {
                            std::vector<Sample> fresh;
                            fresh.reserve(per);
                            for (std::size_t i = 0; i < per; ++i) {
                                const int label =
                                    static_cast<int>(stream_rng->below(num_classes));
                                fresh.push_back(draw_sample(
                                    *stream_rng, (*means)[static_cast<std::size_t>(label)],
                                    noise, label));
                            }
                            twin_sync(node, fresh);
                        }
                    };
                }
                auto ftl_nodes = nodes;  // twin state stays private to this run
                FtlResult res =
                    run_ftl(ftl_nodes, spec, settings, pretrained, test_set, options);
                preds = predict_all(res.model, spec, test_set);
                outcome.trace = std::move(res.trace);
            }
            outcome.confusion =
                confusion_matrix(preds, labels, config.num_classes, test_set.class_names);
            outcome.metrics = report(outcome.confusion);
            outcome.convergence = summarize_convergence(outcome.trace, config.convergence);
            outcomes.push_back(std::move(outcome));
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw std::runtime_error(std::string(method_name(m)) + ": " + e.what());
        }
    }
    return outcomes;
}

std::string format_fixed4(double x) {
    const long long scaled = std::llround(x * 10000.0);
    const unsigned long long magnitude =
        scaled < 0 ? static_cast<unsigned long long>(-(scaled + 1)) + 1ULL
                   : static_cast<unsigned long long>(scaled);
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%s%llu.%04llu", scaled < 0 ? "-" : "", magnitude / 10000ULL,
                  magnitude % 10000ULL);
    return buf;
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (const unsigned char b : bytes) {
        h ^= b;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string trace_csv(const TrainingTrace& trace) {
    std::string out = "round,actor_id,loss,accuracy,elapsed_ms\n";
    for (const TraceRecord& rec : trace.records) {
        out += std::to_string(rec.round);
        out += ',';
        out += std::to_string(rec.actor_id);
        out += ',';
        out += format_fixed4(rec.loss);
        out += ',';
        out += format_fixed4(rec.accuracy);
        out += ',';
        out += format_fixed4(rec.elapsed_ms);
        out += '\n';
    }
    return out;
}

std::string confusion_csv(const ConfusionMatrix& cm) {
    std::string out = "class";
    for (const std::string& name : cm.class_names) {
        out += ',';
        out += name;
    }
    out += '\n';
    for (std::size_t t = 0; t < cm.num_classes; ++t) {
        out += cm.class_names[t];
        for (std::size_t p = 0; p < cm.num_classes; ++p) {
            out += ',';
            out += std::to_string(cm.at(t, p));
        }
        out += '\n';
    }
    return out;
}

std::string metrics_csv(const MetricsReport& metrics) {
    std::string out = "class,support,precision,recall,f1,accuracy,undefined\n";
    long long total = 0;
    for (std::size_t c = 0; c < metrics.class_names.size(); ++c) {
        total += metrics.support[c];
        out += metrics.class_names[c];
        out += ',';
        out += std::to_string(metrics.support[c]);
        out += ',';
        out += format_fixed4(metrics.precision[c].value);
        out += ',';
        out += format_fixed4(metrics.recall[c].value);
        out += ',';
        out += format_fixed4(metrics.f1[c]);
        out += ',';
        out += format_fixed4(metrics.class_accuracy[c]);
        out += ',';
        out += undefined_marker(metrics, c);
        out += '\n';
    }
    out += "overall," + std::to_string(total) + ",,,," + format_fixed4(metrics.overall_accuracy) +
           ",\n";
    return out;
}

ComparisonReport compare_report(std::vector<MethodOutcome> outcomes) {
    if (outcomes.empty()) throw std::invalid_argument("no method outcomes to compare");
    std::stable_sort(outcomes.begin(), outcomes.end(),
                     [](const MethodOutcome& a, const MethodOutcome& b) {
                         return static_cast<int>(a.method) < static_cast<int>(b.method);
                     });

    std::string csv =
        "method,class,support,precision,recall,f1,overall_accuracy,convergence_round,"
        "convergence_ms\n";
    for (const MethodOutcome& out : outcomes) {
        const std::string m(method_name(out.method));
        long long total = 0;
        for (std::size_t c = 0; c < out.metrics.class_names.size(); ++c) {
            total += out.metrics.support[c];
            csv += m + ',' + out.metrics.class_names[c] + ',' +
                   std::to_string(out.metrics.support[c]) + ',' +
                   format_fixed4(out.metrics.precision[c].value) + ',' +
                   format_fixed4(out.metrics.recall[c].value) + ',' +
                   format_fixed4(out.metrics.f1[c]) + ",,,\n";
        }
        csv += m + ",overall," + std::to_string(total) + ",,,," +
               format_fixed4(out.metrics.overall_accuracy) + ',';
        if (out.convergence.round) {
            csv += std::to_string(*out.convergence.round) + ',' +
                   format_fixed4(out.convergence.elapsed_ms);
        } else {
            csv += ",";
        }
        csv += '\n';
    }

    std::ostringstream text;
    text << "Per-class metrics (one-vs-rest)\n\n";
    text << std::left << std::setw(7) << "method" << std::setw(25) << "class" << std::right
         << std::setw(8) << "support" << std::setw(11) << "precision" << std::setw(9) << "recall"
         << std::setw(9) << "f1" << std::setw(10) << "accuracy" << '\n';
    bool any_undefined = false;
    for (const MethodOutcome& out : outcomes) {
        for (std::size_t c = 0; c < out.metrics.class_names.size(); ++c) {
            std::string p = format_fixed4(out.metrics.precision[c].value);
            std::string r = format_fixed4(out.metrics.recall[c].value);
            if (out.metrics.precision[c].undefined) {
                p += '*';
                any_undefined = true;
            }
            if (out.metrics.recall[c].undefined) {
                r += '*';
                any_undefined = true;
            }
            text << std::left << std::setw(7) << method_name(out.method) << std::setw(25)
                 << out.metrics.class_names[c] << std::right << std::setw(8)
                 << out.metrics.support[c] << std::setw(11) << p << std::setw(9) << r
                 << std::setw(9) << format_fixed4(out.metrics.f1[c]) << std::setw(10)
                 << format_fixed4(out.metrics.class_accuracy[c]) << '\n';
        }
    }

    text << "\nOverall accuracy and convergence\n\n";
    text << std::left << std::setw(7) << "method" << std::right << std::setw(17)
         << "overall_accuracy" << std::setw(17) << "converged_round" << std::setw(17)
         << "convergence_ms" << '\n';
    for (const MethodOutcome& out : outcomes) {
        text << std::left << std::setw(7) << method_name(out.method) << std::right
             << std::setw(17) << format_fixed4(out.metrics.overall_accuracy);
        if (out.convergence.round) {
            text << std::setw(17) << *out.convergence.round << std::setw(17)
                 << format_fixed4(out.convergence.elapsed_ms);
        } else {
            text << std::setw(17) << "-" << std::setw(17) << "-";
        }
        text << '\n';
    }
    if (any_undefined) text << "\n* zero denominator; value reported as 0\n";

    return {text.str(), csv};
}

void run_experiment(const ExperimentConfig& config) {
    validate_config(config);
    const std::vector<MethodOutcome> outcomes = execute_methods(config);

    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(config.out_dir, ec);
    if (ec) {
        throw std::runtime_error("cannot create output directory " + config.out_dir + ": " +
                                 ec.message());
    }
    const auto write_file = [&](const std::string& name, const std::string& content) {
        const fs::path path = fs::path(config.out_dir) / name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("failed writing " + path.string());
    };

    for (const MethodOutcome& outcome : outcomes) {
        const std::string m(method_name(outcome.method));
        write_file("trace_" + m + ".csv", trace_csv(outcome.trace));
        write_file("confusion_" + m + ".csv", confusion_csv(outcome.confusion));
        write_file("metrics_" + m + ".csv", metrics_csv(outcome.metrics));
    }

    const ComparisonReport report = compare_report(outcomes);
    write_file("summary.csv", report.csv);
    write_file("summary.txt", report.text);

    std::string manifest;
    manifest += "config_hash=" + hex16(config.config_hash) + "\n";
    manifest += "seed=" + std::to_string(*config.seed) + "\n";
    manifest += "method=" + std::string(method_name(config.method)) + "\n";
    manifest += "version=" + std::string(kVersion) + "\n";
    manifest +=
        "kernel_backend=" + std::string(kernels::backend_name(kernels::active_backend())) + "\n";
    write_file("manifest.txt", manifest);
}

}  // namespace ftlsim
