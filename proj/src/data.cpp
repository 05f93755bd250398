#include "ftlsim/data.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace ftlsim {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        if (pos == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

void validate_labels(const Dataset& dataset) {
    const int k = static_cast<int>(dataset.num_classes());
    for (std::size_t s = 0; s < dataset.samples.size(); ++s) {
        const int label = dataset.samples[s].label;
        if (label < 0 || label >= k) {
            throw std::invalid_argument("sample " + std::to_string(s) + " has label " +
                                        std::to_string(label) + " outside the " +
                                        std::to_string(k) + "-class label space");
        }
    }
}

}  // namespace

std::vector<std::string> default_class_names(std::size_t num_classes) {
    if (num_classes == 4) {
        return {"Adenocarcinoma", "Large Cell Carcinoma", "Normal",
                "Squamous Cell Carcinoma"};
    }
    std::vector<std::string> names;
    names.reserve(num_classes);
    for (std::size_t c = 0; c < num_classes; ++c) names.push_back("class" + std::to_string(c));
    return names;
}

std::vector<std::vector<double>> draw_class_means(Rng& rng, std::size_t num_classes,
                                                  std::size_t input_dim, double separation) {
    std::vector<std::vector<double>> means(num_classes);
    for (std::size_t c = 0; c < num_classes; ++c) {
        std::vector<double> v(input_dim);
        for (std::size_t d = 0; d < input_dim; ++d) v[d] = rng.normal();
        double norm_sq = 0.0;
        for (std::size_t d = 0; d < input_dim; ++d) norm_sq += v[d] * v[d];
        double norm = std::sqrt(norm_sq);
        if (norm < 1e-12) {
            std::fill(v.begin(), v.end(), 0.0);
            v[0] = 1.0;
            norm = 1.0;
        }
        const double scale = separation / (std::sqrt(2.0) * norm);
        for (std::size_t d = 0; d < input_dim; ++d) v[d] *= scale;
        means[c] = std::move(v);
    }
    return means;
}

Sample draw_sample(Rng& rng, const std::vector<double>& mean, double noise_std, int label) {
    Sample s;
    s.features.resize(mean.size());
    for (std::size_t d = 0; d < mean.size(); ++d) {
        s.features[d] = mean[d] + noise_std * rng.normal();
    }
    s.label = label;
    return s;
}

Dataset generate_synthetic(const SynthConfig& config) {
    if (config.num_classes < 1) throw std::invalid_argument("num_classes must be >= 1");
    if (config.input_dim < 1) throw std::invalid_argument("input_dim must be >= 1");
    if (config.class_counts.size() != config.num_classes) {
        throw std::invalid_argument("class_counts length must equal num_classes");
    }
    if (!(config.class_separation > 0.0)) {
        throw std::invalid_argument("class_separation must be positive");
    }
    if (!(config.noise_std > 0.0)) throw std::invalid_argument("noise_std must be positive");
    const std::size_t total =
        std::accumulate(config.class_counts.begin(), config.class_counts.end(), std::size_t{0});
    if (total == 0) throw std::invalid_argument("class_counts sum to zero, nothing to generate");

    Rng rng(config.seed);
    const auto means =
        draw_class_means(rng, config.num_classes, config.input_dim, config.class_separation);

    Dataset ds;
    ds.samples.reserve(total);
    for (std::size_t c = 0; c < config.num_classes; ++c) {
        for (std::size_t i = 0; i < config.class_counts[c]; ++i) {
            ds.samples.push_back(
                draw_sample(rng, means[c], config.noise_std, static_cast<int>(c)));
        }
    }
    ds.class_names = default_class_names(config.num_classes);
    ds.provenance = Provenance::synthetic;
    return ds;
}

std::vector<Dataset> partition_dirichlet(const Dataset& dataset, std::size_t num_hospitals,
                                         double alpha, std::uint64_t seed) {
    if (num_hospitals < 1) throw std::invalid_argument("num_hospitals must be >= 1");
    if (dataset.empty()) throw std::invalid_argument("cannot partition an empty dataset");
    if (num_hospitals > dataset.size()) {
        throw std::invalid_argument("num_hospitals (" + std::to_string(num_hospitals) +
                                    ") exceeds dataset size (" + std::to_string(dataset.size()) +
                                    ")");
    }
    if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
    validate_labels(dataset);

    if (num_hospitals == 1) return {dataset};

    Rng rng(seed);
    const std::size_t k = dataset.num_classes();
    std::vector<std::vector<double>> weights(k);
    for (std::size_t c = 0; c < k; ++c) weights[c] = rng.dirichlet(alpha, num_hospitals);

    std::vector<std::vector<std::size_t>> assigned(num_hospitals);
    for (std::size_t s = 0; s < dataset.size(); ++s) {
        const auto& w = weights[static_cast<std::size_t>(dataset.samples[s].label)];
        const double u = rng.uniform();
        std::size_t h = num_hospitals - 1;
        double acc = 0.0;
        for (std::size_t j = 0; j < num_hospitals; ++j) {
            acc += w[j];
            if (u < acc) {
                h = j;
                break;
            }
        }
        assigned[h].push_back(s);
    }

    // Empty shards would starve a hospital, so donate the lowest-index sample
    // from the currently largest shard (ties go to the lowest hospital id).
    for (std::size_t h = 0; h < num_hospitals; ++h) {
        if (!assigned[h].empty()) continue;
        std::size_t donor = 0;
        for (std::size_t j = 1; j < num_hospitals; ++j) {
            if (assigned[j].size() > assigned[donor].size()) donor = j;
        }
        assigned[h].push_back(assigned[donor].front());
        assigned[donor].erase(assigned[donor].begin());
    }

    std::vector<Dataset> shards(num_hospitals);
    for (std::size_t h = 0; h < num_hospitals; ++h) {
        shards[h].class_names = dataset.class_names;
        shards[h].provenance = dataset.provenance;
        shards[h].samples.reserve(assigned[h].size());
        for (const std::size_t s : assigned[h]) shards[h].samples.push_back(dataset.samples[s]);
    }
    return shards;
}

Dataset load_csv(const std::string& path, std::size_t num_classes) {
    if (num_classes < 1) throw std::invalid_argument("num_classes must be >= 1");
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open CSV file: " + path);

    auto next_line = [&in](std::string& line) {
        if (!std::getline(in, line)) return false;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
    };

    std::string line;
    std::size_t line_no = 0;
    if (!next_line(line)) throw std::runtime_error(path + ": empty file, expected a header row");
    ++line_no;

    const auto header = split(line, ',');
    if (header.empty() || header.back() != "label") {
        throw std::runtime_error(path + " line 1: missing label column (header must end in 'label')");
    }
    const std::size_t dim = header.size() - 1;
    if (dim == 0) throw std::runtime_error(path + " line 1: no feature columns before 'label'");
    for (std::size_t i = 0; i < dim; ++i) {
        if (header[i] != "f" + std::to_string(i)) {
            throw std::runtime_error(path + " line 1: expected header field f" + std::to_string(i) +
                                     ", got '" + header[i] + "'");
        }
    }

    Dataset ds;
    ds.class_names = default_class_names(num_classes);
    ds.provenance = Provenance::csv;

    while (next_line(line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split(line, ',');
        const std::string where = path + " line " + std::to_string(line_no);
        if (fields.size() != dim + 1) {
            throw std::runtime_error(where + ": expected " + std::to_string(dim + 1) +
                                     " fields, got " + std::to_string(fields.size()));
        }
        Sample s;
        s.features.resize(dim);
        for (std::size_t i = 0; i < dim; ++i) {
            const char* text = fields[i].c_str();
            char* end = nullptr;
            const double value = std::strtod(text, &end);
            if (end == text || *end != '\0' || !std::isfinite(value)) {
                throw std::runtime_error(where + ": non-numeric feature '" + fields[i] + "'");
            }
            s.features[i] = value;
        }
        const char* text = fields[dim].c_str();
        char* end = nullptr;
        const long label = std::strtol(text, &end, 10);
        if (end == text || *end != '\0') {
            throw std::runtime_error(where + ": non-integer label '" + fields[dim] + "'");
        }
        if (label < 0 || label >= static_cast<long>(num_classes)) {
            throw std::runtime_error(where + ": label " + std::to_string(label) +
                                     " out of range for " + std::to_string(num_classes) +
                                     " classes");
        }
        s.label = static_cast<int>(label);
        ds.samples.push_back(std::move(s));
    }

    if (ds.samples.empty()) throw std::runtime_error(path + ": no data rows");
    return ds;
}

}  // namespace ftlsim
