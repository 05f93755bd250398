#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ftlsim/data.hpp"

using namespace ftlsim;

namespace {

std::vector<std::size_t> label_histogram(const Dataset& ds, std::size_t num_classes) {
    std::vector<std::size_t> hist(num_classes, 0);
    for (const auto& s : ds.samples) ++hist[static_cast<std::size_t>(s.label)];
    return hist;
}

struct TempCsv {
    std::filesystem::path path;

    explicit TempCsv(const std::string& contents) {
        static int counter = 0;
        path = std::filesystem::temp_directory_path() /
               ("ftlsim_test_" + std::to_string(counter++) + ".csv");
        std::ofstream out(path, std::ios::binary);
        out << contents;
    }
    ~TempCsv() { std::filesystem::remove(path); }
};

}  // namespace

TEST_CASE("default_class_names") {
    const auto four = default_class_names(4);
    REQUIRE(four.size() == 4);
    CHECK(four[0] == "Adenocarcinoma");
    CHECK(four[1] == "Large Cell Carcinoma");
    CHECK(four[2] == "Normal");
    CHECK(four[3] == "Squamous Cell Carcinoma");
    const auto three = default_class_names(3);
    CHECK(three == std::vector<std::string>{"class0", "class1", "class2"});
}

TEST_CASE("generate_synthetic honors counts and label order") {
    SynthConfig cfg;
    cfg.num_classes = 4;
    cfg.input_dim = 8;
    cfg.class_counts = {120, 51, 54, 90};
    cfg.seed = 7;
    const auto ds = generate_synthetic(cfg);
    CHECK(ds.size() == 315);
    CHECK(ds.feature_dim() == 8);
    CHECK(ds.provenance == Provenance::synthetic);
    CHECK(label_histogram(ds, 4) == std::vector<std::size_t>{120, 51, 54, 90});
    // samples come out class-grouped
    int prev = -1;
    for (const auto& s : ds.samples) {
        CHECK(s.label >= prev);
        prev = s.label;
    }
}

TEST_CASE("generate_synthetic allows empty classes as long as one sample exists") {
    SynthConfig cfg;
    cfg.num_classes = 4;
    cfg.input_dim = 3;
    cfg.class_counts = {0, 0, 0, 1};
    cfg.seed = 1;
    const auto ds = generate_synthetic(cfg);
    CHECK(ds.size() == 1);
    CHECK(ds.samples[0].label == 3);

    cfg.class_counts = {0, 0, 0, 0};
    CHECK_THROWS_AS(generate_synthetic(cfg), std::invalid_argument);
}

TEST_CASE("generate_synthetic is deterministic per seed") {
    SynthConfig cfg;
    cfg.num_classes = 3;
    cfg.input_dim = 5;
    cfg.class_counts = {10, 10, 10};
    cfg.seed = 99;
    const auto a = generate_synthetic(cfg);
    const auto b = generate_synthetic(cfg);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.samples[i].label == b.samples[i].label);
        CHECK(a.samples[i].features == b.samples[i].features);
    }
    cfg.seed = 100;
    const auto c = generate_synthetic(cfg);
    CHECK(a.samples[0].features != c.samples[0].features);
}

TEST_CASE("same seed, different counts share class geometry") {
    Rng r1(5), r2(5);
    const auto m1 = draw_class_means(r1, 4, 6, 3.0);
    const auto m2 = draw_class_means(r2, 4, 6, 3.0);
    CHECK(m1 == m2);
    // mean separation is calibrated so random pairs sit near `separation`
    for (const auto& m : m1) {
        double norm = 0.0;
        for (double v : m) norm += v * v;
        CHECK(std::sqrt(norm) == doctest::Approx(3.0 / std::sqrt(2.0)).epsilon(1e-12));
    }
}

TEST_CASE("generate_synthetic validates its config") {
    SynthConfig cfg;
    cfg.num_classes = 2;
    cfg.input_dim = 4;
    cfg.class_counts = {5, 5};
    cfg.seed = 1;
    auto bad = cfg;
    bad.class_counts = {5};
    CHECK_THROWS_AS(generate_synthetic(bad), std::invalid_argument);
    bad = cfg;
    bad.class_separation = 0.0;
    CHECK_THROWS_AS(generate_synthetic(bad), std::invalid_argument);
    bad = cfg;
    bad.noise_std = -1.0;
    CHECK_THROWS_AS(generate_synthetic(bad), std::invalid_argument);
    bad = cfg;
    bad.input_dim = 0;
    CHECK_THROWS_AS(generate_synthetic(bad), std::invalid_argument);
}

TEST_CASE("partition_dirichlet matches the scripted reference split") {
    // labels 120/51/54/90 in dataset order, 4 hospitals, alpha 0.1, seed 7
    SynthConfig cfg;
    cfg.num_classes = 4;
    cfg.input_dim = 2;
    cfg.class_counts = {120, 51, 54, 90};
    cfg.seed = 3;
    const auto ds = generate_synthetic(cfg);
    const auto shards = partition_dirichlet(ds, 4, 0.1, 7);
    REQUIRE(shards.size() == 4);
    CHECK(shards[0].size() == 76);
    CHECK(shards[1].size() == 100);
    CHECK(shards[2].size() == 68);
    CHECK(shards[3].size() == 71);
    CHECK(label_histogram(shards[0], 4) == std::vector<std::size_t>{32, 2, 42, 0});
    CHECK(label_histogram(shards[1], 4) == std::vector<std::size_t>{88, 0, 12, 0});
    CHECK(label_histogram(shards[2], 4) == std::vector<std::size_t>{0, 49, 0, 19});
    CHECK(label_histogram(shards[3], 4) == std::vector<std::size_t>{0, 0, 0, 71});
}

TEST_CASE("partition_dirichlet conserves samples and leaves no shard empty") {
    SynthConfig cfg;
    cfg.num_classes = 3;
    cfg.input_dim = 4;
    cfg.class_counts = {40, 25, 35};
    cfg.seed = 11;
    const auto ds = generate_synthetic(cfg);
    for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
        const auto shards = partition_dirichlet(ds, 5, 0.2, seed);
        REQUIRE(shards.size() == 5);
        std::size_t total = 0;
        std::vector<std::size_t> hist(3, 0);
        for (const auto& shard : shards) {
            CHECK_FALSE(shard.empty());
            CHECK(shard.class_names == ds.class_names);
            total += shard.size();
            for (std::size_t c = 0; c < 3; ++c) hist[c] += label_histogram(shard, 3)[c];
        }
        CHECK(total == ds.size());
        CHECK(hist == label_histogram(ds, 3));
    }
}

TEST_CASE("partition_dirichlet is deterministic and seed-sensitive") {
    SynthConfig cfg;
    cfg.num_classes = 2;
    cfg.input_dim = 3;
    cfg.class_counts = {30, 30};
    cfg.seed = 8;
    const auto ds = generate_synthetic(cfg);
    const auto a = partition_dirichlet(ds, 3, 0.5, 42);
    const auto b = partition_dirichlet(ds, 3, 0.5, 42);
    for (std::size_t h = 0; h < 3; ++h) {
        REQUIRE(a[h].size() == b[h].size());
        for (std::size_t i = 0; i < a[h].size(); ++i) {
            CHECK(a[h].samples[i].features == b[h].samples[i].features);
        }
    }
    const auto c = partition_dirichlet(ds, 3, 0.5, 43);
    bool any_diff = false;
    for (std::size_t h = 0; h < 3; ++h) {
        if (a[h].size() != c[h].size()) any_diff = true;
    }
    CHECK(any_diff);
}

TEST_CASE("partition_dirichlet rejects impossible splits") {
    SynthConfig cfg;
    cfg.num_classes = 2;
    cfg.input_dim = 2;
    cfg.class_counts = {2, 1};
    cfg.seed = 1;
    const auto ds = generate_synthetic(cfg);
    CHECK_THROWS_AS(partition_dirichlet(ds, 4, 0.5, 1), std::invalid_argument);
    CHECK_THROWS_AS(partition_dirichlet(ds, 0, 0.5, 1), std::invalid_argument);
    CHECK_THROWS_AS(partition_dirichlet(ds, 2, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(partition_dirichlet(Dataset{}, 2, 0.5, 1), std::invalid_argument);
    CHECK_NOTHROW(partition_dirichlet(ds, 3, 0.5, 1));  // one sample each
}

TEST_CASE("load_csv parses a well-formed file") {
    TempCsv csv(
        "f0,f1,f2,label\n"
        "0.5,-1.25,3.0,0\n"
        "1.5,2.5,-0.5,2\n"
        "0.0,0.0,0.0,1\n");
    const auto ds = load_csv(csv.path.string(), 3);
    REQUIRE(ds.size() == 3);
    CHECK(ds.feature_dim() == 3);
    CHECK(ds.provenance == Provenance::csv);
    CHECK(ds.samples[0].features == std::vector<double>{0.5, -1.25, 3.0});
    CHECK(ds.samples[0].label == 0);
    CHECK(ds.samples[1].label == 2);
    CHECK(ds.class_names == std::vector<std::string>{"class0", "class1", "class2"});
}

TEST_CASE("load_csv accepts CRLF line endings and a trailing newline-free tail") {
    TempCsv csv("f0,f1,label\r\n1.0,2.0,0\r\n3.0,4.0,1");
    const auto ds = load_csv(csv.path.string(), 2);
    REQUIRE(ds.size() == 2);
    CHECK(ds.samples[1].features == std::vector<double>{3.0, 4.0});
    CHECK(ds.samples[1].label == 1);
}

TEST_CASE("load_csv errors name the offending line") {
    CHECK_THROWS_WITH_AS(load_csv("/nonexistent/x.csv", 2),
                         doctest::Contains("cannot open CSV file"), std::runtime_error);

    TempCsv empty("");
    CHECK_THROWS_WITH_AS(load_csv(empty.path.string(), 2),
                         doctest::Contains("empty file"), std::runtime_error);

    TempCsv bad_header("f0,f1,tag\n1,2,0\n");
    CHECK_THROWS_WITH_AS(load_csv(bad_header.path.string(), 2),
                         doctest::Contains("line 1"), std::runtime_error);

    TempCsv header_only("f0,f1,label\n");
    CHECK_THROWS_WITH_AS(load_csv(header_only.path.string(), 2),
                         doctest::Contains("no data rows"), std::runtime_error);

    TempCsv short_row("f0,f1,label\n1.0,2.0,0\n1.0,1\n");
    CHECK_THROWS_WITH_AS(load_csv(short_row.path.string(), 2),
                         doctest::Contains("line 3"), std::runtime_error);

    TempCsv bad_feature("f0,f1,label\n1.0,oops,0\n");
    CHECK_THROWS_WITH_AS(load_csv(bad_feature.path.string(), 2),
                         doctest::Contains("non-numeric feature"), std::runtime_error);

    TempCsv bad_label("f0,f1,label\n1.0,2.0,x\n");
    CHECK_THROWS_WITH_AS(load_csv(bad_label.path.string(), 2),
                         doctest::Contains("non-integer label"), std::runtime_error);

    TempCsv out_of_range("f0,f1,label\n1.0,2.0,5\n");
    CHECK_THROWS_WITH_AS(load_csv(out_of_range.path.string(), 2),
                         doctest::Contains("out of range"), std::runtime_error);
}
