#include <doctest.h>

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <vector>

#include "ftlsim/model.hpp"
#include "ftlsim/rng.hpp"

using namespace ftlsim;

namespace {

Dataset two_blob_dataset(std::uint64_t seed, std::size_t per_class, double gap) {
    Dataset ds;
    ds.class_names = {"neg", "pos"};
    Rng rng(seed);
    for (std::size_t i = 0; i < per_class; ++i) {
        ds.samples.push_back({{-gap + 0.3 * rng.normal(), 0.3 * rng.normal()}, 0});
        ds.samples.push_back({{gap + 0.3 * rng.normal(), 0.3 * rng.normal()}, 1});
    }
    return ds;
}

bool same_bits(std::span<const double> a, std::span<const double> b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("layout arithmetic") {
    ModelSpec spec{16, 8, 4, Activation::tanh};
    CHECK(spec.base_param_count() == 16 * 8 + 8);
    CHECK(spec.head_param_count() == 8 * 4 + 4);
    CHECK(spec.layout().total() == 172);
}

TEST_CASE("spec validation rejects degenerate shapes") {
    CHECK_THROWS_AS(validate(ModelSpec{0, 4, 2}), std::invalid_argument);
    CHECK_THROWS_AS(validate(ModelSpec{4, 0, 2}), std::invalid_argument);
    CHECK_THROWS_AS(validate(ModelSpec{4, 4, 1}), std::invalid_argument);
    CHECK_NOTHROW(validate(ModelSpec{4, 4, 2}));
}

TEST_CASE("init_params: bounded values, zero head biases, matching layout") {
    ModelSpec spec{6, 5, 3, Activation::tanh};
    auto params = init_params(spec, 42);
    CHECK(params.layout == spec.layout());
    CHECK_FALSE(params.frozen_base);
    REQUIRE(params.values.size() == spec.layout().total());
    for (double v : params.values) {
        CHECK(v >= -0.05);
        CHECK(v <= 0.05);
    }
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
        CHECK(params.head()[spec.hidden_dim * spec.num_classes + c] == 0.0);
    }
    auto again = init_params(spec, 42);
    CHECK(same_bits(params.values, again.values));
    auto other = init_params(spec, 43);
    CHECK_FALSE(same_bits(params.values, other.values));
}

TEST_CASE("zero parameters give the uniform distribution") {
    ModelSpec spec{3, 5, 4, Activation::tanh};
    ParameterVector params{std::vector<double>(spec.layout().total(), 0.0), spec.layout(), false};
    const auto probs = forward(params, spec, std::vector<double>{0.4, -0.3, 1.1});
    REQUIRE(probs.size() == 4);
    for (double p : probs) CHECK(p == 0.25);
}

TEST_CASE("forward matches the scripted reference network") {
    // in=3 hid=5 cls=4, params from seed 42, input uniform(-1,1) from seed 4242
    ModelSpec spec{3, 5, 4, Activation::tanh};
    auto params = init_params(spec, 42);
    Rng rx(4242);
    std::vector<double> x(3);
    for (auto& v : x) v = rx.uniform(-1.0, 1.0);
    const auto probs = forward(params, spec, x);
    REQUIRE(probs.size() == 4);
    CHECK(std::abs(probs[0] - 0x1.fe50b96056291p-3) <= 1e-12);
    CHECK(std::abs(probs[1] - 0x1.ff7fb82668d1ep-3) <= 1e-12);
    CHECK(std::abs(probs[2] - 0x1.00d9de3e91fdap-2) <= 1e-12);
    CHECK(std::abs(probs[3] - 0x1.003de8fe0e851p-2) <= 1e-12);
    double sum = 0.0;
    for (double p : probs) sum += p;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("forward rejects a wrong-length feature vector") {
    ModelSpec spec{3, 5, 4, Activation::tanh};
    auto params = init_params(spec, 1);
    CHECK_THROWS_AS(forward(params, spec, std::vector<double>{1.0, 2.0}),
                    std::invalid_argument);
}

TEST_CASE("loss values") {
    const std::vector<double> uniform4{0.25, 0.25, 0.25, 0.25};
    CHECK(loss(uniform4, 2) == doctest::Approx(-std::log(0.25)).epsilon(1e-15));
    const std::vector<double> certain{1.0, 0.0};
    CHECK(loss(certain, 0) == 0.0);
    // floored at 1e-12 so certain-wrong stays finite
    CHECK(loss(certain, 1) == doctest::Approx(-std::log(1e-12)).epsilon(1e-15));
    CHECK_THROWS_AS(loss(uniform4, 4), std::invalid_argument);
    CHECK_THROWS_AS(loss(uniform4, -1), std::invalid_argument);
}

TEST_CASE("predict_class takes the first argmax") {
    CHECK(predict_class(std::vector<double>{0.1, 0.5, 0.4}) == 1);
    CHECK(predict_class(std::vector<double>{0.4, 0.4, 0.2}) == 0);
    CHECK(predict_class(std::vector<double>{0.9}) == 0);
    CHECK_THROWS_AS(predict_class(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("accumulate_gradient returns the sample loss and adds into the buffer") {
    ModelSpec spec{4, 3, 2, Activation::tanh};
    auto params = init_params(spec, 9);
    std::vector<double> x{0.5, -1.0, 0.25, 2.0};
    std::vector<double> grad(spec.layout().total(), 0.0);
    const double l = accumulate_gradient(params, spec, x, 1, grad);
    const auto probs = forward(params, spec, x);
    CHECK(l == doctest::Approx(loss(probs, 1)).epsilon(1e-15));

    // adding the same sample again doubles every entry
    auto grad2 = grad;
    accumulate_gradient(params, spec, x, 1, grad2);
    for (std::size_t i = 0; i < grad.size(); ++i) {
        CHECK(grad2[i] == doctest::Approx(2.0 * grad[i]).epsilon(1e-12));
    }
}

TEST_CASE("accumulate_gradient with a frozen base leaves base entries alone") {
    ModelSpec spec{4, 3, 2, Activation::tanh};
    auto params = init_params(spec, 9);
    params.frozen_base = true;
    std::vector<double> x{0.5, -1.0, 0.25, 2.0};
    std::vector<double> grad(spec.layout().total(), 7.0);
    accumulate_gradient(params, spec, x, 0, grad);
    for (std::size_t i = 0; i < spec.base_param_count(); ++i) CHECK(grad[i] == 7.0);
    bool head_changed = false;
    for (std::size_t i = spec.base_param_count(); i < grad.size(); ++i) {
        if (grad[i] != 7.0) head_changed = true;
    }
    CHECK(head_changed);
}

TEST_CASE("evaluate hand check against the uniform model") {
    ModelSpec spec{2, 3, 4, Activation::tanh};
    ParameterVector params{std::vector<double>(spec.layout().total(), 0.0), spec.layout(), false};
    Dataset ds;
    ds.class_names = {"a", "b", "c", "d"};
    ds.samples = {{{0.0, 0.0}, 0}, {{1.0, 1.0}, 0}, {{2.0, 2.0}, 1}, {{3.0, 3.0}, 3}};
    const auto r = evaluate(params, spec, ds);
    CHECK(r.mean_loss == doctest::Approx(-std::log(0.25)).epsilon(1e-15));
    CHECK(r.accuracy == doctest::Approx(0.5).epsilon(1e-15));  // argmax ties go to class 0
}

TEST_CASE("fine_tune is bit-identical across repeated calls") {
    ModelSpec spec{2, 6, 2, Activation::tanh};
    auto params = init_params(spec, 3);
    auto ds = two_blob_dataset(11, 20, 1.5);
    TrainSettings settings{0.05, 3, 8, 77};
    auto a = fine_tune(params, spec, ds, settings);
    auto b = fine_tune(params, spec, ds, settings);
    CHECK(same_bits(a.params.values, b.params.values));
    CHECK(a.mean_loss_after == b.mean_loss_after);
    auto c = fine_tune(params, spec, ds, TrainSettings{0.05, 3, 8, 78});
    CHECK_FALSE(same_bits(a.params.values, c.params.values));
}

TEST_CASE("fine_tune with zero learning rate changes nothing") {
    ModelSpec spec{2, 4, 2, Activation::tanh};
    auto params = init_params(spec, 5);
    auto ds = two_blob_dataset(12, 10, 1.0);
    auto r = fine_tune(params, spec, ds, TrainSettings{0.0, 2, 4, 1});
    CHECK(same_bits(r.params.values, params.values));
    CHECK(r.mean_loss_after == r.mean_loss_before);
    CHECK(r.improved);  // "no worse" counts
}

TEST_CASE("fine_tune freezes base bits when asked") {
    ModelSpec spec{2, 4, 2, Activation::tanh};
    auto params = init_params(spec, 5);
    params.frozen_base = true;
    auto ds = two_blob_dataset(13, 15, 1.5);
    auto r = fine_tune(params, spec, ds, TrainSettings{0.1, 4, 8, 2});
    CHECK(same_bits(r.params.base(), params.base()));
    CHECK_FALSE(same_bits(r.params.head(), params.head()));
    CHECK(r.params.frozen_base);
}

TEST_CASE("fine_tune clamps an oversized batch and reports it") {
    ModelSpec spec{2, 4, 2, Activation::tanh};
    auto params = init_params(spec, 5);
    auto ds = two_blob_dataset(14, 3, 1.0);  // 6 samples
    auto r = fine_tune(params, spec, ds, TrainSettings{0.05, 1, 32, 3});
    CHECK(r.batch_clamped);
    auto exact = fine_tune(params, spec, ds, TrainSettings{0.05, 1, 6, 3});
    CHECK_FALSE(exact.batch_clamped);
    CHECK(same_bits(r.params.values, exact.params.values));
}

TEST_CASE("fine_tune validates its inputs") {
    ModelSpec spec{2, 4, 2, Activation::tanh};
    auto params = init_params(spec, 5);
    auto ds = two_blob_dataset(15, 5, 1.0);
    CHECK_THROWS_AS(fine_tune(params, spec, Dataset{}, TrainSettings{0.05, 1, 4, 1}),
                    std::invalid_argument);
    CHECK_THROWS_AS(fine_tune(params, spec, ds, TrainSettings{-0.1, 1, 4, 1}),
                    std::invalid_argument);
    CHECK_THROWS_AS(fine_tune(params, spec, ds, TrainSettings{0.05, 0, 4, 1}),
                    std::invalid_argument);
    CHECK_THROWS_AS(fine_tune(params, spec, ds, TrainSettings{0.05, 1, 0, 1}),
                    std::invalid_argument);
}

TEST_CASE("fine_tune separates two well-split blobs") {
    ModelSpec spec{2, 8, 2, Activation::tanh};
    auto params = init_params(spec, 21);
    auto ds = two_blob_dataset(22, 40, 2.0);
    auto r = fine_tune(params, spec, ds, TrainSettings{0.1, 200, 16, 4});
    CHECK(r.train_accuracy_after >= 0.95);
    CHECK(r.mean_loss_after < r.mean_loss_before);
    CHECK(r.improved);
}

TEST_CASE("pretrain_base produces a frozen, target-shaped model") {
    // source labels live in a 3-class space; the target head has 4 classes
    ModelSpec spec{2, 6, 4, Activation::tanh};
    Dataset source;
    source.class_names = {"s0", "s1", "s2"};
    Rng rng(31);
    for (int c = 0; c < 3; ++c) {
        for (int i = 0; i < 30; ++i) {
            const double a = (c == 0 ? -2.0 : c == 1 ? 0.0 : 2.0);
            source.samples.push_back({{a + 0.3 * rng.normal(), 0.3 * rng.normal()}, c});
        }
    }
    auto pre = pretrain_base(spec, source, TrainSettings{0.1, 50, 16, 17});
    CHECK(pre.frozen_base);
    CHECK(pre.layout == spec.layout());
    bool base_nonzero = false;
    for (double v : pre.base()) {
        if (v != 0.0) base_nonzero = true;
        CHECK(std::isfinite(v));
    }
    CHECK(base_nonzero);

    auto again = pretrain_base(spec, source, TrainSettings{0.1, 50, 16, 17});
    CHECK(same_bits(pre.values, again.values));

    CHECK_THROWS_AS(pretrain_base(spec, Dataset{}, TrainSettings{0.1, 1, 4, 1}),
                    std::invalid_argument);
    Dataset single;
    single.class_names = {"only"};
    single.samples = {{{0.0, 0.0}, 0}};
    CHECK_THROWS_AS(pretrain_base(spec, single, TrainSettings{0.1, 1, 4, 1}),
                    std::invalid_argument);
}
