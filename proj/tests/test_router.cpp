#include <cmath>
#include <fstream>

#include "doctest.h"

#include "fixtures.hpp"
#include "oracles.hpp"
#include "granur/error.hpp"
#include "granur/router.hpp"

using namespace granur;

namespace {

std::vector<double> random_input(Rng& rng, int d) {
    std::vector<double> x(static_cast<std::size_t>(d));
    for (auto& v : x) v = rng.uniform(-1.0, 1.0);
    return x;
}

// Random biases too, so the gradient check also covers them.
RouterModel random_model(std::vector<int> dims, std::uint64_t seed) {
    auto m = RouterModel::initialize(std::move(dims), seed);
    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    for (auto& b : m.biases)
        for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = rng.uniform(-0.3, 0.3);
    return m;
}

double loss_at(const RouterModel& m, const std::vector<double>& x, const std::vector<double>& sl) {
    return bce_loss(forward(m, x), sl);
}

}  // namespace

TEST_CASE("zero model outputs one half") {
    const auto m = RouterModel::zeros({7, 4, 5});
    const auto w = forward(m, std::vector<double>(7, 0.3));
    CHECK(w == std::vector<double>(5, 0.5));
}

TEST_CASE("forward matches the loop oracle") {
    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const auto m = random_model({12, 9, 6, 5}, 100 + static_cast<std::uint64_t>(trial));
        const auto x = random_input(rng, 12);
        const auto got = forward(m, x);
        const auto want = oracle::mlp_forward(m, x);
        REQUIRE(got.size() == 5);
        for (std::size_t i = 0; i < 5; ++i) {
            CHECK(std::abs(got[i] - want[i]) <= 1e-12);
            CHECK(got[i] > 0.0);
            CHECK(got[i] < 1.0);
        }
        CHECK(forward(m, x) == got);
    }
}

TEST_CASE("forward rejects a wrong input length") {
    const auto m = RouterModel::initialize(default_layer_dims(8, 5), 0);
    CHECK(m.layer_dims == std::vector<int>{8, 256, 64, 5});
    CHECK_THROWS_AS(forward(m, std::vector<double>(7, 0.0)), Error);
}

TEST_CASE("bce closed forms") {
    CHECK(bce_loss(std::vector<double>{0.5, 0.5}, std::vector<double>{0, 1}) == doctest::Approx(2 * std::log(2.0)).epsilon(1e-15));
    const double h = -(0.8 * std::log(0.8) + 0.2 * std::log(0.2));
    CHECK(bce_loss(std::vector<double>{0.8, 0.2}, std::vector<double>{0.8, 0.2}) == doctest::Approx(2 * h).epsilon(1e-14));
    CHECK(2 * h == doctest::Approx(1.000804).epsilon(1e-6));

    // Zero labels with w at the clamp contribute -ln(1 - 1e-7) each.
    const std::vector<double> sl{0, 0, 0, 0.8, 0.2};
    const std::vector<double> w{kWeightClamp, kWeightClamp, kWeightClamp, 0.8, 0.2};
    CHECK(bce_loss(w, sl) == doctest::Approx(2 * h - 3 * std::log1p(-kWeightClamp)).epsilon(1e-14));

    CHECK_THROWS_AS(bce_loss(std::vector<double>{0.0, 0.5}, std::vector<double>{0, 1}), Error);
    CHECK_THROWS_AS(bce_loss(std::vector<double>{1.0, 0.5}, std::vector<double>{0, 1}), Error);
    CHECK_THROWS_AS(bce_loss(std::vector<double>{0.5}, std::vector<double>{0, 1}), Error);
}

TEST_CASE("bce is minimized at the label") {
    Rng rng(2);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> sl(5, 0.0), w(5);
        sl[rng.below(5)] = 0.8;
        for (auto& x : w) x = rng.uniform(1e-6, 1.0 - 1e-6);
        std::vector<double> floor = sl;
        for (auto& x : floor) x = std::clamp(x, kWeightClamp, 1.0 - kWeightClamp);
        CHECK(bce_loss(w, sl) >= bce_loss(floor, sl));
    }
}

TEST_CASE("output gradient is w minus the label") {
    const auto m = RouterModel::zeros({3, 5});
    const std::vector<double> x{0.1, 0.2, 0.3};
    const auto g = backward(m, x, std::vector<double>(5, 0.0));
    for (int i = 0; i < 5; ++i) CHECK(g.biases.back()[i] == doctest::Approx(0.5));
    const auto at_min = backward(m, x, std::vector<double>(5, 0.5));
    CHECK(at_min.biases.back().cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("analytic gradients match central differences") {
    Rng rng(4);
    const double h = 1e-5;
    for (int trial = 0; trial < 10; ++trial) {
        const int d = 2 + static_cast<int>(rng.below(15));
        const int hidden = 2 + static_cast<int>(rng.below(7));
        auto m = random_model({d, hidden, 5}, 500 + static_cast<std::uint64_t>(trial));
        const auto x = random_input(rng, d);
        std::vector<double> sl(5, 0.0);
        sl[rng.below(5)] = 0.8;
        const auto g = backward(m, x, sl);
        CHECK(g.loss == doctest::Approx(loss_at(m, x, sl)).epsilon(1e-14));
        for (std::size_t l = 0; l < m.n_layers(); ++l) {
            for (Eigen::Index i = 0; i < m.weights[l].size(); ++i) {
                double& p = m.weights[l].data()[i];
                const double keep = p;
                p = keep + h;
                const double up = loss_at(m, x, sl);
                p = keep - h;
                const double down = loss_at(m, x, sl);
                p = keep;
                const double fd = (up - down) / (2 * h);
                const double an = g.weights[l].data()[i];
                CHECK(std::abs(fd - an) <= 1e-4 * std::max({1.0, std::abs(fd), std::abs(an)}));
            }
        }
    }
}

TEST_CASE("training memorizes a single example") {
    const std::vector<TrainExample> ex{{{0.3, -0.2, 0.9, 0.1}, {0, 0.8, 0.2, 0}}};
    TrainConfig cfg;
    cfg.learning_rate = 0.01;
    cfg.max_epochs = 3000;
    cfg.early_stop_patience = 3000;
    const auto r = train(RouterModel::initialize({4, 8, 4}, 1), ex, cfg);
    const auto w = forward(r.model, ex[0].embedding);
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(w[i] - ex[0].soft_label[i]) < 0.05);
    CHECK(r.loss_history.size() <= 3000);
    CHECK(r.loss_history.back() < r.loss_history.front());
}

TEST_CASE("contradictory labels converge to their mean") {
    const Embedding e{0.5, -0.5, 0.25};
    const std::vector<TrainExample> ex{{e, {0.8, 0.2, 0}}, {e, {0, 0.8, 0.2}}};
    TrainConfig cfg;
    cfg.learning_rate = 0.01;
    cfg.max_epochs = 4000;
    cfg.early_stop_patience = 200;
    const auto r = train(RouterModel::initialize({3, 8, 3}, 2), ex, cfg);
    const auto w = forward(r.model, e);
    CHECK(std::abs(w[0] - 0.4) < 0.05);
    CHECK(std::abs(w[1] - 0.5) < 0.05);
    CHECK(std::abs(w[2] - 0.1) < 0.05);
}

TEST_CASE("training is reproducible from its seed") {
    Rng rng(8);
    std::vector<TrainExample> ex;
    for (int i = 0; i < 70; ++i) {
        std::vector<double> sl(3, 0.0);
        sl[rng.below(3)] = 0.8;
        ex.push_back({random_input(rng, 6), sl});
    }
    TrainConfig cfg;
    cfg.max_epochs = 30;
    cfg.seed = 5;
    const auto a = train(RouterModel::initialize({6, 5, 3}, 3), ex, cfg);
    const auto b = train(RouterModel::initialize({6, 5, 3}, 3), ex, cfg);
    CHECK(a.model == b.model);
    CHECK(a.loss_history == b.loss_history);
    cfg.seed = 6;
    const auto c = train(RouterModel::initialize({6, 5, 3}, 3), ex, cfg);
    CHECK_FALSE(c.model == a.model);
}

TEST_CASE("early stopping triggers on a flat loss") {
    const std::vector<TrainExample> ex{{{0.0, 0.0}, {0.5, 0.5}}};
    TrainConfig cfg;
    cfg.early_stop_patience = 5;
    const auto r = train(RouterModel::zeros({2, 2}), ex, cfg);
    CHECK(r.early_stopped);
    CHECK(r.loss_history.size() == 6);
}

TEST_CASE("train validates its inputs") {
    const auto m = RouterModel::zeros({2, 3});
    CHECK_THROWS_AS(train(m, std::span<const TrainExample>{}, {}), Error);
    const std::vector<TrainExample> bad_dim{{{1.0}, {0.8, 0.2, 0}}};
    CHECK_THROWS_AS(train(m, bad_dim, {}), Error);
    const std::vector<TrainExample> bad_label{{{1.0, 2.0}, {0.8, 0.2}}};
    CHECK_THROWS_AS(train(m, bad_label, {}), Error);
    TrainConfig cfg;
    cfg.learning_rate = 0;
    const std::vector<TrainExample> ok{{{1.0, 2.0}, {0.8, 0.2, 0}}};
    CHECK_THROWS_AS(train(m, ok, cfg), Error);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
    const auto m = random_model({5, 7, 4}, 77);
    fixture::TempDir dir("model");
    save_model(m, dir / "m.json");
    const auto back = load_model(dir / "m.json");
    CHECK(back == m);
    CHECK(model_to_json(back) == model_to_json(m));

    std::ofstream(dir / "bad.json") << R"({"layer_dims": [2, 3], "weights": [[[1, 2]]], "biases": [[0, 0, 0]], "seed": 0, "n_gra": 3})";
    CHECK_THROWS_AS(load_model(dir / "bad.json"), Error);
    std::ofstream(dir / "junk.json") << "{";
    CHECK_THROWS_AS(load_model(dir / "junk.json"), Error);
    CHECK_THROWS_AS(load_model(dir / "none.json"), Error);
}
