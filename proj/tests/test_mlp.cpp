#include "doctest.h"

#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

#include "fluidsim/error.hpp"
#include "fluidsim/fluid_learning.hpp"
#include "fluidsim/mlp.hpp"

using namespace fluidsim;

namespace {

// Two well-separated 2-D blobs; linearly separable by a margin.
Dataset separable_toy(int per_class, RngStream rng) {
    Dataset d;
    d.features = Matrix(2 * per_class, 2);
    d.labels.resize(2 * per_class);
    for (int i = 0; i < per_class; ++i) {
        d.features(i, 0) = 3.0 + 0.3 * rng.normal();
        d.features(i, 1) = 3.0 + 0.3 * rng.normal();
        d.labels[i] = 0;
        d.features(per_class + i, 0) = -3.0 + 0.3 * rng.normal();
        d.features(per_class + i, 1) = -3.0 + 0.3 * rng.normal();
        d.labels[per_class + i] = 1;
    }
    return d;
}

} // namespace

TEST_CASE("mlp: analytic gradient matches central finite differences") {
    const MlpArch arch{5, 8, 3};
    RngStream rng(11, "gradcheck");
    Dataset data;
    data.features = Matrix(12, 5);
    data.labels.resize(12);
    for (int i = 0; i < 12; ++i) {
        data.labels[i] = static_cast<int>(rng.uniform_int(3));
        for (int d = 0; d < 5; ++d) data.features(i, d) = rng.normal();
    }

    for (int trial = 0; trial < 10; ++trial) {
        ModelParams m = mlp_init(arch, rng.substream("init" + std::to_string(trial)));
        const Vector analytic = mlp_gradient(m, data.features, data.labels);

        // central finite differences at 10 random coordinates
        RngStream pick = rng.substream("pick" + std::to_string(trial));
        const double eps = 1e-6;
        for (int k = 0; k < 10; ++k) {
            const int idx = static_cast<int>(pick.uniform_int(arch.param_count()));
            ModelParams plus = m, minus = m;
            plus.values[idx] += eps;
            minus.values[idx] -= eps;
            const double fd = (mlp_loss(plus, data.features, data.labels) -
                               mlp_loss(minus, data.features, data.labels)) /
                              (2.0 * eps);
            const double denom = std::max({std::fabs(fd), std::fabs(analytic[idx]), 1e-8});
            CHECK(std::fabs(fd - analytic[idx]) / denom < 1e-4);
        }
    }
}

TEST_CASE("local_train: zero epochs returns the input unchanged") {
    const MlpArch arch{2, 4, 2};
    RngStream rng(3, "zero");
    const ModelParams m = mlp_init(arch, rng.substream("init"));
    const Dataset d = separable_toy(10, rng.substream("data"));
    const ModelParams out = local_train(m, d, 0, 0.1, 4, rng.substream("train"));
    CHECK((out.values - m.values).norm() == 0.0);
}

TEST_CASE("local_train: separable toy set reaches 0.99 training accuracy") {
    const MlpArch arch{2, 8, 2};
    RngStream rng(5, "toy");
    const Dataset d = separable_toy(40, rng.substream("data"));
    ModelParams m = mlp_init(arch, rng.substream("init"));
    // 20 epochs x 10 batches = 200 steps
    m = local_train(m, d, 20, 0.1, 8, rng.substream("train"));
    CHECK(evaluate(m, d) >= 0.99);
}

TEST_CASE("local_train: exploding learning rate raises a diagnostic") {
    // Random labels: a huge step lands confidently wrong somewhere, so the
    // training loss degenerates (a separable toy would survive any step).
    const MlpArch arch{3, 8, 4};
    RngStream rng(6, "blowup");
    Dataset d;
    d.features = Matrix(40, 3);
    d.labels.resize(40);
    RngStream drng = rng.substream("data");
    for (int i = 0; i < 40; ++i) {
        d.labels[i] = static_cast<int>(drng.uniform_int(4));
        for (int k = 0; k < 3; ++k) d.features(i, k) = drng.normal();
    }
    ModelParams m = mlp_init(arch, rng.substream("init"));
    CHECK_THROWS_WITH_AS(local_train(m, d, 50, 1e8, 8, rng.substream("train")),
                         doctest::Contains("learning rate"), std::runtime_error);
}

TEST_CASE("fedavg: idempotence, midpoint, and weighted spot check") {
    const MlpArch arch{3, 4, 2};
    RngStream rng(7, "avg");
    const ModelParams a = mlp_init(arch, rng.substream("a"));
    const ModelParams b = mlp_init(arch, rng.substream("b"));
    const ModelParams c = mlp_init(arch, rng.substream("c"));

    const ModelParams same = fedavg({a, a, a}, {1.0, 2.0, 5.0});
    CHECK((same.values - a.values).lpNorm<Eigen::Infinity>() < 1e-12);

    const ModelParams mid = fedavg({a, b}, {1.0, 1.0});
    CHECK((mid.values - 0.5 * (a.values + b.values)).lpNorm<Eigen::Infinity>() < 1e-15);

    const ModelParams w = fedavg({a, b, c}, {1.0, 2.0, 3.0});
    RngStream pick(8, "coords");
    for (int k = 0; k < 5; ++k) {
        const int i = static_cast<int>(pick.uniform_int(arch.param_count()));
        // independent arithmetic for the weighted mean
        const double expect =
            (1.0 * a.values[i] + 2.0 * b.values[i] + 3.0 * c.values[i]) / 6.0;
        CHECK(w.values[i] == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("fedavg: architecture and weight validation") {
    const ModelParams a = mlp_zero(MlpArch{3, 4, 2});
    const ModelParams b = mlp_zero(MlpArch{3, 5, 2});
    CHECK_THROWS_AS(fedavg({a, b}, {1.0, 1.0}), ValidationError);
    CHECK_THROWS_AS(fedavg({a, a}, {0.0, 0.0}), ValidationError);
    CHECK_THROWS_AS(fedavg({a, a}, {-1.0, 2.0}), ValidationError);
}

TEST_CASE("dispersal_fuse: fixed point, boundary, and arithmetic") {
    const MlpArch arch{1, 1, 2}; // param_count = 1*1 + 1 + 2*1 + 2 = 6
    ModelParams regional = mlp_zero(arch);
    ModelParams carried_params = mlp_zero(arch);
    regional.values << 0.0, 2.0, 0.0, 2.0, 0.0, 2.0;
    carried_params.values << 2.0, 0.0, 2.0, 0.0, 2.0, 0.0;

    CarriedModel same{0, regional, 1, 0.0};
    for (double alpha : {0.1, 0.5, 0.9}) {
        const ModelParams fused = dispersal_fuse(regional, same, alpha);
        CHECK((fused.values - regional.values).lpNorm<Eigen::Infinity>() == 0.0);
    }

    CarriedModel other{0, carried_params, 1, 0.0};
    const ModelParams half = dispersal_fuse(regional, other, 0.5);
    for (int i = 0; i < 6; ++i) CHECK(half.values[i] == doctest::Approx(1.0));

    ModelParams mismatched = mlp_zero(MlpArch{2, 1, 2});
    CHECK_THROWS_AS(dispersal_fuse(mismatched, other, 0.5), ValidationError);
}

TEST_CASE("evaluate: chance level, memorization, and order invariance") {
    const FlDataConfig cfg;
    const FlData data = gen_synthetic_data(cfg, 32, 99);

    // zero weights: identical logits, argmax ties to class 0 -> exactly 1/10
    const ModelParams zero = mlp_zero(data.arch);
    CHECK(evaluate(zero, data.test_set) == doctest::Approx(0.1));

    // memorize a small set
    Dataset small;
    small.features = data.test_set.features.topRows(30);
    small.labels.assign(data.test_set.labels.begin(), data.test_set.labels.begin() + 30);
    RngStream rng(12, "memorize");
    ModelParams m = mlp_init(data.arch, rng.substream("init"));
    m = local_train(m, small, 300, 0.1, 10, rng.substream("train"));
    CHECK(evaluate(m, small) == doctest::Approx(1.0));

    // shuffling the test set does not change accuracy
    Dataset shuffled = data.test_set;
    std::vector<int> perm(shuffled.size());
    for (int i = 0; i < shuffled.size(); ++i) perm[i] = i;
    RngStream prng(13, "perm");
    prng.shuffle(perm);
    Dataset reordered;
    reordered.features = Matrix(shuffled.size(), shuffled.features.cols());
    reordered.labels.resize(shuffled.size());
    for (int i = 0; i < shuffled.size(); ++i) {
        reordered.features.row(i) = shuffled.features.row(perm[i]);
        reordered.labels[i] = shuffled.labels[perm[i]];
    }
    CHECK(evaluate(m, reordered) == doctest::Approx(evaluate(m, shuffled)));
}

TEST_CASE("gen_synthetic_data: the 8x5x3 non-IID shape") {
    const FlDataConfig cfg; // defaults: 8 clusters, 5 clients, 3 labels, 10 classes
    const FlData data = gen_synthetic_data(cfg, 32, 1);
    REQUIRE(data.clusters.size() == 8);
    int client_count = 0;
    std::set<int> all_labels;
    for (const auto& cl : data.clusters) {
        client_count += static_cast<int>(cl.clients.size());
        std::set<int> support;
        for (const auto& c : cl.clients)
            support.insert(c.data.labels.begin(), c.data.labels.end());
        CHECK(support.size() <= 3);
        for (int l : support)
            CHECK(std::find(cl.label_set.begin(), cl.label_set.end(), l) !=
                  cl.label_set.end());
        all_labels.insert(support.begin(), support.end());
    }
    CHECK(client_count == 40);
    CHECK(all_labels.size() == 10); // rotation covers every class

    // balanced test set
    std::map<int, int> counts;
    for (int l : data.test_set.labels) counts[l]++;
    for (const auto& [label, count] : counts) CHECK(count == cfg.test_samples_per_class);
}

TEST_CASE("gen_synthetic_data: labels_per_cluster == n_classes is IID-in-support") {
    FlDataConfig cfg;
    cfg.labels_per_cluster = cfg.n_classes;
    cfg.n_clusters = 3;
    cfg.samples_per_client = 200;
    const FlData data = gen_synthetic_data(cfg, 32, 2);
    for (const auto& cl : data.clusters) {
        std::set<int> support;
        for (const auto& c : cl.clients)
            support.insert(c.data.labels.begin(), c.data.labels.end());
        CHECK(static_cast<int>(support.size()) == cfg.n_classes);
    }
}

TEST_CASE("gen_synthetic_data: deterministic for a fixed seed, sensitive to it") {
    const FlDataConfig cfg;
    const FlData a = gen_synthetic_data(cfg, 32, 42);
    const FlData b = gen_synthetic_data(cfg, 32, 42);
    const FlData c = gen_synthetic_data(cfg, 32, 43);
    CHECK((a.clusters[0].clients[0].data.features -
           b.clusters[0].clients[0].data.features).norm() == 0.0);
    CHECK(a.clusters[0].clients[0].data.labels == b.clusters[0].clients[0].data.labels);
    CHECK((a.test_set.features - b.test_set.features).norm() == 0.0);
    CHECK((a.clusters[0].clients[0].data.features -
           c.clusters[0].clients[0].data.features).norm() != 0.0);
}

TEST_CASE("gen_synthetic_data: infeasible label assignment is rejected") {
    FlDataConfig cfg;
    cfg.labels_per_cluster = cfg.n_classes + 1;
    CHECK_THROWS_AS(gen_synthetic_data(cfg, 32, 1), ValidationError);
}
