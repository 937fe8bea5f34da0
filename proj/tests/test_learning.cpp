#include "doctest.h"

#include <cmath>
#include <set>

#include "fluidsim/error.hpp"
#include "fluidsim/fluid_learning.hpp"

using namespace fluidsim;

namespace {

GroundNode make_node(const std::string& id, GroundKind kind, double lat_deg,
                     double lon_deg, double mask_deg = 25.0) {
    return GroundNode{id, kind, Geodetic{deg2rad(lat_deg), deg2rad(lon_deg), 0.0},
                      deg2rad(mask_deg)};
}

struct MiniWorld {
    std::vector<OrbitalElements> constellation;
    std::vector<GroundNode> ground_nodes;
    ContactPlan plan;
    IslTopology topology;
    double horizon = 0.0;
};

// Two-plane eight-satellite shell over two clusters and one station.
MiniWorld mini_world(double horizon) {
    MiniWorld w;
    w.constellation =
        walker_constellation(WalkerSpec{8, 2, 1, deg2rad(60.0), 550e3, 0.0});
    w.ground_nodes = {make_node("c0", GroundKind::cluster, 40.0, -100.0),
                      make_node("c1", GroundKind::cluster, -30.0, 20.0),
                      make_node("gs", GroundKind::station, 52.0, 5.0)};
    w.horizon = horizon;
    w.plan = compute_contact_plan(w.constellation, w.ground_nodes, horizon, 30.0);
    w.topology = build_grid_topology(2, 4, true);
    return w;
}

FlRunInputs make_inputs(const MiniWorld& w, const FlData& data, FlScheme scheme,
                        std::uint64_t seed) {
    FlRunInputs in;
    in.config.scheme = scheme;
    in.plan = &w.plan;
    in.clusters = data.clusters;
    in.test_set = &data.test_set;
    in.constellation = &w.constellation;
    in.ground_nodes = &w.ground_nodes;
    in.topology = w.topology;
    in.horizon = w.horizon;
    in.seed = seed;
    return in;
}

} // namespace

TEST_CASE("run_fl: single cluster + single satellite dispersal is FedAvg-per-pass") {
    MiniWorld w;
    // polar satellite passing over a polar cluster once per orbit
    w.constellation = {OrbitalElements{kEarthRadius + 550e3, deg2rad(90.0), 0.0, 0.0, 0.0}};
    w.ground_nodes = {make_node("c0", GroundKind::cluster, 88.0, 0.0)};
    w.horizon = 2.6 * orbital_period(w.constellation[0]);
    w.plan = compute_contact_plan(w.constellation, w.ground_nodes, w.horizon, 30.0);
    REQUIRE(w.plan.windows.size() >= 2);

    FlDataConfig dcfg;
    dcfg.n_clusters = 1;
    dcfg.clients_per_cluster = 3;
    dcfg.labels_per_cluster = 10;
    dcfg.samples_per_client = 30;
    const FlData data = gen_synthetic_data(dcfg, 16, 5);

    FlRunInputs in = make_inputs(w, data, FlScheme::dispersal, 5);
    const TrainingTrace trace = run_fl(in);
    REQUIRE(trace.points.size() == 1 + w.plan.windows.size());

    // oracle: plain FedAvg per pass with the same labeled substreams
    RngStream root(5, "fl/run/dispersal");
    ModelParams model = mlp_init(data.arch, root.substream("init"));
    CHECK(trace.points[0].accuracy == doctest::Approx(evaluate(model, data.test_set)));
    long version = 0;
    for (std::size_t p = 1; p < trace.points.size(); ++p) {
        std::vector<ModelParams> trained;
        std::vector<double> weights;
        for (std::size_t k = 0; k < data.clusters[0].clients.size(); ++k) {
            RngStream rng = root.substream("train/c0/k" + std::to_string(k) + "/v" +
                                           std::to_string(version));
            trained.push_back(local_train(model, data.clusters[0].clients[k].data,
                                          in.config.local_epochs, in.config.learning_rate,
                                          in.config.batch_size, rng));
            weights.push_back(static_cast<double>(data.clusters[0].clients[k].data.size()));
        }
        model = fedavg(trained, weights);
        ++version;
        CHECK(trace.points[p].accuracy ==
              doctest::Approx(evaluate(model, data.test_set)).epsilon(1e-12));
    }
}

TEST_CASE("run_fl: horizon before the first contact leaves only the initial point") {
    MiniWorld w;
    w.constellation = {OrbitalElements{kEarthRadius + 550e3, deg2rad(90.0), 0.0, 0.0, 0.0}};
    w.ground_nodes = {make_node("c0", GroundKind::cluster, 88.0, 0.0)};
    w.horizon = 600.0; // first pass happens around a quarter period (~1400 s)
    w.plan = compute_contact_plan(w.constellation, w.ground_nodes, w.horizon, 30.0);
    REQUIRE(w.plan.windows.empty());

    FlDataConfig dcfg;
    dcfg.n_clusters = 1;
    dcfg.clients_per_cluster = 2;
    dcfg.samples_per_client = 20;
    const FlData data = gen_synthetic_data(dcfg, 16, 3);
    FlRunInputs in = make_inputs(w, data, FlScheme::dispersal, 3);
    const TrainingTrace trace = run_fl(in);
    CHECK(trace.points.size() == 1);
    CHECK(trace.points[0].t == 0.0);
}

TEST_CASE("run_fl: consensus fixed point with zero local epochs") {
    const MiniWorld w = mini_world(14400.0);
    FlDataConfig dcfg;
    dcfg.n_clusters = 2;
    dcfg.clients_per_cluster = 3;
    dcfg.samples_per_client = 20;
    const FlData data = gen_synthetic_data(dcfg, 16, 7);

    for (FlScheme scheme :
         {FlScheme::dispersal, FlScheme::hierarchical_gs, FlScheme::isl_gossip}) {
        FlRunInputs in = make_inputs(w, data, scheme, 7);
        in.config.local_epochs = 0;
        const TrainingTrace trace = run_fl(in);
        REQUIRE(!trace.points.empty());
        for (const auto& p : trace.points)
            CHECK(p.accuracy == doctest::Approx(trace.points[0].accuracy));
    }
}

TEST_CASE("run_fl: dispersal never touches feeder links or ISLs") {
    const MiniWorld w = mini_world(21600.0);
    FlDataConfig dcfg;
    dcfg.n_clusters = 2;
    dcfg.clients_per_cluster = 3;
    dcfg.samples_per_client = 20;
    const FlData data = gen_synthetic_data(dcfg, 16, 11);

    MetricsLog metrics;
    FlRunInputs in = make_inputs(w, data, FlScheme::dispersal, 11);
    run_fl(in, &metrics);

    int user_transfers = 0;
    for (const auto& r : metrics.records()) {
        if (r.name != "transfer") continue;
        const auto link = r.tags.at("link");
        CHECK(link != "feeder");
        CHECK(link != "isl");
        if (link == "user") ++user_transfers;
    }
    CHECK(user_transfers > 0);
}

TEST_CASE("run_fl: baselines do use their infrastructure") {
    const MiniWorld w = mini_world(21600.0);
    FlDataConfig dcfg;
    dcfg.n_clusters = 2;
    dcfg.clients_per_cluster = 3;
    dcfg.samples_per_client = 20;
    const FlData data = gen_synthetic_data(dcfg, 16, 13);

    MetricsLog m_h, m_g;
    FlRunInputs in_h = make_inputs(w, data, FlScheme::hierarchical_gs, 13);
    run_fl(in_h, &m_h);
    FlRunInputs in_g = make_inputs(w, data, FlScheme::isl_gossip, 13);
    run_fl(in_g, &m_g);

    auto count_link = [](const MetricsLog& m, const std::string& link) {
        int n = 0;
        for (const auto& r : m.records())
            if (r.name == "transfer" && r.tags.at("link") == link) ++n;
        return n;
    };
    CHECK(count_link(m_h, "feeder") > 0);
    CHECK(count_link(m_g, "isl") > 0);
}

TEST_CASE("run_fl: trace timestamps decompose into wait + transfer + compute") {
    const MiniWorld w = mini_world(14400.0);
    FlDataConfig dcfg;
    dcfg.n_clusters = 2;
    dcfg.clients_per_cluster = 3;
    dcfg.samples_per_client = 20;
    const FlData data = gen_synthetic_data(dcfg, 16, 17);

    for (FlScheme scheme :
         {FlScheme::dispersal, FlScheme::hierarchical_gs, FlScheme::isl_gossip}) {
        FlRunInputs in = make_inputs(w, data, scheme, 17);
        const TrainingTrace trace = run_fl(in);
        for (const auto& p : trace.points) {
            CHECK(p.t == p.wait_s + p.transfer_s + p.compute_s);
            CHECK(p.wait_s >= 0.0);
            CHECK(p.transfer_s >= 0.0);
            CHECK(p.compute_s >= 0.0);
        }
    }
}

TEST_CASE("run_fl: scheme/topology mismatches are rejected before simulation") {
    const MiniWorld w = mini_world(7200.0);
    FlDataConfig dcfg;
    dcfg.n_clusters = 2;
    dcfg.clients_per_cluster = 2;
    dcfg.samples_per_client = 20;
    const FlData data = gen_synthetic_data(dcfg, 16, 19);

    FlRunInputs no_topo = make_inputs(w, data, FlScheme::isl_gossip, 19);
    no_topo.topology = IslTopology{}; // mode none
    CHECK_THROWS_AS(run_fl(no_topo), ValidationError);

    MiniWorld no_station = w;
    no_station.ground_nodes.pop_back(); // drop the station
    FlRunInputs hier = make_inputs(no_station, data, FlScheme::hierarchical_gs, 19);
    CHECK_THROWS_AS(run_fl(hier), ValidationError);
}

TEST_CASE("property: fedavg and dispersal_fuse stay inside the coordinate hull") {
    const MlpArch arch{4, 6, 3};
    RngStream rng(23, "hull");
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<ModelParams> models;
        std::vector<double> weights;
        const int k = 2 + static_cast<int>(rng.uniform_int(4));
        for (int i = 0; i < k; ++i) {
            models.push_back(mlp_init(arch, rng.substream("m" + std::to_string(trial) +
                                                          "_" + std::to_string(i))));
            weights.push_back(rng.uniform(0.1, 5.0));
        }
        const ModelParams avg = fedavg(models, weights);
        for (int c = 0; c < arch.param_count(); ++c) {
            double lo = models[0].values[c], hi = models[0].values[c];
            for (const auto& m : models) {
                lo = std::min(lo, m.values[c]);
                hi = std::max(hi, m.values[c]);
            }
            CHECK(avg.values[c] >= lo - 1e-12);
            CHECK(avg.values[c] <= hi + 1e-12);
        }

        const CarriedModel carried{0, models[1], 0, 0.0};
        const double alpha = rng.uniform(0.05, 0.95);
        const ModelParams fused = dispersal_fuse(models[0], carried, alpha);
        for (int c = 0; c < arch.param_count(); ++c) {
            const double lo = std::min(models[0].values[c], models[1].values[c]);
            const double hi = std::max(models[0].values[c], models[1].values[c]);
            CHECK(fused.values[c] >= lo - 1e-12);
            CHECK(fused.values[c] <= hi + 1e-12);
        }
    }
}

TEST_CASE("run_fl: staleness is recorded when carried models fuse") {
    const MiniWorld w = mini_world(21600.0);
    FlDataConfig dcfg;
    dcfg.n_clusters = 2;
    dcfg.clients_per_cluster = 2;
    dcfg.samples_per_client = 20;
    const FlData data = gen_synthetic_data(dcfg, 16, 29);

    MetricsLog metrics;
    FlRunInputs in = make_inputs(w, data, FlScheme::dispersal, 29);
    run_fl(in, &metrics);
    int fusions = 0;
    for (const auto& r : metrics.records()) {
        if (r.name != "fuse_staleness") continue;
        ++fusions;
        CHECK(r.value >= 0.0);
    }
    CHECK(fusions > 0);
}
