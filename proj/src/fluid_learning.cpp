#include "fluidsim/fluid_learning.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <utility>

#include "fluidsim/error.hpp"

namespace fluidsim {

std::string to_string(FlScheme s) {
    switch (s) {
        case FlScheme::dispersal: return "dispersal";
        case FlScheme::hierarchical_gs: return "hierarchical_gs";
        case FlScheme::isl_gossip: return "isl_gossip";
    }
    return "?";
}

void FlSchemeConfig::validate() const {
    ValidationCollector v;
    if (local_epochs < 0) v.fail("learning.local_epochs", "must be non-negative");
    if (!(learning_rate > 0.0)) v.fail("learning.learning_rate", "must be positive");
    if (batch_size <= 0) v.fail("learning.batch_size", "must be positive");
    if (!(mixing_alpha > 0.0) || !(mixing_alpha < 1.0))
        v.fail("learning.mixing_alpha", "must be in (0, 1)");
    if (gossip_degree < 1) v.fail("learning.gossip_degree", "must be >= 1");
    if (!(aggregation_period > 0.0))
        v.fail("learning.aggregation_period", "must be positive");
    if (seconds_per_epoch < 0.0)
        v.fail("learning.seconds_per_epoch", "must be non-negative");
    v.throw_if_failed();
}

FlData gen_synthetic_data(const FlDataConfig& cfg, int hidden, std::uint64_t seed) {
    ValidationCollector v;
    if (cfg.labels_per_cluster > cfg.n_classes)
        v.fail("data.labels_per_cluster", "must be <= n_classes");
    if (cfg.labels_per_cluster < 1) v.fail("data.labels_per_cluster", "must be >= 1");
    if (cfg.n_clusters < 1) v.fail("data.n_clusters", "must be >= 1");
    if (cfg.clients_per_cluster < 1) v.fail("data.clients_per_cluster", "must be >= 1");
    if (cfg.samples_per_client < 1) v.fail("data.samples_per_client", "must be >= 1");
    if (cfg.dim < 1) v.fail("data.dim", "must be >= 1");
    if (cfg.n_classes < 2) v.fail("data.n_classes", "must be >= 2");
    v.throw_if_failed();

    RngStream root(seed, "fl/data");

    RngStream centers_rng = root.substream("centers");
    std::vector<Vector> centers(cfg.n_classes);
    for (int c = 0; c < cfg.n_classes; ++c) {
        centers[c] = Vector(cfg.dim);
        for (int d = 0; d < cfg.dim; ++d)
            centers[c][d] = cfg.center_scale * centers_rng.normal();
    }

    FlData out;
    out.arch = MlpArch{cfg.dim, hidden, cfg.n_classes};

    for (int c = 0; c < cfg.n_clusters; ++c) {
        RegionalCluster cluster;
        cluster.cluster_id = c;
        cluster.regional_model = mlp_zero(out.arch);
        for (int l = 0; l < cfg.labels_per_cluster; ++l)
            cluster.label_set.push_back((c * cfg.labels_per_cluster + l) % cfg.n_classes);

        for (int k = 0; k < cfg.clients_per_cluster; ++k) {
            RngStream rng = root.substream("cluster/" + std::to_string(c) +
                                           "/client/" + std::to_string(k));
            ClientState client;
            client.client_id = c * cfg.clients_per_cluster + k;
            client.data.features = Matrix(cfg.samples_per_client, cfg.dim);
            client.data.labels.resize(cfg.samples_per_client);
            for (int i = 0; i < cfg.samples_per_client; ++i) {
                const int label = cluster.label_set[rng.uniform_int(cluster.label_set.size())];
                client.data.labels[i] = label;
                for (int d = 0; d < cfg.dim; ++d)
                    client.data.features(i, d) =
                        centers[label][d] + cfg.noise_sigma * rng.normal();
            }
            client.local_model = mlp_zero(out.arch);
            cluster.clients.push_back(std::move(client));
        }
        out.clusters.push_back(std::move(cluster));
    }

    RngStream test_rng = root.substream("test");
    const int n_test = cfg.n_classes * cfg.test_samples_per_class;
    out.test_set.features = Matrix(n_test, cfg.dim);
    out.test_set.labels.resize(n_test);
    int row = 0;
    for (int c = 0; c < cfg.n_classes; ++c) {
        for (int i = 0; i < cfg.test_samples_per_class; ++i, ++row) {
            out.test_set.labels[row] = c;
            for (int d = 0; d < cfg.dim; ++d)
                out.test_set.features(row, d) =
                    centers[c][d] + cfg.noise_sigma * test_rng.normal();
        }
    }
    return out;
}

ModelParams dispersal_fuse(const ModelParams& regional, const CarriedModel& carried,
                           double alpha) {
    if (!(regional.arch == carried.payload.arch))
        throw ValidationError("dispersal_fuse: architecture mismatch");
    ModelParams out = regional;
    out.values = alpha * regional.values + (1.0 - alpha) * carried.payload.values;
    return out;
}

namespace {

struct TransferLeg {
    const char* link;
    double duration;
};

// Per-satellite state; only the fields of the active scheme are used.
struct SatState {
    std::optional<CarriedModel> carried;                // dispersal
    std::optional<ModelParams> global_copy;             // hierarchical
    long global_version = -1;                           // hierarchical
    std::map<int, std::pair<ModelParams, int>> pending; // hierarchical
    ModelParams replica;                                // isl_gossip
};

struct FlRun {
    const FlRunInputs& in;
    Engine engine;
    RngStream root;
    TrainingTrace trace;

    std::vector<RegionalCluster> clusters;
    std::vector<SatState> sats;
    std::vector<long> cluster_adopted_version;          // hierarchical
    ModelParams station_global;                         // one wired cloud
    long station_version = 0;
    std::map<int, std::pair<ModelParams, int>> station_pool;
    int quorum = 0;

    std::vector<int> cluster_ground; // cluster idx -> ground node idx

    explicit FlRun(const FlRunInputs& inputs)
        : in(inputs), root(inputs.seed, "fl/run/" + to_string(inputs.config.scheme)),
          clusters(inputs.clusters) {}

    double prop_to_ground(int sat, int ground_idx, double t) const {
        const EcefPosition p = eci_to_ecef(propagate((*in.constellation)[sat], t), t);
        return propagation_delay(slant_range(p, (*in.ground_nodes)[ground_idx].location));
    }

    void log_transfers(double t, const std::vector<TransferLeg>& legs) {
        for (const auto& leg : legs)
            engine.metrics().append("transfer", t, leg.duration,
                                    {{"link", leg.link},
                                     {"scheme", to_string(in.config.scheme)}});
    }

    void log_point(const ModelParams& model, double wait, double transfer, double compute) {
        const double t = wait + transfer + compute;
        TracePoint p{t, evaluate(model, *in.test_set), wait, transfer, compute};
        trace.points.push_back(p);
        engine.metrics().append("test_accuracy", t, p.accuracy,
                                {{"scheme", to_string(in.config.scheme)}});
    }

    std::vector<ModelParams> train_clients(RegionalCluster& cl, const ModelParams& base) {
        std::vector<ModelParams> trained;
        trained.reserve(cl.clients.size());
        for (std::size_t k = 0; k < cl.clients.size(); ++k) {
            RngStream rng = root.substream(
                "train/c" + std::to_string(cl.cluster_id) + "/k" + std::to_string(k) +
                "/v" + std::to_string(cl.regional_version));
            trained.push_back(local_train(base, cl.clients[k].data, in.config.local_epochs,
                                          in.config.learning_rate, in.config.batch_size,
                                          rng));
            cl.clients[k].local_model = trained.back();
        }
        return trained;
    }

    std::vector<double> client_weights(const RegionalCluster& cl) const {
        std::vector<double> w;
        for (const auto& c : cl.clients) w.push_back(static_cast<double>(c.data.size()));
        return w;
    }
};

double total_duration(const std::vector<TransferLeg>& legs) {
    double d = 0.0;
    for (const auto& leg : legs) d += leg.duration;
    return d;
}

} // namespace

TrainingTrace run_fl(const FlRunInputs& in, MetricsLog* metrics_out) {
    in.config.validate();
    if (!in.plan || !in.test_set || !in.constellation || !in.ground_nodes)
        throw ValidationError("run_fl: missing plan/test_set/constellation/ground_nodes");
    if (in.clusters.empty()) throw ValidationError("run_fl: no clusters");

    FlRun run(in);
    run.trace.scheme = in.config.scheme;
    run.trace.seed = in.seed;

    std::vector<int> cluster_grounds;
    std::vector<int> station_grounds;
    std::map<std::string, int> ground_index;
    for (int g = 0; g < static_cast<int>(in.ground_nodes->size()); ++g) {
        ground_index[(*in.ground_nodes)[g].id] = g;
        if ((*in.ground_nodes)[g].kind == GroundKind::cluster)
            cluster_grounds.push_back(g);
        else
            station_grounds.push_back(g);
    }
    if (cluster_grounds.size() < run.clusters.size())
        throw ValidationError("run_fl: fewer cluster ground nodes than data clusters");
    for (std::size_t c = 0; c < run.clusters.size(); ++c) {
        run.cluster_ground.push_back(cluster_grounds[c]);
        run.clusters[c].ground_id = (*in.ground_nodes)[cluster_grounds[c]].id;
    }

    if (in.config.scheme == FlScheme::hierarchical_gs && station_grounds.empty())
        throw ValidationError("run_fl: hierarchical_gs requires at least one station");
    if (in.config.scheme == FlScheme::isl_gossip && in.topology.mode != IslMode::grid)
        throw ValidationError("run_fl: isl_gossip requires an ISL grid topology");

    const MlpArch arch = run.clusters.front().regional_model.arch;
    const ModelParams init = mlp_init(arch, run.root.substream("init"));
    for (auto& cl : run.clusters) {
        cl.regional_model = init;
        cl.regional_version = 0;
    }
    run.sats.resize(in.constellation->size());
    for (auto& s : run.sats) s.replica = init;
    run.cluster_adopted_version.assign(run.clusters.size(), 0);
    run.station_global = init;
    run.quorum = in.config.station_quorum > 0
                     ? in.config.station_quorum
                     : std::max<int>(1, static_cast<int>(run.clusters.size()) / 2);

    std::map<int, int> ground_to_cluster;
    for (std::size_t c = 0; c < run.clusters.size(); ++c)
        ground_to_cluster[run.cluster_ground[c]] = static_cast<int>(c);

    run.log_point(init, 0.0, 0.0, 0.0);

    const double model_bytes = init.payload_bytes();
    const double tx_user = transmission_time(model_bytes, in.links.user);
    const double tx_feeder = transmission_time(model_bytes, in.links.feeder);
    const double tx_isl = transmission_time(model_bytes, in.links.isl);
    const double train_time = in.config.local_epochs * in.config.seconds_per_epoch;
    const FlSchemeConfig* cfg = &in.config;

    // ---- window-driven service ----
    for (const auto& w : in.plan->windows) {
        if (w.t_start >= in.horizon) continue;
        auto git = ground_index.find(w.ground_id);
        if (git == ground_index.end()) continue;
        const int g = git->second;
        const GroundKind kind = (*in.ground_nodes)[g].kind;

        if (kind == GroundKind::cluster) {
            auto cit = ground_to_cluster.find(g);
            if (cit == ground_to_cluster.end()) continue;
            const int ci = cit->second;
            const int sat = w.sat_id;
            const double t0 = w.t_start;

            run.engine.schedule(t0, "cluster_pass", [&run, cfg, ci, sat, t0, g, tx_user,
                                                     train_time]() {
                const double prop = run.prop_to_ground(sat, g, t0);
                const int n_clients = static_cast<int>(run.clusters[ci].clients.size());

                std::vector<TransferLeg> legs;
                std::optional<CarriedModel> delivery;
                std::optional<ModelParams> global_snapshot;
                long global_version = -1;
                std::optional<ModelParams> replica_snapshot;

                switch (cfg->scheme) {
                    case FlScheme::dispersal:
                        if (run.sats[sat].carried) {
                            delivery = run.sats[sat].carried;
                            legs.push_back({"user", tx_user + prop});
                        }
                        for (int i = 0; i < n_clients; ++i)
                            legs.push_back({"user", tx_user + prop});
                        legs.push_back({"user", tx_user + prop});
                        break;
                    case FlScheme::hierarchical_gs:
                        if (run.sats[sat].global_copy &&
                            run.sats[sat].global_version >
                                run.cluster_adopted_version[ci]) {
                            global_snapshot = run.sats[sat].global_copy;
                            global_version = run.sats[sat].global_version;
                            legs.push_back({"user", tx_user + prop});
                        }
                        for (int i = 0; i < n_clients; ++i)
                            legs.push_back({"user", tx_user + prop});
                        break;
                    case FlScheme::isl_gossip:
                        replica_snapshot = run.sats[sat].replica;
                        legs.push_back({"user", tx_user + prop});
                        for (int i = 0; i < n_clients; ++i)
                            legs.push_back({"user", tx_user + prop});
                        break;
                }

                const double transfer = total_duration(legs);
                const double tf = t0 + transfer + train_time;

                run.engine.schedule(tf, "cluster_commit", [&run, cfg, ci, sat, t0, tf,
                                                           transfer, train_time, legs,
                                                           delivery, global_snapshot,
                                                           global_version,
                                                           replica_snapshot]() {
                    auto& cl = run.clusters[ci];
                    run.log_transfers(tf, legs);
                    switch (cfg->scheme) {
                        case FlScheme::dispersal: {
                            ModelParams base = cl.regional_model;
                            if (delivery) {
                                const double staleness = tf - delivery->pickup_time;
                                double alpha = cfg->mixing_alpha;
                                if (cfg->staleness_tau > 0.0)
                                    alpha += (1.0 - alpha) *
                                             (1.0 - std::exp(-staleness / cfg->staleness_tau));
                                base = dispersal_fuse(base, *delivery, alpha);
                                run.engine.metrics().append(
                                    "fuse_staleness", tf, staleness,
                                    {{"scheme", "dispersal"},
                                     {"cluster", std::to_string(cl.cluster_id)}});
                            }
                            auto trained = run.train_clients(cl, base);
                            ModelParams agg = fedavg(trained, run.client_weights(cl));
                            cl.regional_model = agg;
                            cl.regional_version++;
                            run.sats[sat].carried = CarriedModel{sat, agg, cl.cluster_id, tf};
                            run.log_point(agg, t0, transfer, train_time);
                            break;
                        }
                        case FlScheme::hierarchical_gs: {
                            if (global_snapshot &&
                                global_version > run.cluster_adopted_version[ci]) {
                                cl.regional_model = *global_snapshot;
                                run.cluster_adopted_version[ci] = global_version;
                            }
                            auto trained = run.train_clients(cl, cl.regional_model);
                            ModelParams agg = fedavg(trained, run.client_weights(cl));
                            cl.regional_model = agg;
                            cl.regional_version++;
                            run.sats[sat].pending[cl.cluster_id] = {agg, cl.sample_count()};
                            break;
                        }
                        case FlScheme::isl_gossip: {
                            auto trained = run.train_clients(cl, *replica_snapshot);
                            ModelParams agg = fedavg(trained, run.client_weights(cl));
                            cl.regional_model = agg;
                            cl.regional_version++;
                            run.sats[sat].replica = agg;
                            break;
                        }
                    }
                });
            });
        } else if (kind == GroundKind::station &&
                   in.config.scheme == FlScheme::hierarchical_gs) {
            const int sat = w.sat_id;
            const double t0 = w.t_start;
            run.engine.schedule(t0, "station_pass", [&run, sat, t0, g, tx_feeder]() {
                const double prop = run.prop_to_ground(sat, g, t0);
                auto uploads = run.sats[sat].pending; // ferried updates leave the sat now
                run.sats[sat].pending.clear();

                std::vector<TransferLeg> legs;
                for (std::size_t i = 0; i < uploads.size(); ++i)
                    legs.push_back({"feeder", tx_feeder + prop});
                legs.push_back({"feeder", tx_feeder + prop}); // global refresh down
                const double transfer = total_duration(legs);
                const double tf = t0 + transfer;

                run.engine.schedule(tf, "station_commit", [&run, sat, t0, tf, transfer,
                                                           legs, uploads]() {
                    run.log_transfers(tf, legs);
                    for (const auto& [cid, update] : uploads)
                        run.station_pool[cid] = update;
                    if (static_cast<int>(run.station_pool.size()) >= run.quorum) {
                        std::vector<ModelParams> models;
                        std::vector<double> weights;
                        for (const auto& [cid, update] : run.station_pool) {
                            models.push_back(update.first);
                            weights.push_back(static_cast<double>(update.second));
                        }
                        run.station_global = fedavg(models, weights);
                        run.station_version++;
                        run.station_pool.clear();
                        run.log_point(run.station_global, t0, transfer, 0.0);
                    }
                    run.sats[sat].global_copy = run.station_global;
                    run.sats[sat].global_version = run.station_version;
                });
            });
        }
    }

    // ---- synchronous gossip rounds ----
    if (in.config.scheme == FlScheme::isl_gossip) {
        const int n_sats = static_cast<int>(in.constellation->size());
        for (double t = in.config.aggregation_period; t <= in.horizon;
             t += in.config.aggregation_period) {
            const double t_round = t;
            run.engine.schedule(t_round, "gossip_round", [&run, cfg, n_sats, t_round,
                                                          tx_isl]() {
                std::vector<Vec3> pos(n_sats);
                for (int i = 0; i < n_sats; ++i)
                    pos[i] = eci_to_ecef(propagate((*run.in.constellation)[i], t_round),
                                         t_round).r;
                std::vector<std::vector<int>> partners(n_sats);
                double d_round = 0.0;
                for (int i = 0; i < n_sats; ++i) {
                    std::vector<int> nb = run.in.topology.neighbors_of(i);
                    RngStream rng = run.root.substream(
                        "gossip/t" + std::to_string(static_cast<long long>(t_round)) +
                        "/sat" + std::to_string(i));
                    rng.shuffle(nb);
                    const int take = std::min<int>(cfg->gossip_degree,
                                                   static_cast<int>(nb.size()));
                    for (int j = 0; j < take; ++j) {
                        partners[i].push_back(nb[j]);
                        d_round = std::max(
                            d_round, tx_isl + propagation_delay((pos[i] - pos[nb[j]]).norm()));
                    }
                }
                const double tf = t_round + d_round;
                run.engine.schedule(tf, "gossip_commit", [&run, partners, t_round, tf,
                                                          d_round, n_sats, tx_isl]() {
                    std::vector<TransferLeg> legs;
                    std::vector<ModelParams> next(n_sats);
                    for (int i = 0; i < n_sats; ++i) {
                        std::vector<ModelParams> group{run.sats[i].replica};
                        for (int j : partners[i]) {
                            group.push_back(run.sats[j].replica);
                            legs.push_back({"isl", tx_isl});
                        }
                        next[i] = fedavg(group, std::vector<double>(group.size(), 1.0));
                    }
                    run.log_transfers(tf, legs);
                    ModelParams mean = mlp_zero(next.front().arch);
                    for (int i = 0; i < n_sats; ++i) {
                        run.sats[i].replica = next[i];
                        mean.values += next[i].values / static_cast<double>(n_sats);
                    }
                    run.log_point(mean, t_round, d_round, 0.0);
                });
            });
        }
    }

    run.engine.run_until(in.horizon);

    std::sort(run.trace.points.begin(), run.trace.points.end(),
              [](const TracePoint& a, const TracePoint& b) { return a.t < b.t; });
    if (metrics_out) *metrics_out = run.engine.metrics();
    return run.trace;
}

double centralized_reference_accuracy(const std::vector<RegionalCluster>& clusters,
                                      const Dataset& test_set, const MlpArch& arch,
                                      double learning_rate, int batch_size,
                                      int epochs, std::uint64_t seed) {
    int total = 0;
    for (const auto& cl : clusters) total += cl.sample_count();
    if (total == 0) throw ValidationError("centralized reference: no training data");

    Dataset pooled;
    pooled.features = Matrix(total, arch.input_dim);
    pooled.labels.resize(total);
    int row = 0;
    for (const auto& cl : clusters) {
        for (const auto& c : cl.clients) {
            for (int i = 0; i < c.data.size(); ++i, ++row) {
                pooled.features.row(row) = c.data.features.row(i);
                pooled.labels[row] = c.data.labels[i];
            }
        }
    }
    RngStream rng(seed, "fl/centralized");
    ModelParams model = mlp_init(arch, rng.substream("init"));
    model = local_train(model, pooled, epochs, learning_rate, batch_size,
                        rng.substream("train"));
    return evaluate(model, test_set);
}

std::string trace_to_csv(const TrainingTrace& trace) {
    std::string out = "scheme,seed,t_s,test_accuracy\n";
    char buf[128];
    for (const auto& p : trace.points) {
        std::snprintf(buf, sizeof(buf), "%s,%llu,%.3f,%.6f\n",
                      to_string(trace.scheme).c_str(),
                      static_cast<unsigned long long>(trace.seed), p.t, p.accuracy);
        out += buf;
    }
    return out;
}

} // namespace fluidsim
