#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fluidsim/contacts.hpp"
#include "fluidsim/mlp.hpp"
#include "fluidsim/simcore.hpp"

namespace fluidsim {

struct ClientState {
    int client_id = 0;
    Dataset data;
    ModelParams local_model;
};

struct RegionalCluster {
    int cluster_id = 0;
    std::string ground_id; // bound to a cluster-kind ground node by run_fl
    std::vector<ClientState> clients;
    ModelParams regional_model;
    long regional_version = 0;
    std::vector<int> label_set;

    int sample_count() const {
        int n = 0;
        for (const auto& c : clients) n += c.data.size();
        return n;
    }
};

/// Model payload physically carried by a satellite between regions.
struct CarriedModel {
    int sat_id = 0;
    ModelParams payload;
    int source_cluster = 0;
    double pickup_time = 0.0;
};

enum class FlScheme { dispersal, hierarchical_gs, isl_gossip };

std::string to_string(FlScheme s);

struct FlDataConfig {
    int n_clusters = 8;
    int clients_per_cluster = 5;
    int labels_per_cluster = 3;
    int n_classes = 10;
    int dim = 16;
    int samples_per_client = 50;
    int test_samples_per_class = 100;
    double center_scale = 1.5;
    double noise_sigma = 1.0;
};

struct FlData {
    std::vector<RegionalCluster> clusters;
    Dataset test_set; // balanced over all classes
    MlpArch arch;     // dim -> hidden -> n_classes (hidden filled by caller config)
};

/// Label-restricted non-IID partition: each class has a fixed Gaussian
/// center drawn from the seed; cluster c supports labels
/// {(c*labels_per_cluster + i) mod n_classes}, which covers every class
/// whenever n_clusters*labels_per_cluster >= n_classes.
FlData gen_synthetic_data(const FlDataConfig& cfg, int hidden, std::uint64_t seed);

struct FlSchemeConfig {
    FlScheme scheme = FlScheme::dispersal;
    int local_epochs = 2;
    double learning_rate = 0.05;
    int batch_size = 10;
    double mixing_alpha = 0.5;        // dispersal
    int gossip_degree = 2;            // isl_gossip
    double aggregation_period = 300.0; // s, isl_gossip round cadence
    int station_quorum = 0;           // hierarchical; 0 -> n_clusters/2
    double seconds_per_epoch = 10.0;  // client compute-time model
    double staleness_tau = 0.0;       // 0 disables the staleness discount

    void validate() const;
};

/// alpha*regional + (1-alpha)*carried, component-wise. The caller records
/// staleness (fusion time - pickup time) in the metrics log.
ModelParams dispersal_fuse(const ModelParams& regional, const CarriedModel& carried,
                           double alpha);

struct TracePoint {
    double t = 0.0;
    double accuracy = 0.0;
    // Charge components behind the timestamp: t == wait + transfer + compute.
    double wait_s = 0.0;
    double transfer_s = 0.0;
    double compute_s = 0.0;
};

struct TrainingTrace {
    FlScheme scheme = FlScheme::dispersal;
    std::uint64_t seed = 0;
    std::vector<TracePoint> points;
};

struct FlRunInputs {
    FlSchemeConfig config;
    const ContactPlan* plan = nullptr;
    std::vector<RegionalCluster> clusters; // mutated over the run
    const Dataset* test_set = nullptr;
    const std::vector<OrbitalElements>* constellation = nullptr;
    const std::vector<GroundNode>* ground_nodes = nullptr;
    LinkSet links;
    IslTopology topology; // required grid for isl_gossip
    double horizon = 0.0;
    std::uint64_t seed = 0;
};

/// Simulates one FL scheme over the contact plan.
///
///  dispersal      — at each cluster-window start the satellite delivers its
///                   carried model (fused into the regional model), clients
///                   train, the satellite aggregates, sends the new regional
///                   model back down and carries a copy onward. Never touches
///                   feeder links or ISLs.
///  hierarchical_gs— satellites ferry cluster updates to the station tier
///                   (all stations act as one wired cloud); the station
///                   aggregates once a quorum of distinct clusters arrived
///                   and redistributes through later passes.
///  isl_gossip     — every satellite keeps a replica, refreshed at cluster
///                   passes; replicas average with gossip_degree ISL
///                   neighbors every aggregation_period (synchronous round).
///
/// Every transfer is charged transmission_time + propagation_delay at the
/// geometry of the serving instant and logged to `metrics` with a `link`
/// tag, so infrastructure isolation is directly checkable. Client uploads
/// are serialized on the shared uplink.
TrainingTrace run_fl(const FlRunInputs& in, MetricsLog* metrics_out = nullptr);

/// Accuracy of a single model trained on the pooled client data; the
/// 0.8x threshold for time-to-convergence comparisons is taken from this.
double centralized_reference_accuracy(const std::vector<RegionalCluster>& clusters,
                                      const Dataset& test_set, const MlpArch& arch,
                                      double learning_rate, int batch_size,
                                      int epochs, std::uint64_t seed);

std::string trace_to_csv(const TrainingTrace& trace);

} // namespace fluidsim
