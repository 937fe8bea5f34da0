#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fluidsim/contacts.hpp"
#include "fluidsim/simcore.hpp"

namespace fluidsim {

/// Shared parameter blocks and the models composed from them. Block reuse
/// across models is the point of the scheme.
struct BlockLibrary {
    std::map<std::string, double> blocks;                      // id -> bytes
    std::map<std::string, std::vector<std::string>> models;    // id -> block ids

    void validate() const;
    double model_bytes(const std::string& model_id) const;
    double total_bytes() const;
};

struct CacheState {
    std::vector<std::set<std::string>> cached; // per satellite
    std::vector<double> capacity;              // bytes per satellite

    double used(int sat, const BlockLibrary& lib) const;
    bool fits(int sat, const std::string& block, const BlockLibrary& lib) const;
    bool within_capacity(const BlockLibrary& lib) const;
};

/// Per-cluster model popularity and request rate. Cluster order follows the
/// cluster-kind ground nodes of the scenario.
struct DemandModel {
    std::vector<std::map<std::string, double>> model_probs;
    std::vector<double> request_rate; // requests/second per cluster

    void validate(const BlockLibrary& lib) const;
};

enum class DownloadStatus { hit_local, hit_with_isl_fetch, miss };

std::string to_string(DownloadStatus s);

struct DownloadRequest {
    int id = 0;
    int cluster = 0; // index into the demand/cluster-ground order
    std::string model_id;
    double t_arrival = 0.0;
};

struct DownloadOutcome {
    int request_id = 0;
    DownloadStatus status = DownloadStatus::miss;
    double completion_time = 0.0; // s from arrival; 0 for miss
    std::map<std::string, int> blocks_from; // ISL-fetched block -> source sat
    int serving_sat = -1;
};

struct MulticastTransmission {
    std::string block_id;
    std::set<int> recipients; // request ids
    double start_time = 0.0;  // relative to schedule start
    double duration = 0.0;
};

struct MulticastSchedule {
    std::vector<MulticastTransmission> transmissions;
    double makespan = 0.0;
    double unicast_makespan = 0.0; // sum of full per-request model times
};

struct DownloadScenario {
    const BlockLibrary* library = nullptr;
    const DemandModel* demand = nullptr;
    const ContactPlan* plan = nullptr;
    const std::vector<OrbitalElements>* constellation = nullptr;
    const std::vector<GroundNode>* ground_nodes = nullptr; // clusters in demand order
    std::vector<int> cluster_grounds; // ground indices of the demand clusters
    IslTopology topology;
    LinkSet links;
    double isl_budget = 2.0; // s
};

/// Expected fraction of requests served (locally or with an in-budget ISL
/// fetch), with the expectation taken over the demand distribution and
/// request times uniform over the plan horizon. Deterministic quadrature
/// over the visibility-change intervals of each cluster; ISL propagation
/// inside an interval is evaluated at the interval midpoint.
double hit_ratio(const CacheState& cache, const DownloadScenario& sc);

/// Greedy cache placement: repeatedly adds the (satellite, block) pair with
/// the best marginal hit-ratio gain per byte (lazy re-evaluation; ties by
/// gain, then sat id, then block id) until nothing fits or gains vanish.
CacheState place_blocks_greedy(const DownloadScenario& sc,
                               const std::vector<double>& capacity_bytes);

/// Serves one request at its arrival instant: picks the visible satellite
/// minimizing completion time (downlink of every model block plus any ISL
/// fetches within budget); miss when no visible satellite can assemble the
/// model. Fetched blocks are relayed, not re-cached.
DownloadOutcome serve_request(const DownloadRequest& req, const CacheState& cache,
                              const DownloadScenario& sc);

/// One transmission per distinct needed block, most-shared block first (ties
/// by block id); recipients are all pending requests needing that block.
MulticastSchedule schedule_multicast(const std::vector<DownloadRequest>& pending,
                                     const BlockLibrary& library, const LinkModel& link);

struct DownloadSummary {
    int total = 0;
    int hit_local = 0;
    int hit_isl = 0;
    int miss = 0;
    double hit_ratio_empirical = 0.0;
    double mean_completion_time = 0.0;     // over served requests
    double makespan_ratio_vs_unicast = 1.0; // sum of batch makespans / unicast sum
};

struct DownloadRunResult {
    std::vector<DownloadRequest> requests;
    std::vector<DownloadOutcome> outcomes;
    DownloadSummary summary;
};

struct DownloadRunConfig {
    double horizon = 7200.0;
    bool multicast = true;
    double batch_window = 5.0; // s, co-pending requests grouped per satellite
    std::uint64_t seed = 1;
};

/// Event-driven service of Poisson request arrivals with per-satellite
/// downlink queues; multicast mode batches co-pending requests inside
/// `batch_window`. Optional link erasure retransmits whole blocks.
DownloadRunResult run_download(const DownloadScenario& sc, const CacheState& cache,
                               const DownloadRunConfig& cfg,
                               MetricsLog* metrics_out = nullptr);

struct LibraryGenConfig {
    int n_blocks = 16;
    int n_models = 6;
    int blocks_per_model = 5;
    double shared_fraction = 0.25; // fraction of the block pool reused across models
    double block_min_bytes = 4e6;
    double block_max_bytes = 1.2e7;
};

BlockLibrary generate_library(const LibraryGenConfig& cfg, std::uint64_t seed);

/// Zipf(exponent) popularity over models with a per-cluster rotation so
/// clusters disagree about which models are hot.
DemandModel generate_demand(const BlockLibrary& lib, int n_clusters,
                            double rate_per_cluster, double zipf_exponent);

std::string download_outcomes_to_csv(const std::vector<DownloadRequest>& requests,
                                     const std::vector<DownloadOutcome>& outcomes,
                                     const std::vector<std::string>& cluster_ids);

} // namespace fluidsim
