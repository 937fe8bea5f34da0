#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fluidsim/contacts.hpp"
#include "fluidsim/simcore.hpp"

namespace fluidsim {

/// One stage of a cascaded early-exit model. `param_bytes` is the size of
/// the stage's parameters, charged when a migration target does not already
/// hold them.
struct SubModel {
    double compute_cost = 0.0;     // FLOP
    double activation_size = 0.0;  // bytes handed to the next stage
    double exit_accuracy = 0.0;    // expected accuracy when exiting here
    double param_bytes = 0.0;
};

struct CascadeModel {
    std::vector<SubModel> stages;

    int depth() const { return static_cast<int>(stages.size()); }
};

/// Validates the profile; exit accuracies must be non-decreasing along the
/// cascade (an early exit can only cost accuracy, never gain it).
CascadeModel build_cascade(const std::vector<SubModel>& profile);

enum class TierKind { device, satellite, station };

/// Per-tier FLOP rates; defaults keep station >= satellite >= device.
struct Capacities {
    double device_rate = 2e8;
    double satellite_rate = 1e9;
    double station_rate = 1e10;

    double rate(TierKind t) const {
        switch (t) {
            case TierKind::device: return device_rate;
            case TierKind::satellite: return satellite_rate;
            case TierKind::station: return station_rate;
        }
        return 0.0;
    }
    void validate() const;
};

/// A compute node in the inference fabric: a satellite index, or a ground
/// node index for device (cluster) and station tiers.
struct InfNode {
    TierKind tier = TierKind::satellite;
    int index = 0;
    bool operator==(const InfNode&) const = default;
    bool operator<(const InfNode& o) const {
        if (tier != o.tier) return tier < o.tier;
        return index < o.index;
    }
};

struct Placement {
    std::vector<InfNode> stage_nodes; // one entry per cascade stage
    int serving_sat = -1;
    double epoch_start = 0.0;
};

struct InferenceTask {
    int id = 0;
    int origin_ground = 0; // ground-node index of the originating cluster
    double arrival_time = 0.0;
    double input_size = 0.0; // bytes
    double min_accuracy = 0.0;
    double deadline = 0.0;   // s, relative to arrival
};

enum class TaskStatus { completed, deadline_missed, dropped_no_coverage };

std::string to_string(TaskStatus s);

struct TaskOutcome {
    int task_id = 0;
    TaskStatus status = TaskStatus::dropped_no_coverage;
    int exit_index = -1;          // -1 when no result was produced
    double achieved_accuracy = 0.0;
    double e2e_latency = 0.0;     // s; 0 when no result was produced
    int h_migrations = 0;
    int v_migrations = 0;
    // Charge decomposition of e2e_latency (wait + transfer + compute).
    double charged_wait = 0.0;
    double charged_transfer = 0.0;
    double charged_compute = 0.0;
};

struct MigrationChoice {
    enum class Kind { horizontal, vertical, drop };
    Kind kind = Kind::drop;
    int target_sat = -1; // horizontal target
};

/// Context handed to a migration policy at a decision point.
struct MigrationContext {
    int task_id = 0;
    double now = 0.0;
    double deadline_abs = 0.0;
    std::vector<std::pair<MigrationChoice, double>> options; // choice, predicted completion
};

/// Decides at handover points. The default greedy picks the feasible option
/// with minimum predicted completion time; scripted policies (tests) replay
/// fixed choices.
class MigrationPolicy {
public:
    virtual ~MigrationPolicy() = default;
    virtual MigrationChoice decide(const MigrationContext& ctx) = 0;
};

class GreedyMigrationPolicy final : public MigrationPolicy {
public:
    MigrationChoice decide(const MigrationContext& ctx) override;
};

/// Replays a fixed script of option indices (into MigrationContext::options,
/// which arrives sorted by predicted completion); a negative entry or an
/// exhausted script drops. Used to enumerate decision sequences in tests.
class ScriptedMigrationPolicy final : public MigrationPolicy {
public:
    explicit ScriptedMigrationPolicy(std::vector<int> option_script)
        : script_(std::move(option_script)) {}
    MigrationChoice decide(const MigrationContext& ctx) override;
    int decision_points() const { return consumed_; }

private:
    std::vector<int> script_;
    int consumed_ = 0;
};

struct InferencePolicyConfig {
    bool migration_enabled = true;
    bool allow_horizontal = true;
    bool allow_vertical = true;
    double placement_epoch = 60.0; // s
    int queue_threshold = 0;       // 0 disables queue-triggered migration
    bool submodels_everywhere = true; // false: only placed stages are cached
};

struct InferenceSummary {
    int total = 0;
    int completed = 0;
    int deadline_missed = 0;
    int dropped_no_coverage = 0;
    double completion_rate = 1.0; // empty workload -> 1.0 by convention
    double mean_latency = 0.0;    // over tasks that produced a result
    double mean_accuracy = 0.0;   // over tasks that produced a result
};

struct InferenceRunInputs {
    std::vector<InferenceTask> workload; // sorted by arrival_time
    CascadeModel cascade;
    const ContactPlan* plan = nullptr;
    const std::vector<OrbitalElements>* constellation = nullptr;
    const std::vector<GroundNode>* ground_nodes = nullptr;
    LinkSet links;
    IslTopology topology;
    Capacities capacities;
    InferencePolicyConfig policy;
    double horizon = 0.0;
};

struct InferenceResult {
    std::vector<TaskOutcome> outcomes; // one per task, workload order
    InferenceSummary summary;
};

/// Estimated full-depth latency of a placement choice at time t: input
/// upload, per-stage compute along the cut, and the feeder hop when later
/// stages sit on the station. Used by place_cascade and exposed for tests.
double placement_latency_estimate(const CascadeModel& cascade, int cut,
                                  double input_size, const Capacities& caps,
                                  double user_prop, double feeder_prop,
                                  const LinkSet& links);

/// Places the head on a satellite visible from the origin at time t and the
/// tail stages either on that satellite or on a station it can reach,
/// minimizing estimated full-depth latency. Ties break toward the lower
/// satellite id, then the deeper satellite cut. Returns nullopt when no
/// satellite is visible (placement deferred).
std::optional<Placement> place_cascade(const CascadeModel& cascade,
                                       const InferenceRunInputs& in,
                                       double t, int origin_ground,
                                       double input_size);

/// exit_now iff the current exit already satisfies the QoS floor, or
/// continuing is predicted to overrun the deadline.
bool early_exit_decision(double min_accuracy, int exit_index,
                         const CascadeModel& cascade,
                         double predicted_remaining_latency,
                         double slack_to_deadline);

/// Event-driven execution: FIFO queueing per node, transfers charged from
/// the contact geometry, placements refreshed per placement epoch, and
/// migration triggered when the serving satellite's window over the origin
/// closes. The result downlink to the origin is not charged (result sizes
/// are not modeled).
InferenceResult run_inference(const InferenceRunInputs& in,
                              MigrationPolicy* policy = nullptr,
                              MetricsLog* metrics_out = nullptr);

struct WorkloadConfig {
    double rate_per_cluster = 0.2; // Hz, Poisson arrivals
    double horizon = 7200.0;
    double input_size = 2e5; // bytes
    double deadline = 30.0;
    std::vector<double> min_accuracy_choices{0.6, 0.8, 0.9};
    std::vector<double> min_accuracy_weights{0.3, 0.4, 0.3};
};

std::vector<InferenceTask> generate_workload(const WorkloadConfig& cfg,
                                             const std::vector<int>& cluster_grounds,
                                             std::uint64_t seed);

std::string outcomes_to_csv(const std::vector<TaskOutcome>& outcomes);

} // namespace fluidsim
