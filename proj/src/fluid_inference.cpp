#include "fluidsim/fluid_inference.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>

#include "fluidsim/error.hpp"

namespace fluidsim {

std::string to_string(TaskStatus s) {
    switch (s) {
        case TaskStatus::completed: return "completed";
        case TaskStatus::deadline_missed: return "deadline_missed";
        case TaskStatus::dropped_no_coverage: return "dropped_no_coverage";
    }
    return "?";
}

CascadeModel build_cascade(const std::vector<SubModel>& profile) {
    if (profile.empty()) throw ValidationError("cascade: profile must be non-empty");
    ValidationCollector v;
    for (std::size_t i = 0; i < profile.size(); ++i) {
        const std::string tag = "cascade.stage[" + std::to_string(i) + "]";
        if (!(profile[i].compute_cost > 0.0)) v.fail(tag + ".compute_cost", "must be positive");
        if (profile[i].activation_size < 0.0) v.fail(tag + ".activation_size", "must be non-negative");
        if (profile[i].exit_accuracy < 0.0 || profile[i].exit_accuracy > 1.0)
            v.fail(tag + ".exit_accuracy", "must be in [0, 1]");
        if (profile[i].param_bytes < 0.0) v.fail(tag + ".param_bytes", "must be non-negative");
        if (i > 0 && profile[i].exit_accuracy < profile[i - 1].exit_accuracy)
            v.fail(tag + ".exit_accuracy",
                   "must be non-decreasing along the cascade (violated at index " +
                       std::to_string(i) + ")");
    }
    v.throw_if_failed();
    return CascadeModel{profile};
}

void Capacities::validate() const {
    ValidationCollector v;
    if (!(device_rate > 0.0)) v.fail("capacities.device_flops", "must be positive");
    if (!(satellite_rate > 0.0)) v.fail("capacities.satellite_flops", "must be positive");
    if (!(station_rate > 0.0)) v.fail("capacities.station_flops", "must be positive");
    v.throw_if_failed();
}

MigrationChoice GreedyMigrationPolicy::decide(const MigrationContext& ctx) {
    for (const auto& [choice, predicted] : ctx.options)
        if (predicted <= ctx.deadline_abs) return choice;
    return MigrationChoice{MigrationChoice::Kind::drop, -1};
}

MigrationChoice ScriptedMigrationPolicy::decide(const MigrationContext& ctx) {
    const int idx = consumed_ < static_cast<int>(script_.size())
                        ? script_[consumed_]
                        : -1;
    ++consumed_;
    if (idx < 0 || ctx.options.empty()) return MigrationChoice{MigrationChoice::Kind::drop, -1};
    return ctx.options[static_cast<std::size_t>(idx) % ctx.options.size()].first;
}

double placement_latency_estimate(const CascadeModel& cascade, int cut,
                                  double input_size, const Capacities& caps,
                                  double user_prop, double feeder_prop,
                                  const LinkSet& links) {
    const int n = cascade.depth();
    double t = transmission_time(input_size, links.user) + user_prop;
    for (int i = 0; i < cut; ++i)
        t += cascade.stages[i].compute_cost / caps.satellite_rate;
    if (cut < n) {
        const double act = cut > 0 ? cascade.stages[cut - 1].activation_size : input_size;
        t += transmission_time(act, links.feeder) + feeder_prop;
        for (int i = cut; i < n; ++i)
            t += cascade.stages[i].compute_cost / caps.station_rate;
    }
    return t;
}

namespace {

struct WindowIndex {
    // (sat, ground) -> windows sorted by start; ground -> windows sorted by start.
    std::map<std::pair<int, std::string>, std::vector<const ContactWindow*>> by_pair;
    std::map<std::string, std::vector<const ContactWindow*>> by_ground;

    explicit WindowIndex(const ContactPlan& plan) {
        for (const auto& w : plan.windows) {
            by_pair[{w.sat_id, w.ground_id}].push_back(&w);
            by_ground[w.ground_id].push_back(&w);
        }
    }

    const ContactWindow* covering(int sat, const std::string& ground, double t) const {
        auto it = by_pair.find({sat, ground});
        if (it == by_pair.end()) return nullptr;
        for (const auto* w : it->second)
            if (w->t_start <= t && t < w->t_end) return w;
        return nullptr;
    }

    std::vector<int> visible_sats(const std::string& ground, double t) const {
        std::vector<int> out;
        auto it = by_ground.find(ground);
        if (it == by_ground.end()) return out;
        for (const auto* w : it->second)
            if (w->t_start <= t && t < w->t_end) out.push_back(w->sat_id);
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    // Earliest window over `ground` starting strictly after t.
    const ContactWindow* next_window(const std::string& ground, double t) const {
        auto it = by_ground.find(ground);
        if (it == by_ground.end()) return nullptr;
        const ContactWindow* best = nullptr;
        for (const auto* w : it->second)
            if (w->t_start > t && (!best || w->t_start < best->t_start)) best = w;
        return best;
    }
};

struct Job {
    int task_id;
    int stage;
    long generation;
    double enqueue_t;
};

struct NodeState {
    bool busy = false;
    std::deque<Job> queue;
};

struct TaskState {
    InferenceTask task;
    TaskOutcome outcome;
    std::vector<InfNode> stage_nodes;
    int serving_sat = -1;
    int next_stage = 0;       // first stage not yet completed
    double state_bytes = 0.0; // activation (or input) that must move on migration
    long generation = 0;      // bumped on migration; stale events are ignored
    bool finished = false;
};

class InferenceRun {
public:
    InferenceRun(const InferenceRunInputs& in, MigrationPolicy* policy)
        : in_(in), windex_(*in.plan), policy_(policy) {}

    InferenceResult execute();
    const MetricsLog& metrics() const { return engine_.metrics(); }

private:
    const GroundNode& ground(int idx) const { return (*in_.ground_nodes)[idx]; }

    double prop_sat_ground(int sat, int ground_idx, double t) const {
        const EcefPosition p = eci_to_ecef(propagate((*in_.constellation)[sat], t), t);
        return propagation_delay(slant_range(p, ground(ground_idx).location));
    }

    // Station visible from a satellite at t, by the station's own mask.
    std::optional<int> visible_station(int sat, double t) const {
        const EcefPosition p = eci_to_ecef(propagate((*in_.constellation)[sat], t), t);
        std::optional<int> best;
        double best_prop = std::numeric_limits<double>::infinity();
        for (int g = 0; g < static_cast<int>(in_.ground_nodes->size()); ++g) {
            if (ground(g).kind != GroundKind::station) continue;
            if (elevation_angle(p, ground(g).location) < ground(g).min_elevation) continue;
            const double prop = propagation_delay(slant_range(p, ground(g).location));
            if (prop < best_prop) {
                best_prop = prop;
                best = g;
            }
        }
        return best;
    }

    void log_transfer(double t, double duration, const char* link) {
        engine_.metrics().append("transfer", t, duration, {{"link", link}});
    }

    // Predicted time to finish stages [from_stage, n) starting at `node` at
    // time t0, walking the placement and evaluating geometry at each hop.
    double predict_remaining(const TaskState& ts, int from_stage, InfNode node,
                             double t0) const {
        double t = t0;
        InfNode cur = node;
        for (int i = from_stage; i < static_cast<int>(ts.stage_nodes.size()); ++i) {
            const InfNode target = ts.stage_nodes[i];
            if (!(target == cur)) {
                const double bytes = i > 0 ? in_.cascade.stages[i - 1].activation_size
                                           : ts.task.input_size;
                if (cur.tier == TierKind::satellite && target.tier == TierKind::station) {
                    t += transmission_time(bytes, in_.links.feeder) +
                         prop_sat_ground(cur.index, target.index, t);
                }
                cur = target;
            }
            const double rate = in_.capacities.rate(cur.tier);
            t += in_.cascade.stages[i].compute_cost / rate;
        }
        return t - t0;
    }

    std::optional<Placement> placement_for(int origin_ground, double t, double input_size) {
        auto it = placement_cache_.find(origin_ground);
        if (it != placement_cache_.end()) {
            const Placement& p = it->second;
            const bool same_epoch =
                std::floor(p.epoch_start / in_.policy.placement_epoch) ==
                std::floor(t / in_.policy.placement_epoch);
            if (same_epoch &&
                windex_.covering(p.serving_sat, ground(origin_ground).id, t))
                return p;
        }
        auto fresh = place_cascade(in_.cascade, in_, t, origin_ground, input_size);
        if (fresh) placement_cache_[origin_ground] = *fresh;
        return fresh;
    }

    void finalize(TaskState& ts, TaskStatus status, int exit_index, double now);
    void start_task(int task_id, double t);
    void arrive_at_node(int task_id, long gen, InfNode node, int stage, double t);
    void enqueue(InfNode node, Job job, double t);
    void start_next(InfNode node, double t);
    void stage_finished(InfNode node, Job job, double duration, double t);
    void handover_check(int sat, const std::string& ground_id, double t);
    void migrate_or_drop(TaskState& ts, double t);

    const InferenceRunInputs& in_;
    WindowIndex windex_;
    MigrationPolicy* policy_;
    Engine engine_;
    std::vector<TaskState> tasks_;
    std::map<InfNode, NodeState> nodes_;
    std::map<int, Placement> placement_cache_;
};

void InferenceRun::finalize(TaskState& ts, TaskStatus status, int exit_index, double now) {
    if (ts.finished) return;
    ts.finished = true;
    ts.outcome.status = status;
    ts.outcome.exit_index = exit_index;
    if (exit_index >= 0) {
        ts.outcome.achieved_accuracy = in_.cascade.stages[exit_index].exit_accuracy;
        ts.outcome.e2e_latency = now - ts.task.arrival_time;
        ts.outcome.charged_wait = ts.outcome.e2e_latency - ts.outcome.charged_transfer -
                                  ts.outcome.charged_compute;
    }
    engine_.metrics().append("task_outcome", now, exit_index >= 0 ? ts.outcome.e2e_latency : 0.0,
                             {{"status", to_string(status)},
                              {"task", std::to_string(ts.task.id)}});
}

void InferenceRun::start_task(int task_id, double t) {
    TaskState& ts = tasks_[task_id];
    if (ts.finished) return;
    const double deadline_abs = ts.task.arrival_time + ts.task.deadline;
    if (t >= deadline_abs) {
        finalize(ts, TaskStatus::dropped_no_coverage, -1, t);
        return;
    }

    auto placement = placement_for(ts.task.origin_ground, t, ts.task.input_size);
    if (!placement) {
        const ContactWindow* next = windex_.next_window(ground(ts.task.origin_ground).id, t);
        if (!next || next->t_start >= deadline_abs || next->t_start >= in_.horizon) {
            finalize(ts, TaskStatus::dropped_no_coverage, -1, t);
            return;
        }
        const double retry = next->t_start;
        engine_.schedule(retry, "placement_retry",
                         [this, task_id, retry]() { start_task(task_id, retry); });
        return;
    }

    ts.stage_nodes = placement->stage_nodes;
    ts.serving_sat = placement->serving_sat;
    ts.state_bytes = ts.task.input_size;

    const double dur = transmission_time(ts.task.input_size, in_.links.user) +
                       prop_sat_ground(ts.serving_sat, ts.task.origin_ground, t);
    ts.outcome.charged_transfer += dur;
    const long gen = ts.generation;
    const InfNode head{TierKind::satellite, ts.serving_sat};
    log_transfer(t, dur, "user");
    engine_.schedule(t + dur, "task_upload", [this, task_id, gen, head, t, dur]() {
        arrive_at_node(task_id, gen, head, 0, t + dur);
    });
}

void InferenceRun::arrive_at_node(int task_id, long gen, InfNode node, int stage, double t) {
    TaskState& ts = tasks_[task_id];
    if (ts.finished || gen != ts.generation) return;

    // A satellite that lost the origin while the task was in flight triggers
    // an immediate migration decision.
    if (node.tier == TierKind::satellite &&
        !windex_.covering(node.index, ground(ts.task.origin_ground).id, t)) {
        ts.next_stage = stage;
        migrate_or_drop(ts, t);
        return;
    }

    ts.next_stage = stage;
    enqueue(node, Job{task_id, stage, ts.generation, t}, t);

    if (node.tier == TierKind::satellite && in_.policy.queue_threshold > 0) {
        const auto& q = nodes_[node];
        const int depth = static_cast<int>(q.queue.size()) + (q.busy ? 1 : 0);
        if (depth > in_.policy.queue_threshold && !ts.finished) migrate_or_drop(ts, t);
    }
}

void InferenceRun::enqueue(InfNode node, Job job, double t) {
    NodeState& st = nodes_[node];
    st.queue.push_back(job);
    if (!st.busy) start_next(node, t);
}

void InferenceRun::start_next(InfNode node, double t) {
    NodeState& st = nodes_[node];
    while (!st.queue.empty()) {
        Job job = st.queue.front();
        TaskState& ts = tasks_[job.task_id];
        if (ts.finished || job.generation != ts.generation) {
            st.queue.pop_front(); // canceled while queued
            continue;
        }
        st.busy = true;
        const double duration = in_.cascade.stages[job.stage].compute_cost /
                                in_.capacities.rate(node.tier);
        st.queue.pop_front();
        engine_.schedule(t + duration, "stage_finish", [this, node, job, duration, t]() {
            stage_finished(node, job, duration, t + duration);
        });
        return;
    }
    st.busy = false;
}

void InferenceRun::stage_finished(InfNode node, Job job, double duration, double t) {
    start_next(node, t);

    TaskState& ts = tasks_[job.task_id];
    if (ts.finished || job.generation != ts.generation) return; // abandoned mid-stage

    ts.outcome.charged_compute += duration;
    ts.next_stage = job.stage + 1;
    ts.state_bytes = in_.cascade.stages[job.stage].activation_size;

    const double deadline_abs = ts.task.arrival_time + ts.task.deadline;
    const int depth = in_.cascade.depth();
    const bool last = job.stage == depth - 1;

    double remaining = 0.0;
    if (!last) remaining = predict_remaining(ts, job.stage + 1, node, t);
    const bool exit_now = last || early_exit_decision(ts.task.min_accuracy, job.stage,
                                                      in_.cascade, remaining,
                                                      deadline_abs - t);
    if (exit_now) {
        const double acc = in_.cascade.stages[job.stage].exit_accuracy;
        const bool ok = acc >= ts.task.min_accuracy && t <= deadline_abs;
        finalize(ts, ok ? TaskStatus::completed : TaskStatus::deadline_missed, job.stage, t);
        return;
    }

    const InfNode next = ts.stage_nodes[job.stage + 1];
    if (next == node) {
        enqueue(node, Job{job.task_id, job.stage + 1, ts.generation, t}, t);
        return;
    }

    // Satellite -> station hop for the remaining tail.
    if (node.tier == TierKind::satellite && next.tier == TierKind::station) {
        const EcefPosition p =
            eci_to_ecef(propagate((*in_.constellation)[node.index], t), t);
        const GroundNode& st = ground(next.index);
        if (elevation_angle(p, st.location) >= st.min_elevation) {
            const double dur = transmission_time(ts.state_bytes, in_.links.feeder) +
                               propagation_delay(slant_range(p, st.location));
            ts.outcome.charged_transfer += dur;
            log_transfer(t, dur, "feeder");
            const long gen = ts.generation;
            const int tid = job.task_id;
            const int stage = job.stage + 1;
            engine_.schedule(t + dur, "activation_transfer", [this, tid, gen, next, stage, t,
                                                              dur]() {
                arrive_at_node(tid, gen, next, stage, t + dur);
            });
            return;
        }
        // Feeder gap: keep the tail on the satellite.
        engine_.metrics().append("feeder_gap", t, 1.0, {{"task", std::to_string(ts.task.id)}});
        for (int i = job.stage + 1; i < depth; ++i)
            ts.stage_nodes[i] = node;
        enqueue(node, Job{job.task_id, job.stage + 1, ts.generation, t}, t);
        return;
    }

    enqueue(next, Job{job.task_id, job.stage + 1, ts.generation, t}, t);
}

void InferenceRun::handover_check(int sat, const std::string& ground_id, double t) {
    for (auto& ts : tasks_) {
        if (ts.finished) continue;
        if (ts.serving_sat != sat) continue;
        if (ground(ts.task.origin_ground).id != ground_id) continue;
        // Only tasks whose remaining work still sits on this satellite.
        if (ts.next_stage >= static_cast<int>(ts.stage_nodes.size())) continue;
        const InfNode here = ts.stage_nodes[ts.next_stage];
        if (!(here == InfNode{TierKind::satellite, sat})) continue;
        migrate_or_drop(ts, t);
    }
}

void InferenceRun::migrate_or_drop(TaskState& ts, double t) {
    const double deadline_abs = ts.task.arrival_time + ts.task.deadline;

    if (!in_.policy.migration_enabled) {
        ts.generation++;
        finalize(ts, TaskStatus::dropped_no_coverage, -1, t);
        engine_.metrics().append("handover_drop", t, 1.0,
                                 {{"task", std::to_string(ts.task.id)}});
        return;
    }

    MigrationContext ctx;
    ctx.task_id = ts.task.id;
    ctx.now = t;
    ctx.deadline_abs = deadline_abs;
    const int cur_sat = ts.serving_sat;

    if (in_.policy.allow_horizontal && in_.topology.mode != IslMode::none) {
        for (int cand : windex_.visible_sats(ground(ts.task.origin_ground).id, t)) {
            if (cand == cur_sat) continue;
            RouteResult route = snapshot_route(in_.topology, *in_.constellation, {},
                                               in_.links, t, NodeRef::sat(cur_sat),
                                               NodeRef::sat(cand));
            if (!route.reachable) continue;
            double bytes = ts.state_bytes;
            if (!in_.policy.submodels_everywhere) {
                for (int i = ts.next_stage; i < in_.cascade.depth(); ++i)
                    if (ts.stage_nodes[i].tier == TierKind::satellite)
                        bytes += in_.cascade.stages[i].param_bytes;
            }
            const int hops = std::max<int>(1, static_cast<int>(route.path.size()) - 1);
            const double transfer = hops * transmission_time(bytes, in_.links.isl) +
                                    route.latency;
            // Remaining satellite stages move to the candidate.
            TaskState probe = ts;
            for (int i = probe.next_stage; i < in_.cascade.depth(); ++i)
                if (probe.stage_nodes[i].tier == TierKind::satellite)
                    probe.stage_nodes[i] = InfNode{TierKind::satellite, cand};
            const double predicted =
                t + transfer +
                predict_remaining(probe, probe.next_stage,
                                  InfNode{TierKind::satellite, cand}, t + transfer);
            ctx.options.push_back(
                {MigrationChoice{MigrationChoice::Kind::horizontal, cand}, predicted});
        }
    }

    if (in_.policy.allow_vertical) {
        if (auto st = visible_station(cur_sat, t)) {
            const double transfer = transmission_time(ts.state_bytes, in_.links.feeder) +
                                    prop_sat_ground(cur_sat, *st, t);
            TaskState probe = ts;
            for (int i = probe.next_stage; i < in_.cascade.depth(); ++i)
                probe.stage_nodes[i] = InfNode{TierKind::station, *st};
            const double predicted =
                t + transfer +
                predict_remaining(probe, probe.next_stage,
                                  InfNode{TierKind::station, *st}, t + transfer);
            ctx.options.push_back(
                {MigrationChoice{MigrationChoice::Kind::vertical, *st}, predicted});
        }
    }

    std::sort(ctx.options.begin(), ctx.options.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second < b.second;
        if (a.first.kind != b.first.kind) return a.first.kind < b.first.kind;
        return a.first.target_sat < b.first.target_sat;
    });

    const MigrationChoice choice = policy_->decide(ctx);

    if (choice.kind == MigrationChoice::Kind::drop) {
        ts.generation++;
        // Beaten by the deadline when options existed; stranded otherwise.
        finalize(ts, ctx.options.empty() ? TaskStatus::dropped_no_coverage
                                         : TaskStatus::deadline_missed,
                 -1, t);
        return;
    }

    ts.generation++;
    const long gen = ts.generation;
    const int tid = ts.task.id;
    const int stage = ts.next_stage;

    if (choice.kind == MigrationChoice::Kind::horizontal) {
        const int target = choice.target_sat;
        RouteResult route = snapshot_route(in_.topology, *in_.constellation, {}, in_.links,
                                           t, NodeRef::sat(cur_sat), NodeRef::sat(target));
        double bytes = ts.state_bytes;
        if (!in_.policy.submodels_everywhere) {
            for (int i = ts.next_stage; i < in_.cascade.depth(); ++i)
                if (ts.stage_nodes[i].tier == TierKind::satellite)
                    bytes += in_.cascade.stages[i].param_bytes;
        }
        const int hops = std::max<int>(1, static_cast<int>(route.path.size()) - 1);
        const double transfer = hops * transmission_time(bytes, in_.links.isl) + route.latency;
        for (int i = ts.next_stage; i < in_.cascade.depth(); ++i)
            if (ts.stage_nodes[i].tier == TierKind::satellite)
                ts.stage_nodes[i] = InfNode{TierKind::satellite, target};
        ts.serving_sat = target;
        ts.outcome.h_migrations++;
        ts.outcome.charged_transfer += transfer;
        log_transfer(t, transfer, "isl");
        engine_.metrics().append("migration", t, transfer,
                                 {{"kind", "horizontal"}, {"task", std::to_string(tid)}});
        const InfNode dest{TierKind::satellite, target};
        engine_.schedule(t + transfer, "migrate_in", [this, tid, gen, dest, stage, t, transfer]() {
            arrive_at_node(tid, gen, dest, stage, t + transfer);
        });
    } else {
        const int target = choice.target_sat; // station ground index
        const double transfer = transmission_time(ts.state_bytes, in_.links.feeder) +
                                prop_sat_ground(cur_sat, target, t);
        for (int i = ts.next_stage; i < in_.cascade.depth(); ++i)
            ts.stage_nodes[i] = InfNode{TierKind::station, target};
        ts.outcome.v_migrations++;
        ts.outcome.charged_transfer += transfer;
        log_transfer(t, transfer, "feeder");
        engine_.metrics().append("migration", t, transfer,
                                 {{"kind", "vertical"}, {"task", std::to_string(tid)}});
        const InfNode dest{TierKind::station, target};
        engine_.schedule(t + transfer, "migrate_in", [this, tid, gen, dest, stage, t, transfer]() {
            arrive_at_node(tid, gen, dest, stage, t + transfer);
        });
    }
}

InferenceResult InferenceRun::execute() {
    tasks_.resize(in_.workload.size());
    for (std::size_t i = 0; i < in_.workload.size(); ++i) {
        tasks_[i].task = in_.workload[i];
        tasks_[i].outcome.task_id = in_.workload[i].id;
    }

    for (std::size_t i = 0; i < tasks_.size(); ++i) {
        const double t = tasks_[i].task.arrival_time;
        const int tid = static_cast<int>(i);
        engine_.schedule(t, "task_arrival", [this, tid, t]() { start_task(tid, t); });
    }

    // Handover triggers at every cluster-window close.
    for (const auto& w : in_.plan->windows) {
        bool is_cluster = false;
        for (const auto& g : *in_.ground_nodes)
            if (g.id == w.ground_id && g.kind == GroundKind::cluster) is_cluster = true;
        if (!is_cluster) continue;
        if (w.t_end > in_.horizon) continue;
        engine_.schedule(w.t_end, "handover", [this, sat = w.sat_id, gid = w.ground_id,
                                               t = w.t_end]() {
            handover_check(sat, gid, t);
        });
    }

    engine_.run_until(in_.horizon);

    // Anything still live at the horizon never completed.
    for (auto& ts : tasks_)
        if (!ts.finished) finalize(ts, TaskStatus::dropped_no_coverage, -1, in_.horizon);

    InferenceResult res;
    res.summary.total = static_cast<int>(tasks_.size());
    double lat_sum = 0.0, acc_sum = 0.0;
    int with_result = 0;
    for (auto& ts : tasks_) {
        res.outcomes.push_back(ts.outcome);
        switch (ts.outcome.status) {
            case TaskStatus::completed: res.summary.completed++; break;
            case TaskStatus::deadline_missed: res.summary.deadline_missed++; break;
            case TaskStatus::dropped_no_coverage: res.summary.dropped_no_coverage++; break;
        }
        if (ts.outcome.exit_index >= 0) {
            ++with_result;
            lat_sum += ts.outcome.e2e_latency;
            acc_sum += ts.outcome.achieved_accuracy;
        }
    }
    res.summary.completion_rate =
        res.summary.total == 0
            ? 1.0
            : static_cast<double>(res.summary.completed) / res.summary.total;
    if (with_result > 0) {
        res.summary.mean_latency = lat_sum / with_result;
        res.summary.mean_accuracy = acc_sum / with_result;
    }
    return res;
}

} // namespace

std::optional<Placement> place_cascade(const CascadeModel& cascade,
                                       const InferenceRunInputs& in,
                                       double t, int origin_ground,
                                       double input_size) {
    const GroundNode& origin = (*in.ground_nodes)[origin_ground];
    const int n = cascade.depth();

    // Visible satellites at t (directly from geometry so the operation does
    // not require a precomputed plan).
    std::vector<int> candidates;
    for (int s = 0; s < static_cast<int>(in.constellation->size()); ++s) {
        const EcefPosition p = eci_to_ecef(propagate((*in.constellation)[s], t), t);
        if (elevation_angle(p, origin.location) >= origin.min_elevation)
            candidates.push_back(s);
    }
    if (candidates.empty()) return std::nullopt;

    double best_latency = std::numeric_limits<double>::infinity();
    int best_sat = -1, best_cut = n, best_station = -1;

    for (int s : candidates) {
        const EcefPosition p = eci_to_ecef(propagate((*in.constellation)[s], t), t);
        const double user_prop =
            propagation_delay(slant_range(p, origin.location));

        // Nearest visible station from this satellite, if any.
        int station = -1;
        double feeder_prop = std::numeric_limits<double>::infinity();
        for (int g = 0; g < static_cast<int>(in.ground_nodes->size()); ++g) {
            const GroundNode& gn = (*in.ground_nodes)[g];
            if (gn.kind != GroundKind::station) continue;
            if (elevation_angle(p, gn.location) < gn.min_elevation) continue;
            const double prop = propagation_delay(slant_range(p, gn.location));
            if (prop < feeder_prop) {
                feeder_prop = prop;
                station = g;
            }
        }

        const int max_cut = n;
        for (int cut = station >= 0 ? 1 : max_cut; cut <= max_cut; ++cut) {
            const double lat = placement_latency_estimate(cascade, cut, input_size,
                                                          in.capacities, user_prop,
                                                          feeder_prop, in.links);
            if (lat < best_latency ||
                (lat == best_latency && (s < best_sat || (s == best_sat && cut > best_cut)))) {
                best_latency = lat;
                best_sat = s;
                best_cut = cut;
                best_station = station;
            }
        }
    }

    Placement pl;
    pl.serving_sat = best_sat;
    pl.epoch_start = t;
    pl.stage_nodes.resize(n);
    for (int i = 0; i < n; ++i) {
        pl.stage_nodes[i] = i < best_cut ? InfNode{TierKind::satellite, best_sat}
                                         : InfNode{TierKind::station, best_station};
    }
    return pl;
}

bool early_exit_decision(double min_accuracy, int exit_index, const CascadeModel& cascade,
                         double predicted_remaining_latency, double slack_to_deadline) {
    if (cascade.stages[exit_index].exit_accuracy >= min_accuracy) return true;
    return predicted_remaining_latency > slack_to_deadline;
}

InferenceResult run_inference(const InferenceRunInputs& in, MigrationPolicy* policy,
                              MetricsLog* metrics_out) {
    if (!in.plan || !in.constellation || !in.ground_nodes)
        throw ValidationError("run_inference: missing plan/constellation/ground_nodes");
    if (in.cascade.depth() == 0) throw ValidationError("run_inference: empty cascade");
    in.capacities.validate();
    for (std::size_t i = 1; i < in.workload.size(); ++i)
        if (in.workload[i].arrival_time < in.workload[i - 1].arrival_time)
            throw ValidationError("run_inference: workload must be sorted by arrival_time");

    GreedyMigrationPolicy greedy;
    InferenceRun run(in, policy ? policy : &greedy);
    InferenceResult res = run.execute();
    if (metrics_out) *metrics_out = run.metrics();
    return res;
}

std::vector<InferenceTask> generate_workload(const WorkloadConfig& cfg,
                                             const std::vector<int>& cluster_grounds,
                                             std::uint64_t seed) {
    if (cfg.min_accuracy_choices.empty() ||
        cfg.min_accuracy_choices.size() != cfg.min_accuracy_weights.size())
        throw ValidationError("workload.min_accuracy: choices and weights must align");
    double wsum = 0.0;
    for (double w : cfg.min_accuracy_weights) {
        if (w < 0.0) throw ValidationError("workload.min_accuracy_weights: must be non-negative");
        wsum += w;
    }
    if (!(wsum > 0.0)) throw ValidationError("workload.min_accuracy_weights: must sum > 0");

    std::vector<InferenceTask> out;
    for (int g : cluster_grounds) {
        RngStream rng(seed, "inference/workload/g" + std::to_string(g));
        double t = 0.0;
        while (true) {
            t += rng.exponential(1.0 / cfg.rate_per_cluster);
            if (t >= cfg.horizon) break;
            InferenceTask task;
            task.origin_ground = g;
            task.arrival_time = t;
            task.input_size = cfg.input_size;
            task.deadline = cfg.deadline;
            double pick = rng.uniform() * wsum;
            std::size_t choice = 0;
            for (; choice + 1 < cfg.min_accuracy_weights.size(); ++choice) {
                if (pick < cfg.min_accuracy_weights[choice]) break;
                pick -= cfg.min_accuracy_weights[choice];
            }
            task.min_accuracy = cfg.min_accuracy_choices[choice];
            out.push_back(task);
        }
    }
    std::sort(out.begin(), out.end(), [](const InferenceTask& a, const InferenceTask& b) {
        if (a.arrival_time != b.arrival_time) return a.arrival_time < b.arrival_time;
        return a.origin_ground < b.origin_ground;
    });
    for (std::size_t i = 0; i < out.size(); ++i) out[i].id = static_cast<int>(i);
    return out;
}

std::string outcomes_to_csv(const std::vector<TaskOutcome>& outcomes) {
    std::string out =
        "task_id,status,exit_index,accuracy,latency_s,h_migrations,v_migrations\n";
    char buf[160];
    for (const auto& o : outcomes) {
        std::snprintf(buf, sizeof(buf), "%d,%s,%d,%.4f,%.6f,%d,%d\n", o.task_id,
                      to_string(o.status).c_str(), o.exit_index, o.achieved_accuracy,
                      o.e2e_latency, o.h_migrations, o.v_migrations);
        out += buf;
    }
    return out;
}

} // namespace fluidsim
