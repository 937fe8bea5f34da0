#pragma once

// Shared generator of tiny inference instances for greedy-vs-exhaustive
// migration comparisons (unit tests and the acceptance suite).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "fluidsim/fluid_inference.hpp"

namespace fluidsim::testgen {

struct TinyInstance {
    std::vector<OrbitalElements> constellation;
    std::vector<GroundNode> ground_nodes;
    ContactPlan plan;
    IslTopology topology;
    InferenceRunInputs inputs; // pointers wired to the members above
};

// Two satellites trailing each other over an equatorial cluster, an optional
// reachable station, 1-2 tasks arriving shortly before the first handover.
inline TinyInstance make_tiny_instance(std::uint64_t instance_seed) {
    RngStream rng(instance_seed, "tiny-instance");
    auto inst = TinyInstance{};

    // The trailing satellite rises 0.5-5 s before the lead sets: tasks are
    // placed on the (only visible) lead and face a handover with a live
    // successor. Footprint half-angle for the 25 deg mask fixes the gap.
    const double a = kEarthRadius + 550e3;
    const double gamma = std::acos(kEarthRadius / a * std::cos(deg2rad(25.0))) -
                         deg2rad(25.0);
    const double lead_u = -deg2rad(rng.uniform(2.0, 6.0));
    const double gap_u = 2.0 * gamma - rng.uniform(0.03, 0.31) * kPi / 180.0;
    OrbitalElements lead{kEarthRadius + 550e3, deg2rad(90.0), 0.0,
                         normalize_angle(lead_u), 0.0};
    OrbitalElements trail = lead;
    trail.arg_latitude_at_epoch = normalize_angle(lead_u - gap_u);
    inst.constellation = {lead, trail};

    inst.ground_nodes.push_back(GroundNode{
        "c0", GroundKind::cluster, Geodetic{0.0, 0.0, 0.0}, deg2rad(25.0)});
    inst.ground_nodes.push_back(GroundNode{
        "st", GroundKind::station, Geodetic{0.0, deg2rad(rng.uniform(2.0, 8.0)), 0.0},
        deg2rad(15.0)});

    inst.plan = compute_contact_plan(inst.constellation, inst.ground_nodes, 2400.0, 5.0);
    inst.topology = build_grid_topology(1, 2, false);

    const int n_stages = 2 + static_cast<int>(rng.uniform_int(2));
    std::vector<SubModel> profile;
    std::vector<double> exits;
    for (int i = 0; i < n_stages; ++i) exits.push_back(rng.uniform(0.7, 0.95));
    std::sort(exits.begin(), exits.end());
    for (int i = 0; i < n_stages; ++i) {
        SubModel s;
        s.compute_cost = rng.uniform(8e9, 2.5e10);
        s.activation_size = rng.uniform(5e4, 3e5);
        s.exit_accuracy = exits[i];
        s.param_bytes = rng.uniform(1e6, 8e6);
        profile.push_back(s);
    }

    InferenceRunInputs& in = inst.inputs;
    in.cascade = build_cascade(profile);
    in.plan = &inst.plan;
    in.constellation = &inst.constellation;
    in.ground_nodes = &inst.ground_nodes;
    in.topology = inst.topology;
    in.capacities.device_rate = 1e8;
    in.capacities.satellite_rate = rng.uniform(8e8, 2e9);
    in.capacities.station_rate = 10.0 * in.capacities.satellite_rate;
    in.links.isl.data_rate = rng.uniform(2e7, 1e9);
    in.policy.allow_vertical = rng.uniform() < 0.7;
    in.policy.submodels_everywhere = rng.uniform() < 0.5;
    in.horizon = 2400.0;

    // Tasks arrive shortly before the lead satellite loses the cluster, with
    // service times of several seconds, so handover decisions happen while
    // they are in flight.
    double window_end = 600.0;
    for (const auto& w : inst.plan.windows) {
        if (w.sat_id == 0 && w.ground_id == "c0") {
            window_end = w.t_end;
            break;
        }
    }
    const int n_tasks = 1 + static_cast<int>(rng.uniform_int(2));
    for (int i = 0; i < n_tasks; ++i) {
        InferenceTask task;
        task.id = i;
        task.origin_ground = 0;
        task.arrival_time = std::max(0.0, window_end - rng.uniform(5.0, 35.0));
        task.input_size = rng.uniform(5e4, 3e5);
        task.min_accuracy = rng.uniform(0.65, 0.9);
        task.deadline = rng.uniform(40.0, 150.0);
        inst.inputs.workload.push_back(task);
    }
    std::sort(inst.inputs.workload.begin(), inst.inputs.workload.end(),
              [](const InferenceTask& a, const InferenceTask& b) {
                  return a.arrival_time < b.arrival_time;
              });
    for (std::size_t i = 0; i < inst.inputs.workload.size(); ++i)
        inst.inputs.workload[i].id = static_cast<int>(i);
    return inst;
}

// Exhaustive search over scripted decision sequences (entries: -1 drop,
// 0/1/2 option index). Returns the maximum completion count.
inline int brute_force_best_completions(const TinyInstance& inst, int script_len = 4) {
    int best = 0;
    std::vector<int> alphabet{-1, 0, 1, 2};
    std::vector<int> script(script_len, -1);
    std::function<void(int)> enumerate = [&](int pos) {
        if (pos == script_len) {
            ScriptedMigrationPolicy policy(script);
            InferenceRunInputs in = inst.inputs; // re-wire pointers unchanged
            const InferenceResult r = run_inference(in, &policy);
            best = std::max(best, r.summary.completed);
            return;
        }
        for (int a : alphabet) {
            script[pos] = a;
            enumerate(pos + 1);
        }
    };
    enumerate(0);
    return best;
}

} // namespace fluidsim::testgen
