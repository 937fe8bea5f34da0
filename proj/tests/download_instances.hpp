#pragma once

// Shared generator of small caching instances where exhaustive placement
// enumeration is feasible (unit tests and the acceptance suite).

#include <functional>
#include <vector>

#include "fluidsim/fluid_download.hpp"

namespace fluidsim::testgen {

struct SmallCacheInstance {
    std::vector<OrbitalElements> constellation;
    std::vector<GroundNode> ground_nodes;
    ContactPlan plan;
    IslTopology topology;
    BlockLibrary library;
    DemandModel demand;
    DownloadScenario scenario; // wired to the members above
    std::vector<double> capacity;
};

// <= 3 satellites, <= 5 equal-size blocks, <= 3 models, crafted windows.
inline SmallCacheInstance make_small_cache_instance(std::uint64_t seed) {
    RngStream rng(seed, "cache-instance");
    SmallCacheInstance inst;

    const int n_sats = 2 + static_cast<int>(rng.uniform_int(2));
    for (int s = 0; s < n_sats; ++s) {
        OrbitalElements el{kEarthRadius + 550e3, deg2rad(60.0), 0.0,
                           normalize_angle(deg2rad(5.0 * s)), 0.0};
        inst.constellation.push_back(el);
    }
    const int n_clusters = 1 + static_cast<int>(rng.uniform_int(2));
    for (int c = 0; c < n_clusters; ++c)
        inst.ground_nodes.push_back(GroundNode{
            "c" + std::to_string(c), GroundKind::cluster,
            Geodetic{deg2rad(10.0 * c), deg2rad(20.0 * c), 0.0}, deg2rad(25.0)});

    // Crafted visibility: each satellite covers a random slice of the horizon
    // at each cluster (possibly none).
    const double horizon = 1000.0;
    inst.plan.horizon = horizon;
    inst.plan.step = 10.0;
    for (int c = 0; c < n_clusters; ++c) {
        for (int s = 0; s < n_sats; ++s) {
            if (rng.uniform() < 0.25) continue; // no coverage from this sat
            const double start = rng.uniform(0.0, 0.7) * horizon;
            const double len = rng.uniform(0.15, 0.5) * horizon;
            ContactWindow w;
            w.sat_id = s;
            w.ground_id = "c" + std::to_string(c);
            w.t_start = start;
            w.t_end = std::min(horizon, start + len);
            w.peak_elevation = deg2rad(60.0);
            inst.plan.windows.push_back(w);
        }
    }
    std::sort(inst.plan.windows.begin(), inst.plan.windows.end(),
              [](const ContactWindow& a, const ContactWindow& b) {
                  if (a.t_start != b.t_start) return a.t_start < b.t_start;
                  if (a.sat_id != b.sat_id) return a.sat_id < b.sat_id;
                  return a.ground_id < b.ground_id;
              });

    inst.topology = rng.uniform() < 0.7 ? build_grid_topology(1, n_sats, false)
                                        : IslTopology{};

    const int n_blocks = 3 + static_cast<int>(rng.uniform_int(3));
    const double block_size = 4e6;
    std::vector<std::string> ids;
    for (int b = 0; b < n_blocks; ++b) {
        const std::string id = "b" + std::to_string(b);
        ids.push_back(id);
        inst.library.blocks[id] = block_size;
    }
    const int n_models = 2 + static_cast<int>(rng.uniform_int(2));
    for (int m = 0; m < n_models; ++m) {
        std::vector<std::string> pool = ids;
        rng.shuffle(pool);
        const int k = 1 + static_cast<int>(rng.uniform_int(3));
        std::vector<std::string> chosen(pool.begin(), pool.begin() + k);
        std::sort(chosen.begin(), chosen.end());
        inst.library.models["m" + std::to_string(m)] = chosen;
    }

    for (int c = 0; c < n_clusters; ++c) {
        std::map<std::string, double> probs;
        double total = 0.0;
        for (const auto& [m, bl] : inst.library.models) {
            probs[m] = rng.uniform(0.1, 1.0);
            total += probs[m];
        }
        for (auto& [m, p] : probs) p /= total;
        inst.demand.model_probs.push_back(probs);
        inst.demand.request_rate.push_back(0.01);
    }

    const int cap_blocks = 1 + static_cast<int>(rng.uniform_int(2));
    inst.capacity.assign(n_sats, cap_blocks * block_size);

    DownloadScenario& sc = inst.scenario;
    sc.library = &inst.library;
    sc.demand = &inst.demand;
    sc.plan = &inst.plan;
    sc.constellation = &inst.constellation;
    sc.ground_nodes = &inst.ground_nodes;
    for (int c = 0; c < n_clusters; ++c) sc.cluster_grounds.push_back(c);
    sc.topology = inst.topology;
    sc.isl_budget = rng.uniform() < 0.5 ? 2.0 : 0.5;
    return inst;
}

// Exhaustive maximum over all capacity-feasible cache states.
inline double exhaustive_best_hit_ratio(const SmallCacheInstance& inst) {
    std::vector<std::string> ids;
    for (const auto& [id, size] : inst.library.blocks) ids.push_back(id);
    const int n_blocks = static_cast<int>(ids.size());
    const int n_sats = static_cast<int>(inst.constellation.size());

    std::vector<std::set<std::string>> feasible;
    for (int mask = 0; mask < (1 << n_blocks); ++mask) {
        std::set<std::string> subset;
        double bytes = 0.0;
        for (int b = 0; b < n_blocks; ++b) {
            if (mask & (1 << b)) {
                subset.insert(ids[b]);
                bytes += inst.library.blocks.at(ids[b]);
            }
        }
        if (bytes <= inst.capacity[0] + 1e-9) feasible.push_back(subset);
    }

    double best = 0.0;
    CacheState cache;
    cache.cached.assign(n_sats, {});
    cache.capacity = inst.capacity;
    std::function<void(int)> assign = [&](int sat) {
        if (sat == n_sats) {
            best = std::max(best, hit_ratio(cache, inst.scenario));
            return;
        }
        for (const auto& subset : feasible) {
            cache.cached[sat] = subset;
            assign(sat + 1);
        }
        cache.cached[sat].clear();
    };
    assign(0);
    return best;
}

} // namespace fluidsim::testgen
