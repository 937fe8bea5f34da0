#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fluidsim/contacts.hpp"
#include "fluidsim/fluid_download.hpp"
#include "fluidsim/fluid_inference.hpp"
#include "fluidsim/fluid_learning.hpp"
#include "fluidsim/orbits.hpp"

namespace fluidsim {

struct ScenarioLearning {
    std::vector<FlScheme> schemes{FlScheme::dispersal, FlScheme::hierarchical_gs,
                                  FlScheme::isl_gossip};
    FlSchemeConfig config;
    FlDataConfig data;
    int hidden = 32;
    int centralized_epochs = 150;
    double horizon = 0.0; // 0 -> sim horizon
};

struct ScenarioInference {
    std::vector<SubModel> cascade{
        {2e8, 2e5, 0.70, 1e6}, {6e8, 1e5, 0.85, 3e6}, {1.2e9, 0.0, 0.92, 6e6}};
    Capacities capacities;
    WorkloadConfig workload;
    InferencePolicyConfig policy;
};

struct ScenarioDownload {
    std::optional<BlockLibrary> library; // explicit; wins over `generate`
    LibraryGenConfig generate;
    double zipf_exponent = 1.0;
    double capacity_bytes_per_sat = 2.4e7;
    double request_rate_per_cluster = 0.05; // Hz
    double horizon = 7200.0;
    double isl_budget = 2.0;
    bool multicast = true;
    double batch_window = 5.0;
};

/// Fully validated scenario. Parsing is strict: unknown keys are rejected and
/// every validation error is reported, not just the first.
struct Scenario {
    WalkerSpec constellation{88, 8, 1, deg2rad(53.0), 550e3, 0.0};
    std::vector<GroundNode> ground_nodes;
    LinkSet links;
    IslMode isl_mode = IslMode::grid;
    bool isl_cross_seam = true;
    std::uint64_t seed = 1;
    double horizon = 86400.0;
    double contact_step = 10.0;
    std::optional<ScenarioLearning> learning;
    std::optional<ScenarioInference> inference;
    std::optional<ScenarioDownload> download;

    std::vector<int> cluster_ground_indices() const;
    std::vector<int> station_ground_indices() const;
    IslTopology build_topology() const;
};

Scenario parse_scenario(const std::string& path);
Scenario parse_scenario_text(const std::string& json_text);

/// Canonical serialization (sorted keys, explicit defaults); parsing it
/// reproduces the scenario exactly.
std::string serialize_scenario(const Scenario& s);

/// FNV-1a over the canonical serialization.
std::uint64_t scenario_hash(const Scenario& s);

} // namespace fluidsim
