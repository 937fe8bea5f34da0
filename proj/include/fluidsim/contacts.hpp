#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fluidsim/orbits.hpp"

namespace fluidsim {

enum class GroundKind { cluster, station };

struct GroundNode {
    std::string id;
    GroundKind kind = GroundKind::cluster;
    Geodetic location;
    double min_elevation = deg2rad(25.0); // rad, [0, pi/2)

    void validate() const;
};

struct ContactWindow {
    int sat_id = 0;
    std::string ground_id;
    double t_start = 0.0;
    double t_end = 0.0;
    double peak_elevation = 0.0; // max sampled elevation within the window
};

/// Time-ordered visibility windows. Boundaries are bisection-refined to the
/// in-view side, so every reported window is a subset of the true in-view
/// interval (within 0.1 s per boundary). Windows still open at the horizon
/// are truncated to end exactly at `horizon`.
struct ContactPlan {
    double horizon = 0.0;
    double step = 0.0;
    std::vector<ContactWindow> windows; // sorted by (t_start, sat_id, ground_id)
};

enum class LinkClass { user_link, feeder_link, isl };

struct LinkModel {
    LinkClass cls = LinkClass::user_link;
    double data_rate = 0.0;   // bit/s
    double extra_delay = 0.0; // s, processing + network overhead beyond propagation
    double erasure_prob = 0.0; // optional per-transmission loss, default 0

    void validate(const std::string& name) const;
};

/// Default link models reproduce a ~50 ms median bent-pipe RTT (see
/// median_bent_pipe_rtt) with order-of-magnitude LEO data rates.
struct LinkSet {
    LinkModel user{LinkClass::user_link, 50e6, 0.020, 0.0};
    LinkModel feeder{LinkClass::feeder_link, 500e6, 0.020, 0.0};
    LinkModel isl{LinkClass::isl, 1e9, 0.001, 0.0};

    const LinkModel& for_ground(GroundKind kind) const {
        return kind == GroundKind::station ? feeder : user;
    }
};

enum class IslMode { none, grid };

/// Symmetric neighbor lists. Grid mode: two intra-plane neighbors plus up to
/// two cross-plane neighbors at the same slot; the seam (last plane <-> first
/// plane) is linked unless cross_seam is false.
struct IslTopology {
    IslMode mode = IslMode::none;
    std::vector<std::vector<int>> neighbors; // empty in mode none

    const std::vector<int>& neighbors_of(int sat) const;
};

IslTopology build_grid_topology(int planes, int per_plane, bool cross_seam = true);

ContactPlan compute_contact_plan(const std::vector<OrbitalElements>& constellation,
                                 const std::vector<GroundNode>& ground_nodes,
                                 double horizon, double step);

double propagation_delay(double range_m); // range / c

double transmission_time(double payload_bytes, const LinkModel& link);

/// Endpoint of a snapshot route: a satellite index or a ground-node index.
struct NodeRef {
    enum class Kind { satellite, ground };
    Kind kind = Kind::satellite;
    int index = 0;

    static NodeRef sat(int i) { return {Kind::satellite, i}; }
    static NodeRef ground(int i) { return {Kind::ground, i}; }
    bool operator==(const NodeRef&) const = default;
};

struct RouteResult {
    bool reachable = false;
    std::vector<NodeRef> path; // src..dst inclusive; empty when src == dst
    double latency = 0.0;      // s
};

/// Minimum-latency path over the snapshot graph at time t. Edge weight is
/// propagation_delay(edge length at t) + the link's extra_delay. Ground nodes
/// attach only to satellites above their elevation mask; satellites attach to
/// ISL neighbors when the topology provides them.
RouteResult snapshot_route(const IslTopology& topology,
                           const std::vector<OrbitalElements>& constellation,
                           const std::vector<GroundNode>& ground_nodes,
                           const LinkSet& links, double t,
                           NodeRef src, NodeRef dst);

/// Median over the plan horizon of the bent-pipe round-trip time
/// user -> satellite -> station -> satellite -> user. Propagation is charged
/// per traversal; each link's extra_delay is charged once per round trip
/// (the calibration that reproduces a ~50 ms median with the defaults).
/// Samples every `step` seconds at each cluster with a serving satellite
/// that also sees a station, taking the best satellite/station pair.
std::optional<double> median_bent_pipe_rtt(const std::vector<OrbitalElements>& constellation,
                                           const std::vector<GroundNode>& ground_nodes,
                                           const LinkSet& links,
                                           double horizon, double step);

/// Interval after which the constellation approximately maps onto itself in
/// the Earth-fixed frame. Searches the Walker symmetry group
/// delta = m*(F/T)*T_orb + j*T_orb/(T/P) for the smallest residual rotation
/// |m*2pi/P - omega_E*delta| within [min_interval, max_interval].
double constellation_repeat_interval(const WalkerSpec& spec,
                                     double min_interval, double max_interval);

std::string contact_plan_to_csv(const ContactPlan& plan);

} // namespace fluidsim
