#include "fluidsim/contacts.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <queue>

#include "fluidsim/error.hpp"

namespace fluidsim {

namespace {

constexpr double kBisectWidth = 0.02; // s, comfortably inside the 0.1 s contract

double elevation_at(const OrbitalElements& el, const GroundNode& node, double t) {
    return elevation_angle(eci_to_ecef(propagate(el, t), t), node.location);
}

} // namespace

void GroundNode::validate() const {
    ValidationCollector v;
    if (id.empty()) v.fail("ground_node.id", "must be non-empty");
    if (min_elevation < 0.0 || min_elevation >= kPi / 2.0)
        v.fail("ground_node.min_elevation", "must be in [0, pi/2)");
    if (location.latitude < -kPi / 2.0 || location.latitude > kPi / 2.0)
        v.fail("ground_node.latitude", "must be in [-pi/2, pi/2]");
    if (location.longitude < -kPi || location.longitude >= kPi)
        v.fail("ground_node.longitude", "must be in [-pi, pi)");
    v.throw_if_failed();
}

void LinkModel::validate(const std::string& name) const {
    ValidationCollector v;
    if (!(data_rate > 0.0)) v.fail(name + ".data_rate", "must be positive");
    if (extra_delay < 0.0) v.fail(name + ".extra_delay", "must be non-negative");
    if (erasure_prob < 0.0 || erasure_prob >= 1.0)
        v.fail(name + ".erasure_prob", "must be in [0, 1)");
    v.throw_if_failed();
}

const std::vector<int>& IslTopology::neighbors_of(int sat) const {
    static const std::vector<int> empty;
    if (mode == IslMode::none || sat < 0 || sat >= static_cast<int>(neighbors.size()))
        return empty;
    return neighbors[sat];
}

IslTopology build_grid_topology(int planes, int per_plane, bool cross_seam) {
    IslTopology topo;
    topo.mode = IslMode::grid;
    const int total = planes * per_plane;
    topo.neighbors.assign(total, {});
    auto id = [per_plane](int p, int k) { return p * per_plane + k; };
    for (int p = 0; p < planes; ++p) {
        for (int k = 0; k < per_plane; ++k) {
            auto& nb = topo.neighbors[id(p, k)];
            if (per_plane > 1) {
                nb.push_back(id(p, (k + 1) % per_plane));
                if (per_plane > 2) nb.push_back(id(p, (k + per_plane - 1) % per_plane));
            }
            if (planes > 1) {
                int next = p + 1;
                int prev = p - 1;
                if (cross_seam) {
                    next = (p + 1) % planes;
                    prev = (p + planes - 1) % planes;
                }
                if (next >= 0 && next < planes && next != p)
                    nb.push_back(id(next, k));
                if (prev >= 0 && prev < planes && prev != p && prev != next)
                    nb.push_back(id(prev, k));
            }
            std::sort(nb.begin(), nb.end());
            nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
        }
    }
    return topo;
}

ContactPlan compute_contact_plan(const std::vector<OrbitalElements>& constellation,
                                 const std::vector<GroundNode>& ground_nodes,
                                 double horizon, double step) {
    if (!(step > 0.0)) throw ValidationError("contact_plan.step: must be positive");
    if (horizon < step) throw ValidationError("contact_plan.horizon: must be >= step");

    ContactPlan plan;
    plan.horizon = horizon;
    plan.step = step;

    const int n_samples = static_cast<int>(std::floor(horizon / step)) + 1;

    for (int s = 0; s < static_cast<int>(constellation.size()); ++s) {
        const auto& el = constellation[s];
        for (const auto& node : ground_nodes) {
            // Bisection toward the in-view side: the reported boundary stays
            // inside the true window and within the bracketing samples.
            auto refine = [&](double t_out, double t_in) {
                while (std::abs(t_in - t_out) > kBisectWidth) {
                    const double mid = 0.5 * (t_out + t_in);
                    if (elevation_at(el, node, mid) >= node.min_elevation)
                        t_in = mid;
                    else
                        t_out = mid;
                }
                return t_in;
            };

            bool in_view = false;
            ContactWindow win;
            for (int i = 0; i < n_samples; ++i) {
                const double t = i * step;
                const double elev = elevation_at(el, node, t);
                const bool visible = elev >= node.min_elevation;
                if (visible && !in_view) {
                    win = ContactWindow{s, node.id, 0.0, 0.0, elev};
                    win.t_start = (i == 0) ? 0.0 : refine(t - step, t);
                    in_view = true;
                } else if (visible && in_view) {
                    win.peak_elevation = std::max(win.peak_elevation, elev);
                }
                if (in_view && (!visible || i == n_samples - 1)) {
                    if (!visible)
                        win.t_end = refine(t, t - step);
                    else
                        win.t_end = horizon; // still in view at the last sample
                    if (win.t_end > win.t_start) plan.windows.push_back(win);
                    in_view = false;
                }
            }
        }
    }

    std::sort(plan.windows.begin(), plan.windows.end(),
              [](const ContactWindow& a, const ContactWindow& b) {
                  if (a.t_start != b.t_start) return a.t_start < b.t_start;
                  if (a.sat_id != b.sat_id) return a.sat_id < b.sat_id;
                  return a.ground_id < b.ground_id;
              });
    return plan;
}

double propagation_delay(double range_m) {
    return range_m / kSpeedOfLight;
}

double transmission_time(double payload_bytes, const LinkModel& link) {
    return 8.0 * payload_bytes / link.data_rate;
}

RouteResult snapshot_route(const IslTopology& topology,
                           const std::vector<OrbitalElements>& constellation,
                           const std::vector<GroundNode>& ground_nodes,
                           const LinkSet& links, double t,
                           NodeRef src, NodeRef dst) {
    const int n_sats = static_cast<int>(constellation.size());
    const int n_ground = static_cast<int>(ground_nodes.size());
    const int n = n_sats + n_ground;

    auto vid = [&](NodeRef ref) {
        return ref.kind == NodeRef::Kind::satellite ? ref.index : n_sats + ref.index;
    };
    auto ref_of = [&](int v) {
        return v < n_sats ? NodeRef::sat(v) : NodeRef::ground(v - n_sats);
    };

    RouteResult out;
    if (src == dst) {
        out.reachable = true;
        out.latency = 0.0;
        return out;
    }

    std::vector<Vec3> sat_pos(n_sats);
    for (int i = 0; i < n_sats; ++i)
        sat_pos[i] = eci_to_ecef(propagate(constellation[i], t), t).r;

    // Snapshot adjacency: sat-sat via ISL neighbors, sat-ground via the
    // ground node's elevation mask.
    std::vector<std::vector<std::pair<int, double>>> adj(n);
    for (int i = 0; i < n_sats; ++i) {
        for (int j : topology.neighbors_of(i)) {
            if (j <= i) continue;
            const double w = propagation_delay((sat_pos[i] - sat_pos[j]).norm()) +
                             links.isl.extra_delay;
            adj[i].push_back({j, w});
            adj[j].push_back({i, w});
        }
    }
    for (int g = 0; g < n_ground; ++g) {
        const auto& node = ground_nodes[g];
        const Vec3 site = geodetic_to_ecef(node.location).r;
        for (int i = 0; i < n_sats; ++i) {
            if (elevation_angle(EcefPosition{sat_pos[i]}, node.location) < node.min_elevation)
                continue;
            const double w = propagation_delay((sat_pos[i] - site).norm()) +
                             links.for_ground(node.kind).extra_delay;
            adj[i].push_back({n_sats + g, w});
            adj[n_sats + g].push_back({i, w});
        }
    }

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(n, inf);
    std::vector<int> prev(n, -1);
    using QItem = std::pair<double, int>;
    std::priority_queue<QItem, std::vector<QItem>, std::greater<>> pq;
    dist[vid(src)] = 0.0;
    pq.push({0.0, vid(src)});
    while (!pq.empty()) {
        auto [d, u] = pq.top();
        pq.pop();
        if (d > dist[u]) continue;
        if (u == vid(dst)) break;
        for (auto [v, w] : adj[u]) {
            // Tie-break by predecessor id for deterministic equal-cost paths.
            if (dist[u] + w < dist[v] ||
                (dist[u] + w == dist[v] && prev[v] > u)) {
                dist[v] = dist[u] + w;
                prev[v] = u;
                pq.push({dist[v], v});
            }
        }
    }

    if (dist[vid(dst)] == inf) return out; // unreachable marker
    out.reachable = true;
    out.latency = dist[vid(dst)];
    for (int v = vid(dst); v != -1; v = prev[v]) out.path.push_back(ref_of(v));
    std::reverse(out.path.begin(), out.path.end());
    return out;
}

std::optional<double> median_bent_pipe_rtt(const std::vector<OrbitalElements>& constellation,
                                           const std::vector<GroundNode>& ground_nodes,
                                           const LinkSet& links,
                                           double horizon, double step) {
    std::vector<const GroundNode*> clusters, stations;
    for (const auto& g : ground_nodes)
        (g.kind == GroundKind::cluster ? clusters : stations).push_back(&g);
    if (clusters.empty() || stations.empty() || constellation.empty()) return std::nullopt;

    std::vector<double> samples;
    const int n_steps = static_cast<int>(std::floor(horizon / step));
    std::vector<Vec3> sat_pos(constellation.size());
    for (int i = 0; i <= n_steps; ++i) {
        const double t = i * step;
        for (std::size_t s = 0; s < constellation.size(); ++s)
            sat_pos[s] = eci_to_ecef(propagate(constellation[s], t), t).r;

        // Best station leg per satellite at this instant.
        std::vector<double> feeder_prop(constellation.size(),
                                        std::numeric_limits<double>::infinity());
        for (std::size_t s = 0; s < constellation.size(); ++s) {
            for (const auto* st : stations) {
                if (elevation_angle(EcefPosition{sat_pos[s]}, st->location) < st->min_elevation)
                    continue;
                feeder_prop[s] = std::min(
                    feeder_prop[s],
                    propagation_delay(slant_range(EcefPosition{sat_pos[s]}, st->location)));
            }
        }
        for (const auto* cl : clusters) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t s = 0; s < constellation.size(); ++s) {
                if (std::isinf(feeder_prop[s])) continue;
                if (elevation_angle(EcefPosition{sat_pos[s]}, cl->location) < cl->min_elevation)
                    continue;
                const double user_prop =
                    propagation_delay(slant_range(EcefPosition{sat_pos[s]}, cl->location));
                best = std::min(best, 2.0 * (user_prop + feeder_prop[s]) +
                                          links.user.extra_delay + links.feeder.extra_delay);
            }
            if (!std::isinf(best)) samples.push_back(best);
        }
    }
    if (samples.empty()) return std::nullopt;
    std::sort(samples.begin(), samples.end());
    return samples[samples.size() / 2];
}

double constellation_repeat_interval(const WalkerSpec& spec,
                                     double min_interval, double max_interval) {
    spec.validate();
    OrbitalElements probe;
    probe.semi_major_axis = kEarthRadius + spec.altitude;
    const double t_orb = orbital_period(probe);
    const int per_plane = spec.total_sats / spec.planes;
    const double slot_time = t_orb / per_plane;
    const double phase_time = t_orb * spec.phasing / spec.total_sats;

    // The constellation maps onto itself (in ECEF) up to a residual rotation
    // psi = m*2pi/P + omega_E*delta; search the symmetry lattice for the
    // smallest |psi| inside the interval bounds.
    double best_delta = 0.0;
    double best_residual = std::numeric_limits<double>::infinity();
    const int m_max = 4 * spec.planes;
    const int j_max = static_cast<int>(max_interval / slot_time) + 2;
    for (int m = -m_max; m <= m_max; ++m) {
        for (int j = 0; j <= j_max; ++j) {
            const double delta = m * phase_time + j * slot_time;
            if (delta < min_interval || delta > max_interval) continue;
            double psi = m * kTwoPi / spec.planes + kEarthRotationRate * delta;
            psi = std::remainder(psi, kTwoPi);
            if (std::abs(psi) < best_residual) {
                best_residual = std::abs(psi);
                best_delta = delta;
            }
        }
    }
    return best_delta;
}

std::string contact_plan_to_csv(const ContactPlan& plan) {
    std::string out = "sat_id,ground_id,t_start_s,t_end_s,peak_elev_deg\n";
    char buf[160];
    for (const auto& w : plan.windows) {
        std::snprintf(buf, sizeof(buf), "%d,%s,%.3f,%.3f,%.3f\n", w.sat_id,
                      w.ground_id.c_str(), w.t_start, w.t_end,
                      rad2deg(w.peak_elevation));
        out += buf;
    }
    return out;
}

} // namespace fluidsim
