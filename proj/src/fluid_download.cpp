#include "fluidsim/fluid_download.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <tuple>

#include "fluidsim/error.hpp"

namespace fluidsim {

std::string to_string(DownloadStatus s) {
    switch (s) {
        case DownloadStatus::hit_local: return "hit_local";
        case DownloadStatus::hit_with_isl_fetch: return "hit_with_isl_fetch";
        case DownloadStatus::miss: return "miss";
    }
    return "?";
}

void BlockLibrary::validate() const {
    ValidationCollector v;
    if (blocks.empty()) v.fail("library.blocks", "must be non-empty");
    if (models.empty()) v.fail("library.models", "must be non-empty");
    for (const auto& [id, size] : blocks)
        if (!(size > 0.0)) v.fail("library.blocks." + id, "size must be positive");
    for (const auto& [id, bl] : models) {
        if (bl.empty()) v.fail("library.models." + id, "must reference at least one block");
        for (const auto& b : bl)
            if (!blocks.count(b))
                v.fail("library.models." + id, "references unknown block '" + b + "'");
    }
    v.throw_if_failed();
}

double BlockLibrary::model_bytes(const std::string& model_id) const {
    double total = 0.0;
    for (const auto& b : models.at(model_id)) total += blocks.at(b);
    return total;
}

double BlockLibrary::total_bytes() const {
    double total = 0.0;
    for (const auto& [id, size] : blocks) total += size;
    return total;
}

double CacheState::used(int sat, const BlockLibrary& lib) const {
    double total = 0.0;
    for (const auto& b : cached[sat]) total += lib.blocks.at(b);
    return total;
}

bool CacheState::fits(int sat, const std::string& block, const BlockLibrary& lib) const {
    if (cached[sat].count(block)) return false;
    return used(sat, lib) + lib.blocks.at(block) <= capacity[sat] + 1e-9;
}

bool CacheState::within_capacity(const BlockLibrary& lib) const {
    for (int s = 0; s < static_cast<int>(cached.size()); ++s)
        if (used(s, lib) > capacity[s] + 1e-9) return false;
    return true;
}

void DemandModel::validate(const BlockLibrary& lib) const {
    ValidationCollector v;
    if (model_probs.size() != request_rate.size())
        v.fail("demand", "model_probs and request_rate must have equal cluster counts");
    for (std::size_t c = 0; c < model_probs.size(); ++c) {
        double sum = 0.0;
        for (const auto& [m, p] : model_probs[c]) {
            if (!lib.models.count(m))
                v.fail("demand.cluster[" + std::to_string(c) + "]",
                       "references unknown model '" + m + "'");
            if (p < 0.0)
                v.fail("demand.cluster[" + std::to_string(c) + "]." + m,
                       "probability must be non-negative");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            v.fail("demand.cluster[" + std::to_string(c) + "]",
                   "probabilities must sum to 1");
        if (request_rate[c] < 0.0)
            v.fail("demand.request_rate[" + std::to_string(c) + "]",
                   "must be non-negative");
    }
    v.throw_if_failed();
}

namespace {

struct Interval {
    double a = 0.0;
    double b = 0.0;
    std::vector<int> visible; // sorted sat ids
};

// Visibility-change intervals for one cluster over [0, horizon].
std::vector<Interval> cluster_intervals(const DownloadScenario& sc, int cluster_idx) {
    const std::string& gid = (*sc.ground_nodes)[sc.cluster_grounds[cluster_idx]].id;
    std::vector<double> cuts{0.0, sc.plan->horizon};
    std::vector<const ContactWindow*> wins;
    for (const auto& w : sc.plan->windows) {
        if (w.ground_id != gid) continue;
        wins.push_back(&w);
        cuts.push_back(w.t_start);
        cuts.push_back(w.t_end);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    std::vector<Interval> out;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        if (cuts[i + 1] <= cuts[i]) continue;
        Interval iv{cuts[i], cuts[i + 1], {}};
        const double mid = 0.5 * (iv.a + iv.b);
        for (const auto* w : wins)
            if (w->t_start <= mid && mid < w->t_end) iv.visible.push_back(w->sat_id);
        std::sort(iv.visible.begin(), iv.visible.end());
        out.push_back(std::move(iv));
    }
    return out;
}

double isl_prop(const DownloadScenario& sc, int a, int b, double t) {
    const Vec3 pa = eci_to_ecef(propagate((*sc.constellation)[a], t), t).r;
    const Vec3 pb = eci_to_ecef(propagate((*sc.constellation)[b], t), t).r;
    return propagation_delay((pa - pb).norm());
}

// Whether satellite `sat` can assemble `model` at time t: every block either
// cached locally or fetchable from an ISL neighbor within the budget.
// Returns the fetch time (0 for a purely local hit) or nullopt.
std::optional<std::pair<double, std::map<std::string, int>>> assemble_time(
    const DownloadScenario& sc, const CacheState& cache, int sat,
    const std::string& model, double t) {
    double fetch = 0.0;
    std::map<std::string, int> sources;
    for (const auto& b : sc.library->models.at(model)) {
        if (cache.cached[sat].count(b)) continue;
        int source = -1;
        for (int nb : sc.topology.neighbors_of(sat)) {
            if (cache.cached[nb].count(b)) {
                source = nb;
                break; // neighbors_of is sorted: lowest id wins
            }
        }
        if (source < 0) return std::nullopt;
        fetch += transmission_time(sc.library->blocks.at(b), sc.links.isl) +
                 isl_prop(sc, sat, source, t) + sc.links.isl.extra_delay;
        sources[b] = source;
    }
    if (fetch > sc.isl_budget) return std::nullopt;
    return std::make_pair(fetch, sources);
}

std::vector<double> cluster_weights(const DemandModel& demand) {
    std::vector<double> w = demand.request_rate;
    double sum = 0.0;
    for (double x : w) sum += x;
    if (sum <= 0.0) {
        w.assign(demand.request_rate.size(), 1.0);
        sum = static_cast<double>(w.size());
    }
    for (double& x : w) x /= sum;
    return w;
}

} // namespace

double hit_ratio(const CacheState& cache, const DownloadScenario& sc) {
    sc.library->validate();
    sc.demand->validate(*sc.library);
    const std::vector<double> pc = cluster_weights(*sc.demand);

    double ratio = 0.0;
    for (std::size_t c = 0; c < sc.cluster_grounds.size(); ++c) {
        const auto intervals = cluster_intervals(sc, static_cast<int>(c));
        for (const auto& iv : intervals) {
            if (iv.visible.empty()) continue;
            const double mid = 0.5 * (iv.a + iv.b);
            const double frac = (iv.b - iv.a) / sc.plan->horizon;
            for (const auto& [model, pm] : sc.demand->model_probs[c]) {
                if (pm <= 0.0) continue;
                bool served = false;
                for (int s : iv.visible) {
                    if (assemble_time(sc, cache, s, model, mid)) {
                        served = true;
                        break;
                    }
                }
                if (served) ratio += pc[c] * pm * frac;
            }
        }
    }
    return ratio;
}

namespace {

// Incremental objective for the greedy: marginal gain of a (satellite,
// block) addition only touches intervals where that satellite is visible or
// neighbors a visible one, and only models containing the block. The sum of
// committed gains equals hit_ratio() up to summation order.
//
// Whole-model hits give zero credit to the first blocks of a multi-block
// model, which would stall the greedy at an empty cache; a secondary
// fractional-coverage objective breaks those ties (lexicographic order), so
// capacity fills toward complete models.
class GreedyEvaluator {
public:
    explicit GreedyEvaluator(const DownloadScenario& sc) : sc_(sc) {
        for (const auto& [id, bl] : sc.library->models) model_ids_.push_back(id);
        for (std::size_t m = 0; m < model_ids_.size(); ++m)
            for (const auto& b : sc.library->models.at(model_ids_[m]))
                models_with_block_[b].push_back(static_cast<int>(m));

        const int n_sats = static_cast<int>(sc.constellation->size());
        affected_.assign(n_sats, {});
        const std::vector<double> pc = cluster_weights(*sc.demand);

        for (std::size_t c = 0; c < sc.cluster_grounds.size(); ++c) {
            for (const auto& iv : cluster_intervals(sc, static_cast<int>(c))) {
                if (iv.visible.empty()) continue;
                Slot slot;
                slot.visible = iv.visible;
                const double mid = 0.5 * (iv.a + iv.b);
                slot.sat_pos.resize(n_sats);
                for (int s = 0; s < n_sats; ++s)
                    slot.sat_pos[s] =
                        eci_to_ecef(propagate((*sc.constellation)[s], mid), mid).r;
                slot.weight.assign(model_ids_.size(), 0.0);
                const double base = pc[c] * (iv.b - iv.a) / sc.plan->horizon;
                for (std::size_t m = 0; m < model_ids_.size(); ++m) {
                    auto it = sc.demand->model_probs[c].find(model_ids_[m]);
                    if (it != sc.demand->model_probs[c].end())
                        slot.weight[m] = base * it->second;
                }
                const int idx = static_cast<int>(slots_.size());
                for (int v : iv.visible) {
                    add_affected(v, idx);
                    for (int nb : sc.topology.neighbors_of(v)) add_affected(nb, idx);
                }
                slots_.push_back(std::move(slot));
            }
        }
        for (auto& v : affected_) {
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
        }
        served_.assign(slots_.size(), std::vector<char>(model_ids_.size(), 0));
        coverage_.assign(slots_.size(), std::vector<double>(model_ids_.size(), 0.0));
    }

    struct Gain {
        double primary = 0.0;   // hit-ratio delta
        double secondary = 0.0; // fractional-coverage delta
        bool better_than(const Gain& o) const {
            if (primary != o.primary) return primary > o.primary;
            return secondary > o.secondary;
        }
        bool positive() const { return primary > 0.0 || secondary > 0.0; }
    };

    // Marginal gain of adding `block` to `sat` (cache must not contain it yet).
    Gain gain(CacheState& cache, int sat, const std::string& block) {
        cache.cached[sat].insert(block);
        Gain g;
        auto mit = models_with_block_.find(block);
        if (mit != models_with_block_.end()) {
            for (int slot_idx : affected_[sat]) {
                for (int m : mit->second) {
                    if (slots_[slot_idx].weight[m] <= 0.0) continue;
                    if (!served_[slot_idx][m] && servable(cache, slot_idx, m))
                        g.primary += slots_[slot_idx].weight[m];
                    const double frac = coverage_fraction(cache, slot_idx, m);
                    if (frac > coverage_[slot_idx][m])
                        g.secondary +=
                            slots_[slot_idx].weight[m] * (frac - coverage_[slot_idx][m]);
                }
            }
        }
        cache.cached[sat].erase(block);
        return g;
    }

    // Cache already holds the new block; refresh served/coverage state.
    void commit(const CacheState& cache, int sat, const std::string& block) {
        auto mit = models_with_block_.find(block);
        if (mit == models_with_block_.end()) return;
        for (int slot_idx : affected_[sat]) {
            for (int m : mit->second) {
                if (slots_[slot_idx].weight[m] <= 0.0) continue;
                if (!served_[slot_idx][m] && servable(cache, slot_idx, m))
                    served_[slot_idx][m] = 1;
                coverage_[slot_idx][m] =
                    std::max(coverage_[slot_idx][m], coverage_fraction(cache, slot_idx, m));
            }
        }
    }

private:
    struct Slot {
        std::vector<int> visible;
        std::vector<Vec3> sat_pos;
        std::vector<double> weight; // per model: p(cluster)*p(model)*len/horizon
    };

    void add_affected(int sat, int slot_idx) {
        auto& v = affected_[sat];
        if (v.empty() || v.back() != slot_idx) v.push_back(slot_idx);
    }

    bool servable(const CacheState& cache, int slot_idx, int m) const {
        const Slot& slot = slots_[slot_idx];
        const auto& blocks = sc_.library->models.at(model_ids_[m]);
        for (int s : slot.visible) {
            double fetch = 0.0;
            bool ok = true;
            for (const auto& b : blocks) {
                if (cache.cached[s].count(b)) continue;
                int source = -1;
                for (int nb : sc_.topology.neighbors_of(s)) {
                    if (cache.cached[nb].count(b)) {
                        source = nb;
                        break;
                    }
                }
                if (source < 0) {
                    ok = false;
                    break;
                }
                fetch += transmission_time(sc_.library->blocks.at(b), sc_.links.isl) +
                         propagation_delay((slot.sat_pos[s] - slot.sat_pos[source]).norm()) +
                         sc_.links.isl.extra_delay;
                if (fetch > sc_.isl_budget) {
                    ok = false;
                    break;
                }
            }
            if (ok) return true;
        }
        return false;
    }

    // Best fraction of the model's blocks reachable (locally or at an ISL
    // neighbor, budget ignored) from any visible satellite.
    double coverage_fraction(const CacheState& cache, int slot_idx, int m) const {
        const Slot& slot = slots_[slot_idx];
        const auto& blocks = sc_.library->models.at(model_ids_[m]);
        double best = 0.0;
        for (int s : slot.visible) {
            int have = 0;
            for (const auto& b : blocks) {
                if (cache.cached[s].count(b)) {
                    ++have;
                    continue;
                }
                for (int nb : sc_.topology.neighbors_of(s)) {
                    if (cache.cached[nb].count(b)) {
                        ++have;
                        break;
                    }
                }
            }
            best = std::max(best, static_cast<double>(have) / blocks.size());
        }
        return best;
    }

    const DownloadScenario& sc_;
    std::vector<std::string> model_ids_;
    std::map<std::string, std::vector<int>> models_with_block_;
    std::vector<Slot> slots_;
    std::vector<std::vector<int>> affected_; // sat -> slot indices
    std::vector<std::vector<char>> served_;
    std::vector<std::vector<double>> coverage_;
};

} // namespace

CacheState place_blocks_greedy(const DownloadScenario& sc,
                               const std::vector<double>& capacity_bytes) {
    sc.library->validate();
    sc.demand->validate(*sc.library);
    for (double cap : capacity_bytes)
        if (!(cap > 0.0)) throw ValidationError("download.capacity: must be positive");

    const int n_sats = static_cast<int>(sc.constellation->size());
    if (static_cast<int>(capacity_bytes.size()) != n_sats)
        throw ValidationError("download.capacity: one entry per satellite required");

    CacheState cache;
    cache.cached.assign(n_sats, {});
    cache.capacity = capacity_bytes;

    std::vector<std::string> block_ids;
    for (const auto& [id, size] : sc.library->blocks) block_ids.push_back(id);

    GreedyEvaluator eval(sc);
    while (true) {
        GreedyEvaluator::Gain best_gain;
        int best_sat = -1;
        std::string best_block;
        for (int s = 0; s < n_sats; ++s) {
            for (const auto& b : block_ids) {
                if (!cache.fits(s, b, *sc.library)) continue;
                GreedyEvaluator::Gain g = eval.gain(cache, s, b);
                const double bytes = sc.library->blocks.at(b);
                g.primary /= bytes;
                g.secondary /= bytes;
                if (g.better_than(best_gain)) { // first-found wins ties: lowest (sat, block)
                    best_gain = g;
                    best_sat = s;
                    best_block = b;
                }
            }
        }
        if (best_sat < 0 || !best_gain.positive()) break;
        cache.cached[best_sat].insert(best_block);
        eval.commit(cache, best_sat, best_block);
    }
    return cache;
}

DownloadOutcome serve_request(const DownloadRequest& req, const CacheState& cache,
                              const DownloadScenario& sc) {
    DownloadOutcome out;
    out.request_id = req.id;

    const GroundNode& gn = (*sc.ground_nodes)[sc.cluster_grounds[req.cluster]];
    std::vector<int> visible;
    for (const auto& w : sc.plan->windows)
        if (w.ground_id == gn.id && w.t_start <= req.t_arrival && req.t_arrival < w.t_end)
            visible.push_back(w.sat_id);
    std::sort(visible.begin(), visible.end());
    visible.erase(std::unique(visible.begin(), visible.end()), visible.end());

    double best = std::numeric_limits<double>::infinity();
    for (int s : visible) {
        auto asm_time = assemble_time(sc, cache, s, req.model_id, req.t_arrival);
        if (!asm_time) continue;
        const EcefPosition p =
            eci_to_ecef(propagate((*sc.constellation)[s], req.t_arrival), req.t_arrival);
        const double prop = propagation_delay(slant_range(p, gn.location));
        const double down = transmission_time(sc.library->model_bytes(req.model_id),
                                              sc.links.user) +
                            prop + sc.links.user.extra_delay;
        const double total = asm_time->first + down;
        if (total < best) {
            best = total;
            out.serving_sat = s;
            out.completion_time = total;
            out.blocks_from = asm_time->second;
            out.status = asm_time->second.empty() ? DownloadStatus::hit_local
                                                  : DownloadStatus::hit_with_isl_fetch;
        }
    }
    if (out.serving_sat < 0) {
        out.status = DownloadStatus::miss;
        out.completion_time = 0.0;
    }
    return out;
}

MulticastSchedule schedule_multicast(const std::vector<DownloadRequest>& pending,
                                     const BlockLibrary& library, const LinkModel& link) {
    MulticastSchedule sched;
    std::map<std::string, std::set<int>> needed; // block -> request ids
    for (const auto& req : pending) {
        for (const auto& b : library.models.at(req.model_id)) needed[b].insert(req.id);
        sched.unicast_makespan += transmission_time(library.model_bytes(req.model_id), link);
    }
    std::vector<std::pair<std::string, std::set<int>>> order(needed.begin(), needed.end());
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
        if (a.second.size() != b.second.size()) return a.second.size() > b.second.size();
        return a.first < b.first;
    });
    double t = 0.0;
    for (auto& [block, recipients] : order) {
        const double dur = transmission_time(library.blocks.at(block), link);
        sched.transmissions.push_back(MulticastTransmission{block, recipients, t, dur});
        t += dur;
    }
    sched.makespan = t;
    return sched;
}

namespace {

struct SatQueue {
    double busy_until = 0.0;
    bool flush_scheduled = false;
    std::vector<std::pair<DownloadRequest, double>> pending; // request, fetch+prop+extra tail
};

} // namespace

DownloadRunResult run_download(const DownloadScenario& sc, const CacheState& cache,
                               const DownloadRunConfig& cfg, MetricsLog* metrics_out) {
    sc.library->validate();
    sc.demand->validate(*sc.library);

    DownloadRunResult res;

    // Poisson arrivals per cluster; model drawn from the cluster's demand.
    for (std::size_t c = 0; c < sc.cluster_grounds.size(); ++c) {
        const double rate = sc.demand->request_rate[c];
        if (!(rate > 0.0)) continue;
        RngStream rng(cfg.seed, "download/arrivals/c" + std::to_string(c));
        double t = 0.0;
        while (true) {
            t += rng.exponential(1.0 / rate);
            if (t >= cfg.horizon) break;
            DownloadRequest req;
            req.cluster = static_cast<int>(c);
            req.t_arrival = t;
            double pick = rng.uniform();
            for (const auto& [m, p] : sc.demand->model_probs[c]) {
                req.model_id = m;
                if (pick < p) break;
                pick -= p;
            }
            res.requests.push_back(req);
        }
    }
    std::sort(res.requests.begin(), res.requests.end(),
              [](const DownloadRequest& a, const DownloadRequest& b) {
                  if (a.t_arrival != b.t_arrival) return a.t_arrival < b.t_arrival;
                  return a.cluster < b.cluster;
              });
    for (std::size_t i = 0; i < res.requests.size(); ++i)
        res.requests[i].id = static_cast<int>(i);
    res.outcomes.resize(res.requests.size());

    Engine engine;
    std::map<int, SatQueue> queues;
    RngStream erasure_rng(cfg.seed, "download/erasure");
    double sum_mc_makespan = 0.0, sum_uc_makespan = 0.0;
    double completion_sum = 0.0;
    int served = 0;

    // Effective duration under optional full-block retransmission.
    auto effective = [&](double nominal) {
        double d = nominal;
        const double p = sc.links.user.erasure_prob;
        if (p > 0.0)
            while (erasure_rng.uniform() < p) d += nominal;
        return d;
    };

    std::function<void(int)> flush = [&](int sat) {
        SatQueue& q = queues[sat];
        q.flush_scheduled = false;
        if (q.pending.empty()) return;
        auto batch = std::move(q.pending);
        q.pending.clear();
        const double t0 = engine.now();

        std::vector<DownloadRequest> reqs;
        for (const auto& [r, tail] : batch) reqs.push_back(r);

        double makespan_actual = 0.0;
        std::map<int, double> downlink_done; // request id -> end offset
        MulticastSchedule nominal = schedule_multicast(reqs, *sc.library, sc.links.user);
        sum_uc_makespan += nominal.unicast_makespan;

        if (cfg.multicast) {
            double t = 0.0;
            for (const auto& tx : nominal.transmissions) {
                const double dur = effective(tx.duration);
                for (int rid : tx.recipients)
                    downlink_done[rid] = std::max(downlink_done[rid], t + dur);
                t += dur;
            }
            makespan_actual = t;
            sum_mc_makespan += nominal.makespan;
        } else {
            double t = 0.0;
            for (const auto& req : reqs) {
                for (const auto& b : sc.library->models.at(req.model_id))
                    t += effective(transmission_time(sc.library->blocks.at(b), sc.links.user));
                downlink_done[req.id] = t;
            }
            makespan_actual = t;
            sum_mc_makespan += nominal.unicast_makespan;
        }
        q.busy_until = t0 + makespan_actual;

        for (const auto& [req, tail] : batch) {
            auto& out = res.outcomes[req.id];
            const double done_abs = t0 + downlink_done[req.id] + tail;
            out.completion_time = done_abs - req.t_arrival;
            completion_sum += out.completion_time;
            ++served;
            engine.schedule(done_abs, "served", [&engine, &res, req, done_abs]() {
                engine.metrics().append("download_served", done_abs,
                                        res.outcomes[req.id].completion_time,
                                        {{"status", to_string(res.outcomes[req.id].status)},
                                         {"model", req.model_id}});
            });
        }
    };

    for (const auto& req : res.requests) {
        engine.schedule(req.t_arrival, "request", [&, req]() {
            DownloadOutcome out = serve_request(req, cache, sc);
            res.outcomes[req.id] = out;
            if (out.status == DownloadStatus::miss) {
                engine.metrics().append("download_miss", req.t_arrival, 1.0,
                                        {{"model", req.model_id}});
                return;
            }
            // Tail charges applied after the downlink finishes: ISL fetches
            // plus one propagation + processing leg.
            const GroundNode& gn = (*sc.ground_nodes)[sc.cluster_grounds[req.cluster]];
            const EcefPosition p = eci_to_ecef(
                propagate((*sc.constellation)[out.serving_sat], req.t_arrival),
                req.t_arrival);
            double fetch = 0.0;
            for (const auto& [b, src] : out.blocks_from)
                fetch += transmission_time(sc.library->blocks.at(b), sc.links.isl) +
                         isl_prop(sc, out.serving_sat, src, req.t_arrival) +
                         sc.links.isl.extra_delay;
            const double tail = fetch +
                                propagation_delay(slant_range(p, gn.location)) +
                                sc.links.user.extra_delay;

            SatQueue& q = queues[out.serving_sat];
            q.pending.push_back({req, tail});
            if (!q.flush_scheduled) {
                const double wait = cfg.multicast ? cfg.batch_window : 0.0;
                const double when = std::max(engine.now() + wait, q.busy_until);
                q.flush_scheduled = true;
                const int sat = out.serving_sat;
                engine.schedule(when, "flush", [&flush, sat]() { flush(sat); });
            }
        });
    }

    engine.run_until(cfg.horizon + 1e7); // drain queued transmissions

    DownloadSummary& s = res.summary;
    s.total = static_cast<int>(res.requests.size());
    for (const auto& o : res.outcomes) {
        switch (o.status) {
            case DownloadStatus::hit_local: s.hit_local++; break;
            case DownloadStatus::hit_with_isl_fetch: s.hit_isl++; break;
            case DownloadStatus::miss: s.miss++; break;
        }
    }
    s.hit_ratio_empirical =
        s.total == 0 ? 0.0 : static_cast<double>(s.hit_local + s.hit_isl) / s.total;
    s.mean_completion_time = served > 0 ? completion_sum / served : 0.0;
    s.makespan_ratio_vs_unicast =
        sum_uc_makespan > 0.0 ? sum_mc_makespan / sum_uc_makespan : 1.0;

    if (metrics_out) *metrics_out = engine.metrics();
    return res;
}

BlockLibrary generate_library(const LibraryGenConfig& cfg, std::uint64_t seed) {
    if (cfg.n_blocks < 1 || cfg.n_models < 1 || cfg.blocks_per_model < 1)
        throw ValidationError("download.generate: counts must be positive");
    if (cfg.blocks_per_model > cfg.n_blocks)
        throw ValidationError("download.generate: blocks_per_model must be <= n_blocks");

    RngStream rng(seed, "download/library");
    BlockLibrary lib;
    std::vector<std::string> ids;
    for (int i = 0; i < cfg.n_blocks; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "b%02d", i);
        ids.push_back(buf);
        lib.blocks[buf] = rng.uniform(cfg.block_min_bytes, cfg.block_max_bytes);
    }

    const int n_shared = std::max(
        1, std::min(cfg.n_blocks,
                    static_cast<int>(std::lround(cfg.shared_fraction * cfg.n_blocks))));
    const int per_model_shared = std::min(cfg.blocks_per_model, std::max(1, n_shared / 2));

    for (int m = 0; m < cfg.n_models; ++m) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "m%d", m);
        RngStream mrng = rng.substream(buf);

        std::vector<std::string> shared(ids.begin(), ids.begin() + n_shared);
        std::vector<std::string> rest(ids.begin() + n_shared, ids.end());
        mrng.shuffle(shared);
        mrng.shuffle(rest);

        std::vector<std::string> chosen(shared.begin(), shared.begin() + per_model_shared);
        for (int i = 0; i < cfg.blocks_per_model - per_model_shared &&
                        i < static_cast<int>(rest.size());
             ++i)
            chosen.push_back(rest[i]);
        std::sort(chosen.begin(), chosen.end());
        lib.models[buf] = chosen;
    }
    return lib;
}

DemandModel generate_demand(const BlockLibrary& lib, int n_clusters,
                            double rate_per_cluster, double zipf_exponent) {
    std::vector<std::string> model_ids;
    for (const auto& [id, bl] : lib.models) model_ids.push_back(id);
    const int n = static_cast<int>(model_ids.size());

    DemandModel demand;
    for (int c = 0; c < n_clusters; ++c) {
        std::map<std::string, double> probs;
        double norm = 0.0;
        for (int r = 0; r < n; ++r) norm += 1.0 / std::pow(r + 1.0, zipf_exponent);
        for (int r = 0; r < n; ++r) {
            const std::string& m = model_ids[(r + c) % n]; // cluster-rotated ranking
            probs[m] = (1.0 / std::pow(r + 1.0, zipf_exponent)) / norm;
        }
        demand.model_probs.push_back(std::move(probs));
        demand.request_rate.push_back(rate_per_cluster);
    }
    return demand;
}

std::string download_outcomes_to_csv(const std::vector<DownloadRequest>& requests,
                                     const std::vector<DownloadOutcome>& outcomes,
                                     const std::vector<std::string>& cluster_ids) {
    std::string out = "request_id,cluster,model_id,status,completion_s\n";
    char buf[160];
    for (std::size_t i = 0; i < requests.size(); ++i) {
        const auto& r = requests[i];
        const auto& o = outcomes[i];
        std::snprintf(buf, sizeof(buf), "%d,%s,%s,%s,%.6f\n", r.id,
                      cluster_ids[r.cluster].c_str(), r.model_id.c_str(),
                      to_string(o.status).c_str(), o.completion_time);
        out += buf;
    }
    return out;
}

} // namespace fluidsim
