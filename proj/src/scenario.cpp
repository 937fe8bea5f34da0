#include "fluidsim/scenario.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "fluidsim/error.hpp"

namespace fluidsim {

using nlohmann::json;

namespace {

// Strict object reader: typed getters plus an unknown-key sweep. Errors
// accumulate so a bad file reports everything at once.
class Section {
public:
    Section(const json& j, std::string path, ValidationCollector& errors)
        : j_(j), path_(std::move(path)), errors_(errors) {}

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key);
    }

    double num(const std::string& key, double fallback) {
        seen_.insert(key);
        if (!j_.contains(key)) return fallback;
        if (!j_[key].is_number()) {
            fail(key, "must be a number");
            return fallback;
        }
        return j_[key].get<double>();
    }

    double req_num(const std::string& key) {
        seen_.insert(key);
        if (!j_.contains(key) || !j_[key].is_number()) {
            fail(key, "required number missing");
            return 0.0;
        }
        return j_[key].get<double>();
    }

    long long integer(const std::string& key, long long fallback) {
        seen_.insert(key);
        if (!j_.contains(key)) return fallback;
        if (!j_[key].is_number_integer()) {
            fail(key, "must be an integer");
            return fallback;
        }
        return j_[key].get<long long>();
    }

    bool boolean(const std::string& key, bool fallback) {
        seen_.insert(key);
        if (!j_.contains(key)) return fallback;
        if (!j_[key].is_boolean()) {
            fail(key, "must be a boolean");
            return fallback;
        }
        return j_[key].get<bool>();
    }

    std::string str(const std::string& key, const std::string& fallback) {
        seen_.insert(key);
        if (!j_.contains(key)) return fallback;
        if (!j_[key].is_string()) {
            fail(key, "must be a string");
            return fallback;
        }
        return j_[key].get<std::string>();
    }

    std::string req_str(const std::string& key) {
        seen_.insert(key);
        if (!j_.contains(key) || !j_[key].is_string()) {
            fail(key, "required string missing");
            return "";
        }
        return j_[key].get<std::string>();
    }

    const json* object(const std::string& key) {
        seen_.insert(key);
        if (!j_.contains(key)) return nullptr;
        if (!j_[key].is_object()) {
            fail(key, "must be an object");
            return nullptr;
        }
        return &j_[key];
    }

    const json* array(const std::string& key) {
        seen_.insert(key);
        if (!j_.contains(key)) return nullptr;
        if (!j_[key].is_array()) {
            fail(key, "must be an array");
            return nullptr;
        }
        return &j_[key];
    }

    void fail(const std::string& key, const std::string& why) {
        errors_.fail(path_.empty() ? key : path_ + "." + key, why);
    }

    // Unknown-key sweep; call after all reads.
    void finish() {
        for (const auto& [key, value] : j_.items())
            if (!seen_.count(key)) fail(key, "unknown key");
    }

    const std::string& path() const { return path_; }

private:
    const json& j_;
    std::string path_;
    ValidationCollector& errors_;
    std::set<std::string> seen_;
};

LinkModel parse_link(const json& j, const std::string& path, LinkModel defaults,
                     ValidationCollector& errors) {
    Section s(j, path, errors);
    LinkModel link = defaults;
    link.data_rate = s.num("data_rate_bps", defaults.data_rate);
    link.extra_delay = s.num("extra_delay_s", defaults.extra_delay);
    link.erasure_prob = s.num("erasure_prob", defaults.erasure_prob);
    s.finish();
    if (!(link.data_rate > 0.0)) errors.fail(path + ".data_rate_bps", "must be positive");
    if (link.extra_delay < 0.0) errors.fail(path + ".extra_delay_s", "must be non-negative");
    if (link.erasure_prob < 0.0 || link.erasure_prob >= 1.0)
        errors.fail(path + ".erasure_prob", "must be in [0, 1)");
    return link;
}

ScenarioLearning parse_learning(const json& j, ValidationCollector& errors) {
    ScenarioLearning out;
    Section s(j, "learning", errors);

    if (const json* schemes = s.array("schemes")) {
        out.schemes.clear();
        for (const auto& item : *schemes) {
            const std::string name = item.is_string() ? item.get<std::string>() : "";
            if (name == "dispersal") out.schemes.push_back(FlScheme::dispersal);
            else if (name == "hierarchical_gs") out.schemes.push_back(FlScheme::hierarchical_gs);
            else if (name == "isl_gossip") out.schemes.push_back(FlScheme::isl_gossip);
            else errors.fail("learning.schemes", "unknown scheme '" + name + "'");
        }
        if (out.schemes.empty()) errors.fail("learning.schemes", "must list at least one scheme");
    }

    out.config.local_epochs = static_cast<int>(s.integer("local_epochs", 2));
    out.config.learning_rate = s.num("learning_rate", 0.05);
    out.config.batch_size = static_cast<int>(s.integer("batch_size", 10));
    out.config.mixing_alpha = s.num("mixing_alpha", 0.5);
    out.config.gossip_degree = static_cast<int>(s.integer("gossip_degree", 2));
    out.config.aggregation_period = s.num("aggregation_period_s", 300.0);
    out.config.station_quorum = static_cast<int>(s.integer("station_quorum", 0));
    out.config.seconds_per_epoch = s.num("seconds_per_epoch", 10.0);
    out.config.staleness_tau = s.num("staleness_tau_s", 0.0);
    out.hidden = static_cast<int>(s.integer("hidden", 32));
    out.centralized_epochs = static_cast<int>(s.integer("centralized_epochs", 150));
    out.horizon = s.num("horizon_s", 0.0);

    if (const json* data = s.object("data")) {
        Section d(*data, "learning.data", errors);
        out.data.n_clusters = static_cast<int>(d.integer("n_clusters", 8));
        out.data.clients_per_cluster = static_cast<int>(d.integer("clients_per_cluster", 5));
        out.data.labels_per_cluster = static_cast<int>(d.integer("labels_per_cluster", 3));
        out.data.n_classes = static_cast<int>(d.integer("n_classes", 10));
        out.data.dim = static_cast<int>(d.integer("dim", 16));
        out.data.samples_per_client = static_cast<int>(d.integer("samples_per_client", 50));
        out.data.test_samples_per_class =
            static_cast<int>(d.integer("test_samples_per_class", 100));
        out.data.center_scale = d.num("center_scale", 1.5);
        out.data.noise_sigma = d.num("noise_sigma", 1.0);
        d.finish();
    }
    s.finish();

    if (out.config.learning_rate <= 0.0)
        errors.fail("learning.learning_rate", "must be positive");
    if (out.config.mixing_alpha <= 0.0 || out.config.mixing_alpha >= 1.0)
        errors.fail("learning.mixing_alpha", "must be in (0, 1)");
    if (out.data.labels_per_cluster > out.data.n_classes)
        errors.fail("learning.data.labels_per_cluster", "must be <= n_classes");
    return out;
}

ScenarioInference parse_inference(const json& j, ValidationCollector& errors) {
    ScenarioInference out;
    Section s(j, "inference", errors);

    if (const json* stages = s.array("cascade")) {
        out.cascade.clear();
        int idx = 0;
        for (const auto& item : *stages) {
            const std::string path = "inference.cascade[" + std::to_string(idx++) + "]";
            if (!item.is_object()) {
                errors.fail(path, "must be an object");
                continue;
            }
            Section st(item, path, errors);
            SubModel sub;
            sub.compute_cost = st.req_num("compute_cost_flop");
            sub.activation_size = st.num("activation_bytes", 0.0);
            sub.exit_accuracy = st.req_num("exit_accuracy");
            sub.param_bytes = st.num("param_bytes", 0.0);
            st.finish();
            out.cascade.push_back(sub);
        }
        if (out.cascade.empty()) errors.fail("inference.cascade", "must be non-empty");
    }

    if (const json* caps = s.object("capacities")) {
        Section c(*caps, "inference.capacities", errors);
        out.capacities.device_rate = c.num("device_flops", out.capacities.device_rate);
        out.capacities.satellite_rate = c.num("satellite_flops", out.capacities.satellite_rate);
        out.capacities.station_rate = c.num("station_flops", out.capacities.station_rate);
        c.finish();
    }

    if (const json* wl = s.object("workload")) {
        Section w(*wl, "inference.workload", errors);
        out.workload.rate_per_cluster = w.num("rate_per_cluster_hz", 0.2);
        out.workload.horizon = w.num("horizon_s", 7200.0);
        out.workload.input_size = w.num("input_bytes", 2e5);
        out.workload.deadline = w.num("deadline_s", 30.0);
        if (const json* choices = w.array("min_accuracy_choices")) {
            out.workload.min_accuracy_choices.clear();
            for (const auto& c : *choices)
                out.workload.min_accuracy_choices.push_back(
                    c.is_number() ? c.get<double>() : 0.0);
        }
        if (const json* weights = w.array("min_accuracy_weights")) {
            out.workload.min_accuracy_weights.clear();
            for (const auto& c : *weights)
                out.workload.min_accuracy_weights.push_back(
                    c.is_number() ? c.get<double>() : 0.0);
        }
        w.finish();
        if (out.workload.min_accuracy_choices.size() !=
            out.workload.min_accuracy_weights.size())
            errors.fail("inference.workload.min_accuracy_weights",
                        "must align with min_accuracy_choices");
    }

    if (const json* pol = s.object("policy")) {
        Section p(*pol, "inference.policy", errors);
        out.policy.migration_enabled = p.boolean("migration_enabled", true);
        out.policy.allow_horizontal = p.boolean("allow_horizontal", true);
        out.policy.allow_vertical = p.boolean("allow_vertical", true);
        out.policy.placement_epoch = p.num("placement_epoch_s", 60.0);
        out.policy.queue_threshold = static_cast<int>(p.integer("queue_threshold", 0));
        const std::string cached = p.str("submodels_cached", "all");
        if (cached == "all") out.policy.submodels_everywhere = true;
        else if (cached == "placed_only") out.policy.submodels_everywhere = false;
        else errors.fail("inference.policy.submodels_cached", "must be 'all' or 'placed_only'");
        p.finish();
    }
    s.finish();
    return out;
}

BlockLibrary parse_library_json(const json& j, const std::string& path,
                                ValidationCollector& errors) {
    BlockLibrary lib;
    Section s(j, path, errors);
    if (const json* blocks = s.array("blocks")) {
        int idx = 0;
        for (const auto& item : *blocks) {
            const std::string p = path + ".blocks[" + std::to_string(idx++) + "]";
            if (!item.is_object()) {
                errors.fail(p, "must be an object");
                continue;
            }
            Section b(item, p, errors);
            const std::string id = b.req_str("id");
            lib.blocks[id] = b.req_num("size_bytes");
            b.finish();
        }
    } else {
        errors.fail(path + ".blocks", "required array missing");
    }
    if (const json* models = s.array("models")) {
        int idx = 0;
        for (const auto& item : *models) {
            const std::string p = path + ".models[" + std::to_string(idx++) + "]";
            if (!item.is_object()) {
                errors.fail(p, "must be an object");
                continue;
            }
            Section m(item, p, errors);
            const std::string id = m.req_str("id");
            std::vector<std::string> ids;
            if (const json* bl = m.array("blocks")) {
                for (const auto& b : *bl)
                    ids.push_back(b.is_string() ? b.get<std::string>() : "");
            } else {
                errors.fail(p + ".blocks", "required array missing");
            }
            lib.models[id] = ids;
            m.finish();
        }
    } else {
        errors.fail(path + ".models", "required array missing");
    }
    s.finish();
    return lib;
}

ScenarioDownload parse_download(const json& j, const std::string& base_dir,
                                ValidationCollector& errors) {
    ScenarioDownload out;
    Section s(j, "download", errors);

    if (const json* lib = s.object("library"))
        out.library = parse_library_json(*lib, "download.library", errors);

    if (s.has("library_file")) {
        const std::string file = s.str("library_file", "");
        std::ifstream in(base_dir.empty() ? file : base_dir + "/" + file);
        if (!in) {
            errors.fail("download.library_file", "cannot open '" + file + "'");
        } else {
            json parsed = json::parse(in, nullptr, false);
            if (parsed.is_discarded())
                errors.fail("download.library_file", "invalid JSON in '" + file + "'");
            else
                out.library = parse_library_json(parsed, "download.library_file", errors);
        }
    }

    if (const json* gen = s.object("generate")) {
        Section g(*gen, "download.generate", errors);
        out.generate.n_blocks = static_cast<int>(g.integer("n_blocks", 16));
        out.generate.n_models = static_cast<int>(g.integer("n_models", 6));
        out.generate.blocks_per_model = static_cast<int>(g.integer("blocks_per_model", 5));
        out.generate.shared_fraction = g.num("shared_fraction", 0.25);
        out.generate.block_min_bytes = g.num("block_min_bytes", 4e6);
        out.generate.block_max_bytes = g.num("block_max_bytes", 1.2e7);
        g.finish();
    }

    out.zipf_exponent = s.num("zipf_exponent", 1.0);
    out.capacity_bytes_per_sat = s.num("capacity_bytes_per_sat", 2.4e7);
    out.request_rate_per_cluster = s.num("request_rate_per_cluster_hz", 0.05);
    out.horizon = s.num("horizon_s", 7200.0);
    out.isl_budget = s.num("isl_budget_s", 2.0);
    out.multicast = s.boolean("multicast", true);
    out.batch_window = s.num("batch_window_s", 5.0);
    s.finish();

    if (!(out.capacity_bytes_per_sat > 0.0))
        errors.fail("download.capacity_bytes_per_sat", "must be positive");
    return out;
}

} // namespace

std::vector<int> Scenario::cluster_ground_indices() const {
    std::vector<int> out;
    for (int g = 0; g < static_cast<int>(ground_nodes.size()); ++g)
        if (ground_nodes[g].kind == GroundKind::cluster) out.push_back(g);
    return out;
}

std::vector<int> Scenario::station_ground_indices() const {
    std::vector<int> out;
    for (int g = 0; g < static_cast<int>(ground_nodes.size()); ++g)
        if (ground_nodes[g].kind == GroundKind::station) out.push_back(g);
    return out;
}

IslTopology Scenario::build_topology() const {
    if (isl_mode == IslMode::none) return IslTopology{};
    return build_grid_topology(constellation.planes,
                               constellation.total_sats / constellation.planes,
                               isl_cross_seam);
}

Scenario parse_scenario_text(const std::string& json_text) {
    json j = json::parse(json_text, nullptr, false);
    if (j.is_discarded()) throw ValidationError("scenario: invalid JSON");
    if (!j.is_object()) throw ValidationError("scenario: top level must be an object");

    ValidationCollector errors;
    Scenario out;
    Section root(j, "", errors);

    if (const json* c = root.object("constellation")) {
        Section s(*c, "constellation", errors);
        out.constellation.total_sats = static_cast<int>(s.integer("total_sats", 88));
        out.constellation.planes = static_cast<int>(s.integer("planes", 8));
        out.constellation.phasing = static_cast<int>(s.integer("phasing", 1));
        out.constellation.inclination = deg2rad(s.num("inclination_deg", 53.0));
        const double alt_km = s.num("altitude_km", 550.0);
        out.constellation.altitude = alt_km * 1e3;
        out.constellation.raan_offset = deg2rad(s.num("raan_offset_deg", 0.0));
        s.finish();
        if (!(alt_km > 0.0)) errors.fail("constellation.altitude_km", "must be positive");
        if (out.constellation.total_sats <= 0)
            errors.fail("constellation.total_sats", "must be positive");
        else if (out.constellation.planes <= 0)
            errors.fail("constellation.planes", "must be positive");
        else if (out.constellation.total_sats % out.constellation.planes != 0)
            errors.fail("constellation.total_sats", "must be divisible by planes");
        if (out.constellation.phasing < 0 ||
            (out.constellation.planes > 0 &&
             out.constellation.phasing >= out.constellation.planes))
            errors.fail("constellation.phasing", "must satisfy 0 <= phasing < planes");
        if (!(out.constellation.inclination > 0.0) || out.constellation.inclination > kPi)
            errors.fail("constellation.inclination_deg", "must be in (0, 180]");
    } else {
        errors.fail("constellation", "required section missing");
    }

    if (const json* nodes = root.array("ground_nodes")) {
        std::set<std::string> ids;
        int idx = 0;
        for (const auto& item : *nodes) {
            const std::string path = "ground_nodes[" + std::to_string(idx++) + "]";
            if (!item.is_object()) {
                errors.fail(path, "must be an object");
                continue;
            }
            Section s(item, path, errors);
            GroundNode node;
            node.id = s.req_str("id");
            const std::string kind = s.str("kind", "cluster");
            if (kind == "cluster") node.kind = GroundKind::cluster;
            else if (kind == "station") node.kind = GroundKind::station;
            else errors.fail(path + ".kind", "must be 'cluster' or 'station'");
            const double lat = s.req_num("lat_deg");
            const double lon = s.req_num("lon_deg");
            node.location.latitude = deg2rad(lat);
            node.location.longitude = deg2rad(lon);
            node.location.altitude = s.num("alt_m", 0.0);
            node.min_elevation = deg2rad(s.num("min_elevation_deg", 25.0));
            s.finish();
            if (lat < -90.0 || lat > 90.0) errors.fail(path + ".lat_deg", "must be in [-90, 90]");
            if (lon < -180.0 || lon >= 180.0)
                errors.fail(path + ".lon_deg", "must be in [-180, 180)");
            if (node.min_elevation < 0.0 || node.min_elevation >= kPi / 2.0)
                errors.fail(path + ".min_elevation_deg", "must be in [0, 90)");
            if (!node.id.empty() && !ids.insert(node.id).second)
                errors.fail(path + ".id", "duplicate ground node id '" + node.id + "'");
            out.ground_nodes.push_back(node);
        }
    } else {
        errors.fail("ground_nodes", "required section missing");
    }

    if (const json* links = root.object("links")) {
        Section s(*links, "links", errors);
        if (const json* l = s.object("user_link"))
            out.links.user = parse_link(*l, "links.user_link", out.links.user, errors);
        if (const json* l = s.object("feeder_link"))
            out.links.feeder = parse_link(*l, "links.feeder_link", out.links.feeder, errors);
        if (const json* l = s.object("isl"))
            out.links.isl = parse_link(*l, "links.isl", out.links.isl, errors);
        s.finish();
        out.links.user.cls = LinkClass::user_link;
        out.links.feeder.cls = LinkClass::feeder_link;
        out.links.isl.cls = LinkClass::isl;
    }

    if (const json* isl = root.object("isl")) {
        Section s(*isl, "isl", errors);
        const std::string mode = s.str("mode", "grid");
        if (mode == "none") out.isl_mode = IslMode::none;
        else if (mode == "grid") out.isl_mode = IslMode::grid;
        else errors.fail("isl.mode", "must be 'none' or 'grid'");
        out.isl_cross_seam = s.boolean("cross_seam", true);
        s.finish();
    }

    if (const json* sim = root.object("sim")) {
        Section s(*sim, "sim", errors);
        out.seed = static_cast<std::uint64_t>(s.integer("seed", 1));
        out.horizon = s.num("horizon_s", 86400.0);
        out.contact_step = s.num("contact_step_s", 10.0);
        s.finish();
        if (!(out.horizon > 0.0)) errors.fail("sim.horizon_s", "must be positive");
        if (!(out.contact_step > 0.0)) errors.fail("sim.contact_step_s", "must be positive");
    } else {
        errors.fail("sim", "required section missing");
    }

    if (const json* l = root.object("learning")) out.learning = parse_learning(*l, errors);
    if (const json* i = root.object("inference")) out.inference = parse_inference(*i, errors);
    if (const json* d = root.object("download")) out.download = parse_download(*d, "", errors);
    root.finish();

    if (out.learning) {
        const int n_cluster_nodes = static_cast<int>(out.cluster_ground_indices().size());
        if (out.learning->data.n_clusters > n_cluster_nodes)
            errors.fail("learning.data.n_clusters",
                        "needs " + std::to_string(out.learning->data.n_clusters) +
                            " cluster ground nodes, scenario has " +
                            std::to_string(n_cluster_nodes));
    }

    errors.throw_if_failed();
    return out;
}

Scenario parse_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("scenario: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario_text(ss.str());
}

std::string serialize_scenario(const Scenario& s) {
    json j;
    j["constellation"] = {{"total_sats", s.constellation.total_sats},
                          {"planes", s.constellation.planes},
                          {"phasing", s.constellation.phasing},
                          {"inclination_deg", rad2deg(s.constellation.inclination)},
                          {"altitude_km", s.constellation.altitude / 1e3},
                          {"raan_offset_deg", rad2deg(s.constellation.raan_offset)}};
    j["ground_nodes"] = json::array();
    for (const auto& n : s.ground_nodes) {
        j["ground_nodes"].push_back(
            {{"id", n.id},
             {"kind", n.kind == GroundKind::cluster ? "cluster" : "station"},
             {"lat_deg", rad2deg(n.location.latitude)},
             {"lon_deg", rad2deg(n.location.longitude)},
             {"alt_m", n.location.altitude},
             {"min_elevation_deg", rad2deg(n.min_elevation)}});
    }
    auto link_json = [](const LinkModel& l) {
        return json{{"data_rate_bps", l.data_rate},
                    {"extra_delay_s", l.extra_delay},
                    {"erasure_prob", l.erasure_prob}};
    };
    j["links"] = {{"user_link", link_json(s.links.user)},
                  {"feeder_link", link_json(s.links.feeder)},
                  {"isl", link_json(s.links.isl)}};
    j["isl"] = {{"mode", s.isl_mode == IslMode::none ? "none" : "grid"},
                {"cross_seam", s.isl_cross_seam}};
    j["sim"] = {{"seed", s.seed},
                {"horizon_s", s.horizon},
                {"contact_step_s", s.contact_step}};

    if (s.learning) {
        const auto& l = *s.learning;
        json schemes = json::array();
        for (FlScheme sc : l.schemes) schemes.push_back(to_string(sc));
        j["learning"] = {{"schemes", schemes},
                         {"local_epochs", l.config.local_epochs},
                         {"learning_rate", l.config.learning_rate},
                         {"batch_size", l.config.batch_size},
                         {"mixing_alpha", l.config.mixing_alpha},
                         {"gossip_degree", l.config.gossip_degree},
                         {"aggregation_period_s", l.config.aggregation_period},
                         {"station_quorum", l.config.station_quorum},
                         {"seconds_per_epoch", l.config.seconds_per_epoch},
                         {"staleness_tau_s", l.config.staleness_tau},
                         {"hidden", l.hidden},
                         {"centralized_epochs", l.centralized_epochs},
                         {"horizon_s", l.horizon},
                         {"data", {{"n_clusters", l.data.n_clusters},
                                   {"clients_per_cluster", l.data.clients_per_cluster},
                                   {"labels_per_cluster", l.data.labels_per_cluster},
                                   {"n_classes", l.data.n_classes},
                                   {"dim", l.data.dim},
                                   {"samples_per_client", l.data.samples_per_client},
                                   {"test_samples_per_class", l.data.test_samples_per_class},
                                   {"center_scale", l.data.center_scale},
                                   {"noise_sigma", l.data.noise_sigma}}}};
    }

    if (s.inference) {
        const auto& i = *s.inference;
        json stages = json::array();
        for (const auto& st : i.cascade)
            stages.push_back({{"compute_cost_flop", st.compute_cost},
                              {"activation_bytes", st.activation_size},
                              {"exit_accuracy", st.exit_accuracy},
                              {"param_bytes", st.param_bytes}});
        j["inference"] = {
            {"cascade", stages},
            {"capacities", {{"device_flops", i.capacities.device_rate},
                            {"satellite_flops", i.capacities.satellite_rate},
                            {"station_flops", i.capacities.station_rate}}},
            {"workload", {{"rate_per_cluster_hz", i.workload.rate_per_cluster},
                          {"horizon_s", i.workload.horizon},
                          {"input_bytes", i.workload.input_size},
                          {"deadline_s", i.workload.deadline},
                          {"min_accuracy_choices", i.workload.min_accuracy_choices},
                          {"min_accuracy_weights", i.workload.min_accuracy_weights}}},
            {"policy", {{"migration_enabled", i.policy.migration_enabled},
                        {"allow_horizontal", i.policy.allow_horizontal},
                        {"allow_vertical", i.policy.allow_vertical},
                        {"placement_epoch_s", i.policy.placement_epoch},
                        {"queue_threshold", i.policy.queue_threshold},
                        {"submodels_cached",
                         i.policy.submodels_everywhere ? "all" : "placed_only"}}}};
    }

    if (s.download) {
        const auto& d = *s.download;
        json dd = {{"zipf_exponent", d.zipf_exponent},
                   {"capacity_bytes_per_sat", d.capacity_bytes_per_sat},
                   {"request_rate_per_cluster_hz", d.request_rate_per_cluster},
                   {"horizon_s", d.horizon},
                   {"isl_budget_s", d.isl_budget},
                   {"multicast", d.multicast},
                   {"batch_window_s", d.batch_window}};
        if (d.library) {
            json blocks = json::array();
            for (const auto& [id, size] : d.library->blocks)
                blocks.push_back({{"id", id}, {"size_bytes", size}});
            json models = json::array();
            for (const auto& [id, bl] : d.library->models)
                models.push_back({{"id", id}, {"blocks", bl}});
            dd["library"] = {{"blocks", blocks}, {"models", models}};
        } else {
            dd["generate"] = {{"n_blocks", d.generate.n_blocks},
                              {"n_models", d.generate.n_models},
                              {"blocks_per_model", d.generate.blocks_per_model},
                              {"shared_fraction", d.generate.shared_fraction},
                              {"block_min_bytes", d.generate.block_min_bytes},
                              {"block_max_bytes", d.generate.block_max_bytes}};
        }
        j["download"] = dd;
    }

    return j.dump(2) + "\n";
}

std::uint64_t scenario_hash(const Scenario& s) {
    const std::string text = serialize_scenario(s);
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

} // namespace fluidsim
