#include "fluidsim/cli.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <mutex>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "fluidsim/error.hpp"
#include "fluidsim/fluid_download.hpp"
#include "fluidsim/fluid_inference.hpp"
#include "fluidsim/fluid_learning.hpp"
#include "fluidsim/io_util.hpp"
#include "fluidsim/report.hpp"
#include "fluidsim/scenario.hpp"

namespace fluidsim {

namespace {

std::vector<std::uint64_t> parse_seed_range(const std::string& text) {
    const auto pos = text.find("..");
    if (pos == std::string::npos) return {std::stoull(text)};
    const std::uint64_t a = std::stoull(text.substr(0, pos));
    const std::uint64_t b = std::stoull(text.substr(pos + 2));
    if (b < a) throw ValidationError("--seeds: range end must be >= start");
    std::vector<std::uint64_t> out;
    for (std::uint64_t s = a; s <= b; ++s) out.push_back(s);
    return out;
}

std::string hex64(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    const Scenario& sc, const std::vector<std::uint64_t>& seeds,
                    double wall_s) {
    nlohmann::json m;
    m["command"] = command;
    m["scenario_hash"] = hex64(scenario_hash(sc));
    m["seeds"] = seeds;
    m["tool_version"] = kToolVersion;
    m["wall_time_s"] = wall_s;
    write_file_atomic(out_dir + "/manifest.json", m.dump(2) + "\n");
}

// Runs fn(seed) for every seed, at most `jobs` concurrently. Each job only
// writes its own files, so scheduling order cannot affect outputs.
void for_each_seed(const std::vector<std::uint64_t>& seeds, int jobs,
                   const std::function<void(std::uint64_t)>& fn) {
    if (jobs <= 1) {
        for (auto s : seeds) fn(s);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::mutex error_mutex;
    std::vector<std::string> errors;
    const int n_threads = std::min<int>(jobs, static_cast<int>(seeds.size()));
    for (int i = 0; i < n_threads; ++i) {
        pool.emplace_back([&]() {
            while (true) {
                const std::size_t idx = next.fetch_add(1);
                if (idx >= seeds.size()) return;
                try {
                    fn(seeds[idx]);
                } catch (const std::exception& e) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    errors.push_back(e.what());
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (!errors.empty()) throw std::runtime_error(errors.front());
}

std::string format_num(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

int cmd_contacts_compute(const std::string& scenario_path, const std::string& out_dir) {
    const Scenario sc = parse_scenario(scenario_path);
    const auto constellation = walker_constellation(sc.constellation);
    const ContactPlan plan =
        compute_contact_plan(constellation, sc.ground_nodes, sc.horizon, sc.contact_step);

    write_file_atomic(out_dir + "/contacts.csv", contact_plan_to_csv(plan));

    nlohmann::json j;
    j["horizon_s"] = plan.horizon;
    j["step_s"] = plan.step;
    j["windows"] = nlohmann::json::array();
    for (const auto& w : plan.windows)
        j["windows"].push_back({{"sat_id", w.sat_id},
                                {"ground_id", w.ground_id},
                                {"t_start_s", w.t_start},
                                {"t_end_s", w.t_end},
                                {"peak_elev_deg", rad2deg(w.peak_elevation)}});
    write_file_atomic(out_dir + "/contacts.json", j.dump(2) + "\n");
    std::cout << "contacts: " << plan.windows.size() << " windows -> " << out_dir << "\n";
    return kExitOk;
}

int cmd_contacts_dump_orbits(const std::string& scenario_path, const std::string& out_dir,
                             double step_override) {
    const Scenario sc = parse_scenario(scenario_path);
    const auto constellation = walker_constellation(sc.constellation);
    const double step = step_override > 0.0 ? step_override : sc.contact_step;

    std::string csv = "t_s,sat_id,x_m,y_m,z_m\n";
    char buf[160];
    for (double t = 0.0; t <= sc.horizon; t += step) {
        for (int s = 0; s < static_cast<int>(constellation.size()); ++s) {
            const EcefPosition p = eci_to_ecef(propagate(constellation[s], t), t);
            std::snprintf(buf, sizeof(buf), "%.3f,%d,%.3f,%.3f,%.3f\n", t, s, p.r.x(),
                          p.r.y(), p.r.z());
            csv += buf;
        }
    }
    write_file_atomic(out_dir + "/orbits.csv", csv);
    std::cout << "orbits -> " << out_dir << "/orbits.csv\n";
    return kExitOk;
}

int cmd_simulate_learn(const Scenario& sc, const std::vector<std::uint64_t>& seeds,
                       const std::string& out_dir, int jobs) {
    if (!sc.learning)
        throw ValidationError("scenario: [learning] section required for 'simulate learn'");
    const auto t_begin = std::chrono::steady_clock::now();

    const auto constellation = walker_constellation(sc.constellation);
    const double horizon = sc.learning->horizon > 0.0 ? sc.learning->horizon : sc.horizon;
    const ContactPlan plan =
        compute_contact_plan(constellation, sc.ground_nodes, horizon, sc.contact_step);
    const IslTopology topo = sc.build_topology();
    const ScenarioLearning& learn = *sc.learning;

    for_each_seed(seeds, jobs, [&](std::uint64_t seed) {
        FlData data = gen_synthetic_data(learn.data, learn.hidden, seed);
        const double centralized = centralized_reference_accuracy(
            data.clusters, data.test_set, data.arch, learn.config.learning_rate,
            learn.config.batch_size, learn.centralized_epochs, seed);
        write_file_atomic(out_dir + "/centralized_seed" + std::to_string(seed) + ".csv",
                          "seed,accuracy\n" + std::to_string(seed) + "," +
                              format_num(centralized) + "\n");

        for (FlScheme scheme : learn.schemes) {
            FlRunInputs in;
            in.config = learn.config;
            in.config.scheme = scheme;
            in.plan = &plan;
            in.clusters = data.clusters;
            in.test_set = &data.test_set;
            in.constellation = &constellation;
            in.ground_nodes = &sc.ground_nodes;
            in.links = sc.links;
            in.topology = topo;
            in.horizon = horizon;
            in.seed = seed;
            const TrainingTrace trace = run_fl(in);
            write_file_atomic(out_dir + "/trace_" + to_string(scheme) + "_seed" +
                                  std::to_string(seed) + ".csv",
                              trace_to_csv(trace));
        }
    });

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin).count();
    write_manifest(out_dir, "simulate learn", sc, seeds, wall);
    std::cout << "learn: " << seeds.size() << " seeds x " << learn.schemes.size()
              << " schemes -> " << out_dir << "\n";
    return kExitOk;
}

nlohmann::json inference_summary_json(std::uint64_t seed, const std::string& policy,
                                      const InferenceSummary& s) {
    return nlohmann::json{{"seed", seed},
                          {"policy", policy},
                          {"total", s.total},
                          {"completed", s.completed},
                          {"deadline_missed", s.deadline_missed},
                          {"dropped_no_coverage", s.dropped_no_coverage},
                          {"completion_rate", s.completion_rate},
                          {"mean_latency_s", s.mean_latency},
                          {"mean_accuracy", s.mean_accuracy}};
}

int cmd_simulate_infer(const Scenario& sc, const std::vector<std::uint64_t>& seeds,
                       const std::string& out_dir, int jobs) {
    if (!sc.inference)
        throw ValidationError("scenario: [inference] section required for 'simulate infer'");
    const auto t_begin = std::chrono::steady_clock::now();

    const ScenarioInference& inf = *sc.inference;
    const CascadeModel cascade = build_cascade(inf.cascade);
    const auto constellation = walker_constellation(sc.constellation);
    const double plan_horizon = inf.workload.horizon + inf.workload.deadline + 120.0;
    const ContactPlan plan =
        compute_contact_plan(constellation, sc.ground_nodes, plan_horizon, sc.contact_step);
    const IslTopology topo = sc.build_topology();
    const std::vector<int> clusters = sc.cluster_ground_indices();

    for_each_seed(seeds, jobs, [&](std::uint64_t seed) {
        const auto workload = generate_workload(inf.workload, clusters, seed);

        InferenceRunInputs in;
        in.workload = workload;
        in.cascade = cascade;
        in.plan = &plan;
        in.constellation = &constellation;
        in.ground_nodes = &sc.ground_nodes;
        in.links = sc.links;
        in.topology = topo;
        in.capacities = inf.capacities;
        in.policy = inf.policy;
        in.horizon = plan_horizon;

        const InferenceResult with_migration = run_inference(in);
        write_file_atomic(out_dir + "/outcomes_migration_seed" + std::to_string(seed) +
                              ".csv",
                          outcomes_to_csv(with_migration.outcomes));
        write_file_atomic(
            out_dir + "/summary_migration_seed" + std::to_string(seed) + ".json",
            inference_summary_json(seed, "migration", with_migration.summary).dump(2) + "\n");

        InferenceRunInputs base = in;
        base.policy.migration_enabled = false;
        const InferenceResult no_migration = run_inference(base);
        write_file_atomic(out_dir + "/outcomes_static_seed" + std::to_string(seed) + ".csv",
                          outcomes_to_csv(no_migration.outcomes));
        write_file_atomic(
            out_dir + "/summary_static_seed" + std::to_string(seed) + ".json",
            inference_summary_json(seed, "static", no_migration.summary).dump(2) + "\n");
    });

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin).count();
    write_manifest(out_dir, "simulate infer", sc, seeds, wall);
    std::cout << "infer: " << seeds.size() << " seeds -> " << out_dir << "\n";
    return kExitOk;
}

int cmd_simulate_download(const Scenario& sc, const std::vector<std::uint64_t>& seeds,
                          const std::string& out_dir, int jobs) {
    if (!sc.download)
        throw ValidationError("scenario: [download] section required for 'simulate download'");
    const auto t_begin = std::chrono::steady_clock::now();

    const ScenarioDownload& dl = *sc.download;
    const auto constellation = walker_constellation(sc.constellation);
    const ContactPlan plan =
        compute_contact_plan(constellation, sc.ground_nodes, dl.horizon, sc.contact_step);
    const IslTopology topo = sc.build_topology();

    const BlockLibrary library =
        dl.library ? *dl.library : generate_library(dl.generate, sc.seed);
    library.validate();
    const std::vector<int> clusters = sc.cluster_ground_indices();
    const DemandModel demand = generate_demand(
        library, static_cast<int>(clusters.size()), dl.request_rate_per_cluster,
        dl.zipf_exponent);

    DownloadScenario dsc;
    dsc.library = &library;
    dsc.demand = &demand;
    dsc.plan = &plan;
    dsc.constellation = &constellation;
    dsc.ground_nodes = &sc.ground_nodes;
    dsc.cluster_grounds = clusters;
    dsc.topology = topo;
    dsc.links = sc.links;
    dsc.isl_budget = dl.isl_budget;

    // Placement is seed-independent: computed once per invocation.
    const CacheState cache = place_blocks_greedy(
        dsc, std::vector<double>(constellation.size(), dl.capacity_bytes_per_sat));

    nlohmann::json placement_json;
    placement_json["predicted_hit_ratio"] = hit_ratio(cache, dsc);
    placement_json["cached"] = nlohmann::json::object();
    for (std::size_t s = 0; s < cache.cached.size(); ++s) {
        if (cache.cached[s].empty()) continue;
        placement_json["cached"][std::to_string(s)] = cache.cached[s];
    }
    write_file_atomic(out_dir + "/cache_placement.json", placement_json.dump(2) + "\n");

    std::vector<std::string> cluster_ids;
    for (int g : clusters) cluster_ids.push_back(sc.ground_nodes[g].id);

    for_each_seed(seeds, jobs, [&](std::uint64_t seed) {
        DownloadRunConfig cfg;
        cfg.horizon = dl.horizon;
        cfg.multicast = dl.multicast;
        cfg.batch_window = dl.batch_window;
        cfg.seed = seed;
        const DownloadRunResult result = run_download(dsc, cache, cfg);

        write_file_atomic(out_dir + "/outcomes_seed" + std::to_string(seed) + ".csv",
                          download_outcomes_to_csv(result.requests, result.outcomes,
                                                   cluster_ids));
        nlohmann::json j{{"seed", seed},
                         {"total", result.summary.total},
                         {"hit_local", result.summary.hit_local},
                         {"hit_with_isl_fetch", result.summary.hit_isl},
                         {"miss", result.summary.miss},
                         {"hit_ratio_empirical", result.summary.hit_ratio_empirical},
                         {"mean_completion_s", result.summary.mean_completion_time},
                         {"makespan_ratio_vs_unicast",
                          result.summary.makespan_ratio_vs_unicast}};
        write_file_atomic(out_dir + "/summary_seed" + std::to_string(seed) + ".json",
                          j.dump(2) + "\n");
    });

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin).count();
    write_manifest(out_dir, "simulate download", sc, seeds, wall);
    std::cout << "download: " << seeds.size() << " seeds -> " << out_dir << "\n";
    return kExitOk;
}

} // namespace

int run_cli(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.push_back(argv[i]);
    return run_cli(args);
}

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"Space-ground fluid AI protocol simulator"};
    app.require_subcommand(1);

    // contacts
    auto* contacts = app.add_subcommand("contacts", "Contact-plan utilities");
    contacts->require_subcommand(1);
    std::string c_scenario, c_out = "out";
    double dump_step = 0.0;
    auto* c_compute = contacts->add_subcommand("compute", "Compute the contact plan");
    c_compute->add_option("scenario", c_scenario, "scenario file")->required();
    c_compute->add_option("--out", c_out, "output directory");
    auto* c_dump = contacts->add_subcommand("dump-orbits", "Dump per-satellite ECEF tracks");
    c_dump->add_option("scenario", c_scenario, "scenario file")->required();
    c_dump->add_option("--out", c_out, "output directory");
    c_dump->add_option("--step", dump_step, "sample step (s), default contact step");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Run protocol simulations");
    simulate->require_subcommand(1);
    std::string s_scenario, s_out = "out", s_seeds = "1..1";
    int s_jobs = 1;
    std::vector<CLI::App*> sim_cmds;
    for (const char* name : {"learn", "infer", "download"}) {
        auto* cmd = simulate->add_subcommand(name);
        cmd->add_option("scenario", s_scenario, "scenario file")->required();
        cmd->add_option("--seeds", s_seeds, "seed or range a..b");
        cmd->add_option("--out", s_out, "output directory");
        cmd->add_option("--jobs", s_jobs, "concurrent seed jobs");
        sim_cmds.push_back(cmd);
    }

    // report
    auto* report = app.add_subcommand("report", "Aggregate simulation outputs");
    std::string r_dir, r_out;
    report->add_option("dir", r_dir, "run output directory")->required();
    report->add_option("--out", r_out, "report directory (default <dir>/report)");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }

    try {
        if (c_compute->parsed()) return cmd_contacts_compute(c_scenario, c_out);
        if (c_dump->parsed()) return cmd_contacts_dump_orbits(c_scenario, c_out, dump_step);

        if (simulate->parsed()) {
            const Scenario sc = parse_scenario(s_scenario);
            const auto seeds = parse_seed_range(s_seeds);
            std::filesystem::create_directories(s_out);
            if (sim_cmds[0]->parsed()) return cmd_simulate_learn(sc, seeds, s_out, s_jobs);
            if (sim_cmds[1]->parsed()) return cmd_simulate_infer(sc, seeds, s_out, s_jobs);
            if (sim_cmds[2]->parsed()) return cmd_simulate_download(sc, seeds, s_out, s_jobs);
        }

        if (report->parsed()) {
            const std::string out = r_out.empty() ? r_dir + "/report" : r_out;
            const ReportResult res = run_report(r_dir, out);
            for (const auto& f : res.files_written) std::cout << "wrote " << f << "\n";
            return kExitOk;
        }
    } catch (const ValidationError& e) {
        std::cerr << "validation error(s):\n";
        for (const auto& msg : e.errors()) std::cerr << "  - " << msg << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitValidation;
}

} // namespace fluidsim
