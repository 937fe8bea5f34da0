#include "fluidsim/report.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>

#include "json.hpp"

#include "fluidsim/error.hpp"
#include "fluidsim/io_util.hpp"

namespace fs = std::filesystem;

namespace fluidsim {

double lower_median(std::vector<double> values) {
    if (values.empty()) return -1.0;
    std::sort(values.begin(), values.end());
    return values[(values.size() - 1) / 2];
}

double time_to_threshold(const std::vector<std::pair<double, double>>& trace,
                         double threshold) {
    for (const auto& [t, acc] : trace)
        if (acc >= threshold) return t;
    return -1.0;
}

namespace {

struct TraceFile {
    std::string scheme;
    int seed = 0;
    std::vector<std::pair<double, double>> points;
};

std::vector<std::string> csv_rows(const std::string& text) {
    std::vector<std::string> rows;
    std::stringstream ss(text);
    std::string line;
    bool first = true;
    while (std::getline(ss, line)) {
        if (first) { // header
            first = false;
            continue;
        }
        if (!line.empty()) rows.push_back(line);
    }
    return rows;
}

std::string format_num(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

} // namespace

ReportResult run_report(const std::string& run_dir, const std::string& out_dir) {
    if (!fs::is_directory(run_dir))
        throw ValidationError("report: '" + run_dir + "' is not a directory");
    fs::create_directories(out_dir);

    ReportResult res;

    std::vector<TraceFile> traces;
    std::map<int, double> centralized; // seed -> accuracy
    std::vector<nlohmann::json> infer_summaries;
    std::vector<nlohmann::json> download_summaries;

    std::vector<fs::path> entries;
    for (const auto& e : fs::directory_iterator(run_dir)) entries.push_back(e.path());
    std::sort(entries.begin(), entries.end());

    for (const auto& path : entries) {
        const std::string name = path.filename().string();
        if (name.rfind("trace_", 0) == 0 && path.extension() == ".csv") {
            TraceFile tf;
            for (const auto& row : csv_rows(read_file(path.string()))) {
                const auto f = split_csv_line(row);
                if (f.size() != 4) continue;
                tf.scheme = f[0];
                tf.seed = std::stoi(f[1]);
                tf.points.push_back({std::stod(f[2]), std::stod(f[3])});
            }
            if (!tf.points.empty()) traces.push_back(std::move(tf));
        } else if (name.rfind("centralized_", 0) == 0 && path.extension() == ".csv") {
            for (const auto& row : csv_rows(read_file(path.string()))) {
                const auto f = split_csv_line(row);
                if (f.size() == 2) centralized[std::stoi(f[0])] = std::stod(f[1]);
            }
        } else if (name.rfind("summary_", 0) == 0 && path.extension() == ".json") {
            auto j = nlohmann::json::parse(read_file(path.string()), nullptr, false);
            if (j.is_discarded()) continue;
            if (j.contains("policy")) infer_summaries.push_back(j);
            else if (j.contains("hit_ratio_empirical")) download_summaries.push_back(j);
        }
    }

    // ---- learning tables ----
    if (!traces.empty()) {
        std::map<std::string, std::vector<double>> ttt;   // scheme -> per-seed time
        std::map<std::string, std::vector<double>> final_acc;
        std::string long_csv = "scheme,seed,t_s,test_accuracy\n";
        for (const auto& tf : traces) {
            auto cit = centralized.find(tf.seed);
            if (cit != centralized.end()) {
                const double thr = kThresholdFactor * cit->second;
                ttt[tf.scheme].push_back(time_to_threshold(tf.points, thr));
            }
            final_acc[tf.scheme].push_back(tf.points.back().second);
            for (const auto& [t, acc] : tf.points) {
                long_csv += tf.scheme + "," + std::to_string(tf.seed) + "," +
                            format_num(t) + "," + format_num(acc) + "\n";
            }
        }
        std::string summary = "scheme,n_seeds,median_time_to_threshold_s,median_final_accuracy\n";
        for (const auto& [scheme, times] : ttt) {
            LearningReportRow row;
            row.scheme = scheme;
            row.n_seeds = static_cast<int>(times.size());
            row.median_time_to_threshold = lower_median(times);
            row.median_final_accuracy = lower_median(final_acc[scheme]);
            res.learning.push_back(row);
            summary += scheme + "," + std::to_string(row.n_seeds) + "," +
                       format_num(row.median_time_to_threshold) + "," +
                       format_num(row.median_final_accuracy) + "\n";
        }
        const std::string f1 = out_dir + "/learning_summary.csv";
        const std::string f2 = out_dir + "/fig2_accuracy_vs_time.csv";
        write_file_atomic(f1, summary);
        write_file_atomic(f2, long_csv);
        res.files_written.push_back(f1);
        res.files_written.push_back(f2);
    }

    // ---- inference tables ----
    if (!infer_summaries.empty()) {
        std::map<std::string, std::vector<double>> completion, latency;
        std::string per_seed = "policy,seed,completion_rate,mean_latency_s,mean_accuracy\n";
        for (const auto& j : infer_summaries) {
            const std::string policy = j.value("policy", "?");
            completion[policy].push_back(j.value("completion_rate", 0.0));
            latency[policy].push_back(j.value("mean_latency_s", 0.0));
            per_seed += policy + "," + std::to_string(j.value("seed", 0)) + "," +
                        format_num(j.value("completion_rate", 0.0)) + "," +
                        format_num(j.value("mean_latency_s", 0.0)) + "," +
                        format_num(j.value("mean_accuracy", 0.0)) + "\n";
        }
        std::string fig3 = "policy,median_completion_rate,median_mean_latency_s\n";
        for (const auto& [policy, rates] : completion) {
            InferenceReportRow row;
            row.policy = policy;
            row.n_seeds = static_cast<int>(rates.size());
            row.median_completion_rate = lower_median(rates);
            row.median_mean_latency = lower_median(latency[policy]);
            res.inference.push_back(row);
            fig3 += policy + "," + format_num(row.median_completion_rate) + "," +
                    format_num(row.median_mean_latency) + "\n";
        }
        const std::string f1 = out_dir + "/inference_summary.csv";
        const std::string f2 = out_dir + "/fig3_completion_vs_policy.csv";
        write_file_atomic(f1, per_seed);
        write_file_atomic(f2, fig3);
        res.files_written.push_back(f1);
        res.files_written.push_back(f2);
    }

    // ---- download tables ----
    if (!download_summaries.empty()) {
        std::string per_seed =
            "seed,total,hit_ratio_empirical,mean_completion_s,makespan_ratio_vs_unicast\n";
        std::string fig4 = "seed,makespan_ratio_vs_unicast\n";
        for (const auto& j : download_summaries) {
            DownloadReportRow row;
            row.seed = j.value("seed", 0);
            row.hit_ratio_empirical = j.value("hit_ratio_empirical", 0.0);
            row.mean_completion = j.value("mean_completion_s", 0.0);
            row.makespan_ratio = j.value("makespan_ratio_vs_unicast", 1.0);
            res.download.push_back(row);
            per_seed += std::to_string(row.seed) + "," +
                        std::to_string(j.value("total", 0)) + "," +
                        format_num(row.hit_ratio_empirical) + "," +
                        format_num(row.mean_completion) + "," +
                        format_num(row.makespan_ratio) + "\n";
            fig4 += std::to_string(row.seed) + "," + format_num(row.makespan_ratio) + "\n";
        }
        const std::string f1 = out_dir + "/download_summary.csv";
        const std::string f2 = out_dir + "/fig4_makespan_ratio.csv";
        write_file_atomic(f1, per_seed);
        write_file_atomic(f2, fig4);
        res.files_written.push_back(f1);
        res.files_written.push_back(f2);
    }

    return res;
}

} // namespace fluidsim
