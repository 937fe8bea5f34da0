#pragma once

#include <map>
#include <string>
#include <vector>

namespace fluidsim {

inline constexpr double kThresholdFactor = 0.8; // of centralized accuracy

struct LearningReportRow {
    std::string scheme;
    int n_seeds = 0;
    double median_time_to_threshold = -1.0; // -1: never reached
    double median_final_accuracy = 0.0;
};

struct InferenceReportRow {
    std::string policy;
    int n_seeds = 0;
    double median_completion_rate = 0.0;
    double median_mean_latency = 0.0;
};

struct DownloadReportRow {
    int seed = 0;
    double hit_ratio_empirical = 0.0;
    double mean_completion = 0.0;
    double makespan_ratio = 0.0;
};

struct ReportResult {
    std::vector<LearningReportRow> learning;
    std::vector<InferenceReportRow> inference;
    std::vector<DownloadReportRow> download;
    std::vector<std::string> files_written;
};

/// Lower median: sorted[(n-1)/2]. Exact middle for odd n; avoids averaging
/// with unreachable (-1) sentinels for even n.
double lower_median(std::vector<double> values);

/// First trace time at which accuracy reaches the threshold; -1 if never.
double time_to_threshold(const std::vector<std::pair<double, double>>& trace,
                         double threshold);

/// Aggregates the outputs of `simulate` runs found in `run_dir` into summary
/// tables and plot-ready long CSVs under `out_dir`.
ReportResult run_report(const std::string& run_dir, const std::string& out_dir);

} // namespace fluidsim
