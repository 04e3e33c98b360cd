#pragma once

#include "cosm/core.hpp"
#include "cosm/preprocess.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cosm {

class EmptyInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct ExperimentPlan {
    std::filesystem::path input;
    std::vector<Method> methods{Method::CoSM, Method::StandardSVD};
    std::size_t runs = 100;
    /// Pose distribution. Its `seed` is ignored: run r draws from derive_seed(master_seed, r).
    TransformSampler sampler{};
    /// 0 is the clean case. Each fraction multiplies the record count.
    std::vector<double> outlier_fractions{0.0};
    std::optional<double> outlier_offset_std;
    std::vector<double> sigmas{100.0};
    int iterations = 50;
    std::uint64_t master_seed = 0;
    std::optional<double> voxel_leaf;
    bool mirror = true;
    /// Worker threads; 0 picks std::thread::hardware_concurrency().
    unsigned threads = 0;

    void validate() const;

    /// Contamination levels of 10, 25 and 50 %.
    static std::vector<double> outlier_sweep_preset() { return {0.10, 0.25, 0.50}; }
};

/// Reads a plan from JSON (when the text starts with '{') or `key = value` lines.
/// Keys: input, methods, runs, sampler (uniform|gaussian), angle_bound, trans_bound,
/// angle_std, trans_std, outliers (list or "sweep"), offset_std, sigmas, iterations,
/// seed, leaf, mirror, threads. Throws std::invalid_argument on unknown keys or bad values.
ExperimentPlan parse_plan(std::string_view text);

struct BenchmarkRecord {
    std::size_t run = 0;
    Method method = Method::CoSM;
    EulerPose pose;
    double outlier_fraction = 0.0;
    double sigma = 0.0;
    double final_rmse = 0.0;
    std::vector<double> rmse_trace;
    double rot_err_rad = 0.0;
    double trans_err = 0.0;
    std::size_t iterations = 0;
    double wall_ms = 0.0;
    std::string status = "ok";  ///< ok, degenerate or error: <message>
    double max_rotation_defect = 0.0;
};

/// Pose of run `run`, regenerated from the plan's sampler and master seed alone.
EulerPose pose_for_run(const ExperimentPlan& plan, std::size_t run);
std::uint64_t outlier_seed(std::uint64_t master_seed, std::size_t run, double fraction);

/// Reads and (optionally) voxel-filters plan.input, then runs the plan.
/// Throws pcd::InputUnreadable / pcd::PcdError on input problems.
std::vector<BenchmarkRecord> run_plan(const ExperimentPlan& plan);
/// Runs the plan against an already loaded target cloud (voxel_leaf still applies).
std::vector<BenchmarkRecord> run_plan(const ExperimentPlan& plan, const PointCloud& cloud);

struct GroupStats {
    Method method = Method::CoSM;
    double outlier_fraction = 0.0;
    double sigma = 0.0;
    std::size_t count = 0;
    double mean = 0.0;
    double median = 0.0;
    double p25 = 0.0;
    double p75 = 0.0;
};

/// How often CoSM's final RMSE was strictly below `other`'s on the same run.
struct WinRate {
    Method other = Method::StandardSVD;
    double outlier_fraction = 0.0;
    double sigma = 0.0;
    std::size_t wins = 0;
    std::size_t compared = 0;
    double rate = 0.0;
};

struct AggregateSummary {
    std::vector<GroupStats> groups;
    std::vector<WinRate> win_rates;
};

/// Percentile p in [0, 1] of sorted data, linear between order statistics.
double percentile_sorted(const std::vector<double>& sorted, double p);

/// Throws EmptyInput for no records.
AggregateSummary aggregate(const std::vector<BenchmarkRecord>& records);

enum class ExportFormat { Csv, Json };

inline constexpr std::string_view kCsvHeader =
    "run,method,sigma,outlier_fraction,roll,pitch,yaw,tx,ty,tz,final_rmse,rot_err_rad,trans_err,iters,wall_ms,status";

/// CSV (one row per record, floats at 17 significant digits) or JSON holding
/// records and summary. With `timing` false, wall_ms is written as 0.
/// Throws EmptyInput for no records.
std::string export_records(const std::vector<BenchmarkRecord>& records, const AggregateSummary& summary,
                           ExportFormat format, bool timing = true);

std::vector<BenchmarkRecord> parse_records_csv(std::string_view text);
std::vector<BenchmarkRecord> parse_records_json(std::string_view text);

/// Fixed-width table of the summary for terminals.
std::string format_summary(const AggregateSummary& summary);

}  // namespace cosm
