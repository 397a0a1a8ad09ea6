#pragma once

// Orchestration behind the command-line tool: run configuration, the standard
// density battery, verification suites and their CSV reports.

#include "clt/density.hpp"
#include "clt/error.hpp"
#include "clt/semigroup.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace clt {

struct Check {
    std::string name;
    bool pass = false;
    double value = 0.0;
    double threshold = 0.0;
};

struct SuiteVerdict {
    std::vector<Check> checks;

    void add(std::string name, bool pass, double value, double threshold);
    void at_most(std::string name, double value, double threshold) { add(std::move(name), value <= threshold, value, threshold); }
    void at_least(std::string name, double value, double threshold) { add(std::move(name), value >= threshold, value, threshold); }
    void merge(const SuiteVerdict& other);
    bool overall() const;
};

/// "check,pass,value,threshold".
std::string summary_csv(const SuiteVerdict& verdict);

struct BatteryEntry {
    std::string name;
    DistributionSpec spec;
};

/// gaussian; standardized uniform; standardized mixture 0.5 N(-2,1) + 0.5 N(2,1);
/// standardized exponential. Non-smooth members are mollified by the grid policy.
std::vector<BatteryEntry> default_battery();

std::map<std::string, double> default_tolerances();

struct RunConfig {
    DistributionSpec distribution{Family::gaussian, {0.0, 1.0}, true, {}};
    int n_max = 8;
    GridPolicy grid{12.0, 4096, 0.01};
    std::size_t corr_points = 2048;  // grid for kernels and maximal correlation
    int corr_n_max = 5;
    std::map<std::string, double> tolerances = default_tolerances();
    double flow_t0 = 1e-3;
    double flow_ratio = 1.05;
    double flow_t_max = 40.0;
    double tail_tol = 1e-5;
    std::uint64_t seed = 20170321;
    std::size_t mc_samples = 1000000;
    int ace_bins = 256;
    std::filesystem::path output_dir = "clt-report";

    double tol(const std::string& name) const;
    FlowSchedule schedule() const;
    GridPolicy corr_policy() const { return {grid.k_spread, corr_points, grid.t_smooth}; }
};

/// One "key = value" setting; keys match the long flag names (dist, params,
/// n-max, grid-points, grid-span, t-smooth, seed, out, table, raw, corr-points,
/// corr-n-max, mc-samples, ace-bins, flow-t0, flow-ratio, flow-tmax, tail-tol,
/// tol.<name>). Throws ParseError.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);

/// Flat key = value file; '#' starts a comment.
void load_config_file(RunConfig& config, const std::filesystem::path& path);

/// Rejects out-of-range settings (ParseError, NonPositiveParameter, InvalidGrid, UnknownFamily).
void validate(const RunConfig& config);

/// Creates the directory and proves it writable (IoError otherwise).
void prepare_output_dir(const std::filesystem::path& dir);

struct RunResult {
    SuiteVerdict verdict;
    std::map<std::string, std::string> files;  // file name -> contents
};

/// Writes every file plus summary.csv, each atomically.
void write_outputs(const std::filesystem::path& dir, const RunResult& result);

RunResult run_functionals(const RunConfig& config);
RunResult run_maxcorr(const RunConfig& config, int m, int n);
RunResult run_debruijn(const RunConfig& config);
RunResult run_scorecheck(const RunConfig& config);
RunResult run_verify(const RunConfig& config);

/// Exit status for an error escaping a run: 2 for configuration problems, 3 otherwise.
int exit_code_for(ErrorCode code);

}  // namespace clt
