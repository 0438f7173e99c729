#pragma once

// Canned experiment drivers shared by the CLI and the test suite.
//
// Every driver is deterministic: the same config and seed produce
// byte-identical result files. Results land under an output root resolved
// from (in order) the explicit argument, the REAPSNAP_OUT environment
// variable, and ./results; per-run artifacts go to <out>/<mode>/<function>/
// and the flat tables to <out>/*.csv|json.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "reapsnap/analysis.hpp"
#include "reapsnap/disk_model.hpp"
#include "reapsnap/fault_engine.hpp"
#include "reapsnap/workload_gen.hpp"

namespace reapsnap {

struct ExperimentConfig {
    std::uint64_t num_pages = 65536;       // 256 MiB at 4 KiB pages
    std::uint32_t page_size = 4096;
    std::uint64_t content_seed = 1;
    std::uint64_t vmm_state_bytes = 3 * kMiB;
    std::uint32_t repeats = 3;
    std::uint64_t seed = 1;                // input seed of the recorded invocation
    std::vector<FunctionProfile> presets = default_presets();
    StorageModel storage = StorageModel::defaults();
    EngineParams params;

    void validate() const;

    // key=value file; `presets` and `calibration` name files resolved
    // relative to the config's directory.
    static ExperimentConfig from_file(const std::filesystem::path& path);
};

std::filesystem::path resolve_out_dir(const std::string& cli_value);

// ---- cold starts ---------------------------------------------------------------

struct FunctionColdstart {
    std::string function;
    RestoreReport record;                  // the recording invocation
    std::vector<RestoreReport> lazy;       // one per repeat
    std::vector<RestoreReport> prefetch;   // one per repeat, same input seeds
    PageTrace trace;
    std::uint64_t ws_bytes = 0;
};

struct ColdstartResult {
    std::vector<FunctionColdstart> functions;
    SuiteSummary summary;                  // built from per-repeat mean totals
};

ColdstartResult run_coldstart(const ExperimentConfig& config,
                              const std::vector<std::string>& functions,
                              const std::filesystem::path& out_dir);

// ---- restore-path steps ----------------------------------------------------------

// The restore path, one optimization at a time: serial demand faults, the
// monitor prefetching the same pages with parallel per-page reads, a single
// cache-warm contiguous read, and the cache-bypassing contiguous read.
struct OptStep {
    std::string label;
    RestoreReport report;
};

struct OptStepsResult {
    std::string function;
    std::vector<OptStep> steps;  // serial_lazy, parallel_prefetch, ws_cached, reap
};

OptStepsResult run_opt_steps(const ExperimentConfig& config,
                             const std::string& function,
                             const std::filesystem::path& out_dir);

// ---- concurrency sweep -----------------------------------------------------------

struct SweepPoint {
    std::uint32_t n = 0;
    double base_mean_us = 0.0;
    double base_max_us = 0.0;
    double reap_mean_us = 0.0;
    double reap_max_us = 0.0;
    double base_aggregate_mbps = 0.0;  // bytes read / makespan
    double reap_aggregate_mbps = 0.0;
};

struct SweepResult {
    std::string function;
    std::vector<SweepPoint> points;
};

SweepResult run_sweep(const ExperimentConfig& config, const std::string& function,
                      const std::vector<std::uint32_t>& counts,
                      const std::filesystem::path& out_dir);

std::vector<std::uint32_t> default_sweep_counts();

// ---- trace analysis --------------------------------------------------------------

struct FunctionAnalysis {
    std::string function;
    ContiguityStats layout_contiguity;   // planted stable set
    ContiguityStats trace_contiguity;    // first recorded trace
    ReuseStats reuse;                    // across `repeats` recorded invocations
    std::uint64_t footprint = 0;         // bytes in one recorded trace
};

FunctionAnalysis analyze_function(const ExperimentConfig& config,
                                  const std::string& function);

std::vector<FunctionAnalysis> run_analyze(const ExperimentConfig& config,
                                          const std::vector<std::string>& functions,
                                          const std::filesystem::path& out_dir);

}  // namespace reapsnap
