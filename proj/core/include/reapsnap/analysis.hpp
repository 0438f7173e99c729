#pragma once

// Trace statistics and result tables.

#include <cstdint>
#include <string>
#include <vector>

#include "reapsnap/fault_engine.hpp"
#include "reapsnap/snapshot_store.hpp"

namespace reapsnap {

// Maximal runs of adjacent pages in the set (order does not matter;
// duplicates collapse).
struct ContiguityStats {
    std::uint64_t pages = 0;
    std::uint64_t runs = 0;
    std::uint64_t max_run = 0;
    double mean_run = 0.0;
};

ContiguityStats contiguity(std::vector<std::uint64_t> pages);
ContiguityStats contiguity(const PageTrace& trace);

// How much of a function's footprint repeats across invocations.
struct ReuseStats {
    std::uint64_t invocations = 0;
    std::uint64_t stable_pages = 0;  // touched by every invocation
    std::uint64_t union_pages = 0;
    double mean_pages = 0.0;
    double stable_fraction = 0.0;        // stable / mean pages
    double mean_unique_fraction = 0.0;   // mean of (pages - stable) / pages
};

ReuseStats reuse(const std::vector<std::vector<std::uint64_t>>& page_sets);
ReuseStats reuse_of_traces(const std::vector<PageTrace>& traces);

std::uint64_t footprint_bytes(const PageTrace& trace);

// One function's lazy/record/prefetch comparison.
struct SpeedupRow {
    std::string function;
    double lazy_us = 0.0;
    double record_us = 0.0;
    double prefetch_us = 0.0;
    double speedup = 0.0;               // lazy / prefetch
    double record_overhead = 0.0;       // record / lazy - 1
    double eliminated_fraction = 0.0;   // 1 - prefetch faults / lazy faults
};

SpeedupRow speedup_row(const std::string& function, const RestoreReport& lazy,
                       const RestoreReport& record, const RestoreReport& prefetch);

struct SuiteSummary {
    std::vector<SpeedupRow> rows;
    double mean_speedup = 0.0;
    double min_speedup = 0.0;
    double mean_record_overhead = 0.0;
    double mean_eliminated_fraction = 0.0;
};

SuiteSummary summarize_suite(std::vector<SpeedupRow> rows);

// ---- tables ------------------------------------------------------------------

struct ReportRow {
    std::string function;
    RestoreReport report;
};

// Column order is part of the format:
// function,mode,total_us,load_vmm_us,conn_us,fetch_us,install_us,fault_us,
// compute_us,faults,prefetched,mispredicted
extern const char* const kReportCsvHeader;

std::string reports_csv(const std::vector<ReportRow>& rows);
std::string reports_json(const std::vector<ReportRow>& rows);

std::string speedups_csv(const SuiteSummary& summary);
std::string speedups_json(const SuiteSummary& summary);

double mean_of(const std::vector<double>& v);

}  // namespace reapsnap
