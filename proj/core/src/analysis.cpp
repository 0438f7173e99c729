#include "reapsnap/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

namespace reapsnap {

namespace {

std::string fixed3(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

std::string fixed4(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

double round3(double v) { return std::llround(v * 1000.0) / 1000.0; }
double round4(double v) { return std::llround(v * 10000.0) / 10000.0; }

nlohmann::ordered_json report_json(const std::string& function,
                                   const RestoreReport& r) {
    nlohmann::ordered_json j;
    j["function"] = function;
    j["mode"] = restore_mode_name(r.mode);
    j["total_us"] = round3(r.total_us);
    j["load_vmm_us"] = round3(r.load_vmm_us);
    j["conn_us"] = round3(r.conn_us);
    j["fetch_us"] = round3(r.fetch_us);
    j["install_us"] = round3(r.install_us);
    j["fault_us"] = round3(r.fault_us);
    j["compute_us"] = round3(r.compute_us);
    j["faults"] = r.faults;
    j["prefetched"] = r.prefetched;
    j["mispredicted"] = r.mispredicted;
    return j;
}

}  // namespace

ContiguityStats contiguity(std::vector<std::uint64_t> pages) {
    std::sort(pages.begin(), pages.end());
    pages.erase(std::unique(pages.begin(), pages.end()), pages.end());
    ContiguityStats s;
    s.pages = pages.size();
    if (pages.empty()) return s;
    s.runs = 1;
    std::uint64_t run = 1;
    s.max_run = 1;
    for (std::size_t i = 1; i < pages.size(); ++i) {
        if (pages[i] == pages[i - 1] + 1) {
            ++run;
        } else {
            ++s.runs;
            run = 1;
        }
        s.max_run = std::max(s.max_run, run);
    }
    s.mean_run = static_cast<double>(s.pages) / static_cast<double>(s.runs);
    return s;
}

ContiguityStats contiguity(const PageTrace& trace) {
    std::vector<std::uint64_t> pages;
    pages.reserve(trace.count());
    for (std::size_t i = 0; i < trace.count(); ++i) pages.push_back(trace.page_at(i));
    return contiguity(std::move(pages));
}

ReuseStats reuse(const std::vector<std::vector<std::uint64_t>>& page_sets) {
    ReuseStats s;
    s.invocations = page_sets.size();
    if (page_sets.empty()) return s;

    std::unordered_map<std::uint64_t, std::uint64_t> hits;
    double total_pages = 0.0;
    for (const auto& set : page_sets) {
        std::unordered_set<std::uint64_t> distinct(set.begin(), set.end());
        total_pages += static_cast<double>(distinct.size());
        for (std::uint64_t p : distinct) ++hits[p];
    }
    s.union_pages = hits.size();
    for (const auto& [page, n] : hits)
        if (n == page_sets.size()) ++s.stable_pages;
    s.mean_pages = total_pages / static_cast<double>(page_sets.size());
    if (s.mean_pages > 0.0)
        s.stable_fraction = static_cast<double>(s.stable_pages) / s.mean_pages;

    double unique_sum = 0.0;
    for (const auto& set : page_sets) {
        std::unordered_set<std::uint64_t> distinct(set.begin(), set.end());
        if (distinct.empty()) continue;
        std::uint64_t uniq = 0;
        for (std::uint64_t p : distinct)
            if (hits.at(p) != page_sets.size()) ++uniq;
        unique_sum += static_cast<double>(uniq) / static_cast<double>(distinct.size());
    }
    s.mean_unique_fraction = unique_sum / static_cast<double>(page_sets.size());
    return s;
}

ReuseStats reuse_of_traces(const std::vector<PageTrace>& traces) {
    std::vector<std::vector<std::uint64_t>> sets;
    sets.reserve(traces.size());
    for (const PageTrace& t : traces) {
        std::vector<std::uint64_t> pages;
        pages.reserve(t.count());
        for (std::size_t i = 0; i < t.count(); ++i) pages.push_back(t.page_at(i));
        sets.push_back(std::move(pages));
    }
    return reuse(sets);
}

std::uint64_t footprint_bytes(const PageTrace& trace) {
    return trace.count() * static_cast<std::uint64_t>(trace.page_size);
}

SpeedupRow speedup_row(const std::string& function, const RestoreReport& lazy,
                       const RestoreReport& record, const RestoreReport& prefetch) {
    if (lazy.mode != RestoreMode::LazyBaseline ||
        record.mode != RestoreMode::Record || prefetch.mode != RestoreMode::Prefetch)
        throw std::invalid_argument("speedup_row wants lazy, record and prefetch "
                                    "reports in that order");
    SpeedupRow r;
    r.function = function;
    r.lazy_us = lazy.total_us;
    r.record_us = record.total_us;
    r.prefetch_us = prefetch.total_us;
    if (prefetch.total_us > 0.0) r.speedup = lazy.total_us / prefetch.total_us;
    if (lazy.total_us > 0.0) r.record_overhead = record.total_us / lazy.total_us - 1.0;
    if (lazy.faults > 0)
        r.eliminated_fraction = 1.0 - static_cast<double>(prefetch.faults) /
                                          static_cast<double>(lazy.faults);
    return r;
}

SuiteSummary summarize_suite(std::vector<SpeedupRow> rows) {
    if (rows.empty()) throw std::invalid_argument("no speedup rows to summarize");
    SuiteSummary s;
    s.rows = std::move(rows);
    s.min_speedup = s.rows.front().speedup;
    for (const SpeedupRow& r : s.rows) {
        s.mean_speedup += r.speedup;
        s.mean_record_overhead += r.record_overhead;
        s.mean_eliminated_fraction += r.eliminated_fraction;
        s.min_speedup = std::min(s.min_speedup, r.speedup);
    }
    const double n = static_cast<double>(s.rows.size());
    s.mean_speedup /= n;
    s.mean_record_overhead /= n;
    s.mean_eliminated_fraction /= n;
    return s;
}

const char* const kReportCsvHeader =
    "function,mode,total_us,load_vmm_us,conn_us,fetch_us,install_us,fault_us,"
    "compute_us,faults,prefetched,mispredicted";

std::string reports_csv(const std::vector<ReportRow>& rows) {
    std::string out = kReportCsvHeader;
    out += '\n';
    for (const ReportRow& row : rows) {
        const RestoreReport& r = row.report;
        out += row.function;
        out += ',';
        out += restore_mode_name(r.mode);
        for (double v : {r.total_us, r.load_vmm_us, r.conn_us, r.fetch_us,
                         r.install_us, r.fault_us, r.compute_us}) {
            out += ',';
            out += fixed3(v);
        }
        for (std::uint64_t v : {r.faults, r.prefetched, r.mispredicted}) {
            out += ',';
            out += std::to_string(v);
        }
        out += '\n';
    }
    return out;
}

std::string reports_json(const std::vector<ReportRow>& rows) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const ReportRow& row : rows) arr.push_back(report_json(row.function, row.report));
    return arr.dump(2) + "\n";
}

std::string speedups_csv(const SuiteSummary& summary) {
    std::string out =
        "function,lazy_us,record_us,prefetch_us,speedup,record_overhead,"
        "eliminated_fraction\n";
    for (const SpeedupRow& r : summary.rows) {
        out += r.function;
        out += ',' + fixed3(r.lazy_us);
        out += ',' + fixed3(r.record_us);
        out += ',' + fixed3(r.prefetch_us);
        out += ',' + fixed4(r.speedup);
        out += ',' + fixed4(r.record_overhead);
        out += ',' + fixed4(r.eliminated_fraction);
        out += '\n';
    }
    return out;
}

std::string speedups_json(const SuiteSummary& summary) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const SpeedupRow& r : summary.rows) {
        nlohmann::ordered_json j;
        j["function"] = r.function;
        j["lazy_us"] = round3(r.lazy_us);
        j["record_us"] = round3(r.record_us);
        j["prefetch_us"] = round3(r.prefetch_us);
        j["speedup"] = round4(r.speedup);
        j["record_overhead"] = round4(r.record_overhead);
        j["eliminated_fraction"] = round4(r.eliminated_fraction);
        arr.push_back(std::move(j));
    }
    nlohmann::ordered_json j;
    j["functions"] = std::move(arr);
    j["mean_speedup"] = round4(summary.mean_speedup);
    j["min_speedup"] = round4(summary.min_speedup);
    j["mean_record_overhead"] = round4(summary.mean_record_overhead);
    j["mean_eliminated_fraction"] = round4(summary.mean_eliminated_fraction);
    return j.dump(2) + "\n";
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("mean of empty vector");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace reapsnap
