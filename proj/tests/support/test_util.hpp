#pragma once

// Shared helpers for the test binaries. The content/cost calculators here
// are written from the published definitions on purpose and must not call
// into the library: tests compare library output against them.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace testutil {

class TempDir {
public:
    TempDir() {
        std::string tmpl =
            (std::filesystem::temp_directory_path() / "reapsnap_test_XXXXXX").string();
        std::vector<char> buf(tmpl.begin(), tmpl.end());
        buf.push_back('\0');
        if (::mkdtemp(buf.data()) == nullptr)
            throw std::runtime_error("mkdtemp failed");
        path_ = buf.data();
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const {
        return path_ / name;
    }

private:
    std::filesystem::path path_;
};

// ---- independent page-content oracle ----------------------------------------

// splitmix64 finalizer, written out step by step.
inline std::uint64_t oracle_mix(std::uint64_t v) {
    v += 0x9e3779b97f4a7c15ull;
    std::uint64_t a = v ^ (v >> 30);
    a *= 0xbf58476d1ce4e5b9ull;
    std::uint64_t b = a ^ (a >> 27);
    b *= 0x94d049bb133111ebull;
    return b ^ (b >> 31);
}

// Byte `off` of page `page` under content seed `seed`. Pages are built from
// 8-byte little-endian lanes of mix(mix(seed ^ page * 0xd6e8feb86659fd93) ^ lane).
inline std::uint8_t oracle_page_byte(std::uint64_t seed, std::uint64_t page,
                                     std::uint64_t off) {
    const std::uint64_t lane = off / 8;
    const std::uint64_t word =
        oracle_mix(oracle_mix(seed ^ (page * 0xd6e8feb86659fd93ull)) ^ lane);
    return static_cast<std::uint8_t>(word >> (8 * (off % 8)));
}

inline std::vector<std::uint8_t> oracle_page(std::uint64_t seed, std::uint64_t page,
                                             std::uint32_t page_size) {
    std::vector<std::uint8_t> out(page_size);
    for (std::uint32_t i = 0; i < page_size; ++i)
        out[i] = oracle_page_byte(seed, page, i);
    return out;
}

inline std::uint64_t oracle_fnv(const std::vector<std::uint8_t>& bytes,
                                std::uint64_t state = 0xcbf29ce484222325ull) {
    for (std::uint8_t b : bytes) {
        state = (state ^ b) * 0x100000001b3ull;
    }
    return state;
}

// ---- brute-force contiguity ---------------------------------------------------

struct BruteRuns {
    std::uint64_t pages = 0;
    std::uint64_t runs = 0;
    std::uint64_t max_run = 0;
};

// Scans a presence bitmap linearly instead of sorting.
inline BruteRuns brute_runs(const std::vector<std::uint64_t>& pages) {
    BruteRuns r;
    if (pages.empty()) return r;
    std::uint64_t hi = 0;
    for (std::uint64_t p : pages) hi = p > hi ? p : hi;
    std::vector<bool> present(hi + 2, false);
    for (std::uint64_t p : pages) {
        if (!present[p]) ++r.pages;
        present[p] = true;
    }
    std::uint64_t cur = 0;
    for (std::uint64_t i = 0; i <= hi + 1; ++i) {
        if (present[i]) {
            ++cur;
        } else if (cur > 0) {
            ++r.runs;
            if (cur > r.max_run) r.max_run = cur;
            cur = 0;
        }
    }
    return r;
}

// ---- reference restore cost model ---------------------------------------------

// Closed-form expectation for a single session against the stock device
// table, kept deliberately naive: straight sums, no shared executor.
struct RefRates {
    double fault_mbps = 43.0;        // demand-fault path at concurrency 1
    double bulk_bypass_mbps = 533.0;
    double min_latency_us = 80.0;
    double peak = 850.0;
};

struct RefParams {
    double vmm_overhead_us = 45000.0;
    double forwarding_us = 25.0;
    double per_page_us = 1.0;
    double install_call_us = 5.0;
};

struct RefBreakdown {
    double load_vmm = 0.0;
    double conn = 0.0;
    double fetch = 0.0;
    double install = 0.0;
    double fault = 0.0;
    double compute = 0.0;
    std::uint64_t faults = 0;

    double total() const {
        return load_vmm + conn + fetch + install + fault + compute;
    }
};

inline double ref_read_us(double bytes, double mbps, double min_latency_us) {
    const double t = bytes / (mbps * 1048576.0) * 1e6;
    return t < min_latency_us ? min_latency_us : t;
}

// mode: 0 lazy, 1 record, 2 prefetch (bypass fetch).
// entries: (page, is_conn) pairs in order; prefetch_pages: the recorded set.
inline RefBreakdown ref_restore(
    int mode, std::uint32_t page_size, std::uint64_t vmm_bytes,
    const std::vector<std::pair<std::uint64_t, bool>>& entries,
    const std::vector<std::uint64_t>& prefetch_pages, double compute_us,
    const RefRates& rates, const RefParams& params) {
    RefBreakdown b;
    b.load_vmm = ref_read_us(static_cast<double>(vmm_bytes),
                             rates.bulk_bypass_mbps, rates.min_latency_us) +
                 params.vmm_overhead_us;

    std::vector<std::uint64_t> resident = prefetch_pages;
    if (mode == 2) {
        const double ws_bytes =
            static_cast<double>(prefetch_pages.size()) * page_size;
        b.fetch = ref_read_us(ws_bytes, rates.bulk_bypass_mbps, rates.min_latency_us);
        const BruteRuns runs = brute_runs(prefetch_pages);
        b.install = static_cast<double>(runs.runs) * params.install_call_us +
                    static_cast<double>(prefetch_pages.size()) * params.per_page_us;
    } else {
        resident.clear();
    }

    auto is_resident = [&resident](std::uint64_t page) {
        for (std::uint64_t p : resident)
            if (p == page) return true;
        return false;
    };

    const double fault_read =
        ref_read_us(page_size, rates.fault_mbps, rates.min_latency_us);
    // calibration fault on page 0
    double calib = fault_read + params.per_page_us;
    if (mode != 0) calib += params.forwarding_us;
    b.fault += calib;
    resident.push_back(0);

    for (const auto& [page, is_conn] : entries) {
        if (is_resident(page)) continue;
        double cost = fault_read + params.per_page_us;
        if (mode != 0) cost += params.forwarding_us;
        if (is_conn)
            b.conn += cost;
        else
            b.fault += cost;
        ++b.faults;
        resident.push_back(page);
    }
    b.compute = compute_us;
    return b;
}

}  // namespace testutil
