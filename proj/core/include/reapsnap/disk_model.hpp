#pragma once

// Calibrated storage model.
//
// The model is parameterized by measured throughput points
// (request size, concurrency, cache bypass) -> aggregate MiB/s, a device peak,
// and a minimum request latency. Between calibration points, throughput is
// interpolated linearly in log2(concurrency) and log2(request size), clamped
// at the table edges and capped at the peak; aggregate throughput is
// non-decreasing in concurrency whenever the table is (enforced at load).
//
// Demand faults behave measurably worse than an fio-style benchmark issuing
// the same request sizes: page-fault streams pay handler and wakeup overheads
// that show up as a lower effective rate. The model therefore carries a
// separate fault-path curve (concurrent faulting sessions -> aggregate MiB/s)
// used for one-page-at-a-time demand reads, calibrated independently of the
// fio table.
//
// Calibration file: one `size_bytes,concurrency,bypass,MBps` line per table
// point, optional `fault,<concurrency>,<MBps>` lines for the fault-path
// curve, plus `peak=<MBps>` and `min_latency_us=<n>`.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "reapsnap/common.hpp"

namespace reapsnap {

struct CalibrationPoint {
    std::uint64_t size_bytes = 0;
    std::uint32_t concurrency = 1;
    bool bypass = false;
    double mbps = 0.0;
};

class StorageModel {
public:
    // The shipped calibration: 4 KiB singles at 32 MiB/s, 16-deep 4 KiB at
    // 360 MiB/s, bulk reads at 275 (cached copy) / 533 (bypass) MiB/s,
    // 850 MiB/s peak, 80 us minimum request latency, and a demand-fault curve
    // of 43 MiB/s for one faulting session falling to 81 MiB/s aggregate at 64.
    static StorageModel defaults();

    static StorageModel from_points(std::vector<CalibrationPoint> points,
                                    double peak_mbps, double min_latency_us,
                                    std::vector<std::pair<std::uint32_t, double>>
                                        fault_curve = {});

    static StorageModel load_file(const std::filesystem::path& path);
    void save_file(const std::filesystem::path& path) const;

    static StorageModel parse(const std::string& text, const std::string& origin);
    std::string serialize() const;

    double peak_mbps() const { return peak_mbps_; }
    double min_latency_us() const { return min_latency_us_; }
    const std::vector<CalibrationPoint>& points() const { return points_; }
    const std::vector<std::pair<std::uint32_t, double>>& fault_curve() const {
        return fault_curve_;
    }

    // Aggregate MiB/s the device sustains for `concurrency` simultaneous
    // requests of `size` bytes each.
    double throughput_mbps(std::uint64_t size, std::uint32_t concurrency,
                           bool bypass) const;

    // Duration of one request among `concurrency` equals (each request is
    // served at aggregate/concurrency), floored at the minimum latency.
    double service_read_us(std::uint64_t bytes, std::uint32_t concurrency,
                           bool bypass) const;

    // Demand-fault path: aggregate MiB/s across k concurrently faulting
    // sessions, and the duration of one page read among them.
    double fault_aggregate_mbps(std::uint32_t k) const;
    double fault_read_us(std::uint64_t bytes, std::uint32_t k) const;

    // Solo rate for a large sequential read (used for VMM state restore and
    // as the per-request ceiling under shared scheduling).
    double bulk_solo_mbps(std::uint64_t bytes, bool bypass) const;

private:
    std::vector<CalibrationPoint> points_;
    std::vector<std::pair<std::uint32_t, double>> fault_curve_;
    double peak_mbps_ = 0.0;
    double min_latency_us_ = 0.0;

    void validate() const;
};

// ---- shared scheduling -------------------------------------------------------

enum class SharePolicy { EqualShare };

struct ScheduledRead {
    int session = 0;
    std::uint64_t bytes = 0;
    bool bypass = false;
};

// All requests start at t=0 and share the device: each proceeds at
// min(its solo rate, equal share of the peak), with unused share
// redistributed. Returns per-request completion times in microseconds, in
// input order. Deterministic.
std::vector<double> shared_schedule(const StorageModel& model,
                                    const std::vector<ScheduledRead>& requests,
                                    SharePolicy policy = SharePolicy::EqualShare);

// ---- real-device measurement harness ----------------------------------------

enum class DiskPattern { Serial4K, Parallel4K, Bulk, BulkBypass };

struct DiskMeasurement {
    DiskPattern pattern;
    double mbps = 0.0;
    std::uint64_t bytes_read = 0;
    double seconds = 0.0;
};

// Runs the named access pattern against an existing scratch file (>= 64 MiB)
// and reports the achieved rate. Throws std::runtime_error with an explicit
// "unsupported" message when the platform or filesystem cannot honor the
// pattern (e.g. no O_DIRECT); it never silently falls back. Results are
// reported only -- they are never fed back into a simulation automatically.
DiskMeasurement measure_real(const std::filesystem::path& file, DiskPattern pattern,
                             unsigned parallelism = 16);

const char* disk_pattern_name(DiskPattern pattern);

}  // namespace reapsnap
