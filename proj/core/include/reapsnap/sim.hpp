#pragma once

// Deterministic virtual-time execution of restore timelines.
//
// A session's behavior is compiled into a linear plan of work items (local
// delays and storage reads); which pages fault never depends on timing, so
// plans can be laid out up front and replayed under any degree of
// concurrency. The executor advances a shared virtual clock over all plans:
//
//  - demand-fault reads share the fault-path curve: k concurrently faulting
//    sessions collectively extract fault_aggregate_mbps(k), split equally;
//  - bulk reads are served at min(solo rate, equal share of peak) with unused
//    share redistributed (max-min fairness), after the fault class has taken
//    its aggregate out of the peak budget;
//  - fixed-duration windows model read phases whose cost was computed in
//    closed form (e.g. a dispatch-bound parallel prefetch loop).
//
// Events are processed one at a time ordered by (virtual time, session id,
// submission order), so results are bit-stable for identical inputs.

#include <array>
#include <cstdint>
#include <vector>

#include "reapsnap/disk_model.hpp"

namespace reapsnap {

enum class ReadClass { Fault, Bulk };

enum class TimeBucket : int {
    LoadVmm = 0,
    Conn = 1,
    WsFetch = 2,
    WsInstall = 3,
    Fault = 4,
    Compute = 5,
};
inline constexpr int kNumBuckets = 6;

struct WorkItem {
    enum class Kind { Delay, Read, FixedRead };
    Kind kind = Kind::Delay;
    // Delay/FixedRead: duration in us. Read: request size in bytes.
    double amount = 0.0;
    ReadClass cls = ReadClass::Bulk;
    bool bypass = false;
    TimeBucket bucket = TimeBucket::Fault;
    // Guest-memory payload transfers; their wall time feeds the
    // effective-bandwidth figure.
    bool payload = false;

    static WorkItem delay(double us, TimeBucket bucket) {
        return {Kind::Delay, us, ReadClass::Bulk, false, bucket, false};
    }
    static WorkItem read(double bytes, ReadClass cls, bool bypass, TimeBucket bucket,
                         bool payload) {
        return {Kind::Read, bytes, cls, bypass, bucket, payload};
    }
    static WorkItem fixed_read(double us, TimeBucket bucket) {
        return {Kind::FixedRead, us, ReadClass::Bulk, false, bucket, true};
    }
};

struct SessionTiming {
    std::array<double, kNumBuckets> bucket_us{};
    double payload_busy_us = 0.0;
    double payload_bytes = 0.0;
    double finish_us = 0.0;

    double total_us() const {
        double t = 0.0;
        for (double b : bucket_us) t += b;
        return t;
    }
};

// Cost of one item with no competing sessions. Matches what the executor
// produces for a single-session plan.
double solo_item_us(const StorageModel& model, const WorkItem& item);

// Runs all plans concurrently from t = 0 on one shared device.
std::vector<SessionTiming> run_plans(const StorageModel& model,
                                     const std::vector<std::vector<WorkItem>>& plans);

}  // namespace reapsnap
