#pragma once

// Snapshot restore engine.
//
// A session boots a VM from a snapshot image in one of three modes:
//
//  - LazyBaseline: pages fault in on demand and are served straight from the
//    image by the kernel (no monitor round trip).
//  - Record: like the baseline, but every first touch is forwarded through
//    the monitor so it can be logged; finalize_record() turns the log into a
//    trace file plus a working-set file.
//  - Prefetch: a previously recorded working set is fetched in one bulk read
//    and installed before the workload runs; only pages outside the recorded
//    set fault, and those residual faults take the monitor path.
//
// Time is simulated against a StorageModel; nothing here sleeps. A session
// starts by loading VMM state (one bypass bulk read plus a fixed overhead)
// and, in prefetch mode, fetching and installing the working set. The first
// guest touch is a calibration fault on reserved page 0 that measures the
// base mapping cost; it is excluded from fault counters.
//
// Costs are split into buckets (vmm load, connection restore, working-set
// fetch, working-set install, fault service, compute) that add up exactly to
// the reported total.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "reapsnap/disk_model.hpp"
#include "reapsnap/sim.hpp"
#include "reapsnap/snapshot_store.hpp"
#include "reapsnap/workload_gen.hpp"

namespace reapsnap {

enum class RestoreMode { LazyBaseline, Record, Prefetch };

const char* restore_mode_name(RestoreMode mode);
RestoreMode parse_restore_mode(const std::string& name);

struct EngineParams {
    double vmm_fixed_overhead_us = 45000.0;
    double fault_forwarding_us = 25.0;   // monitor round trip per forwarded fault
    double per_page_install_us = 1.0;
    double install_call_us = 5.0;        // per contiguous region installed
    double resident_access_us = 0.0;

    void validate() const;
};

struct SessionOptions {
    // Materialize page bytes on install/fault so content can be checked.
    bool copy_page_content = false;
    // Fetch the working set with a cache-bypassing read (a cache-warm fetch
    // models re-restoring a snapshot whose file is still in the page cache).
    bool ws_fetch_bypass = true;
    // Fetch the working set as parallel per-page reads dispatched by the
    // monitor instead of one contiguous read.
    bool parallel_fetch = false;
    std::uint32_t parallel_width = 16;
};

struct RestoreReport {
    RestoreMode mode = RestoreMode::LazyBaseline;

    double total_us = 0.0;
    double load_vmm_us = 0.0;
    double conn_us = 0.0;
    double fetch_us = 0.0;
    double install_us = 0.0;
    double fault_us = 0.0;
    double compute_us = 0.0;

    std::uint64_t faults = 0;          // demand faults during replay
    std::uint64_t pages_touched = 0;   // distinct pages accessed by the workload
    std::uint64_t prefetched = 0;      // pages installed ahead of the workload
    std::uint64_t mispredicted = 0;    // prefetched but never touched
    std::uint64_t read_bytes = 0;      // everything pulled from storage

    // Payload bytes over the wall time spent moving them.
    double effective_read_bandwidth_mbps = 0.0;

    std::string to_json() const;
};

class RestoreSession {
public:
    // trace/ws are only meaningful in prefetch mode and must outlive the
    // session; ws may be omitted unless page content is being copied.
    RestoreSession(const SnapshotImage& image, RestoreMode mode,
                   const StorageModel& storage, EngineParams params = {},
                   SessionOptions options = {}, const PageTrace* trace = nullptr,
                   const WorkingSet* ws = nullptr);

    // Forces one fault on reserved page 0 to measure the base mapping cost.
    // Must happen before any access_page call and at most once.
    void calibrate_base();

    // Returns the access latency in microseconds and advances the clock.
    double access_page(std::uint64_t page, AccessKind kind,
                       Phase phase = Phase::Body);

    // Replays a whole invocation (requires a calibrated session) and closes
    // the session.
    RestoreReport run_invocation(const AccessSequence& seq);

    // Record mode, after run_invocation: the fault log as a trace plus its
    // working set.
    std::pair<PageTrace, WorkingSet> finalize_record();

    RestoreMode mode() const { return mode_; }
    double clock_us() const { return timing_.total_us(); }
    bool calibrated() const { return calibrated_; }
    bool finished() const { return finished_; }
    bool resident(std::uint64_t page) const;
    std::uint64_t fault_count() const { return faults_; }
    const std::vector<std::uint64_t>& fault_log() const { return fault_log_; }

    // Bytes a page holds after install/fault; null when the page was never
    // materialized (not touched, or content copying disabled).
    const std::vector<std::uint8_t>* private_page(std::uint64_t page) const;

private:
    struct PlanningTag {};
    RestoreSession(PlanningTag, const SnapshotImage& image, RestoreMode mode,
                   const StorageModel& storage, const EngineParams& params,
                   const SessionOptions& options, const PageTrace* trace,
                   const WorkingSet* ws);

    void start();
    void emit(const WorkItem& item);
    void touch(std::uint64_t page);
    void install_page(std::uint64_t page, const std::uint8_t* bytes);
    double fault_cost_items(std::uint64_t page, TimeBucket bucket, bool payload);
    void plan_invocation(const AccessSequence& seq);
    RestoreReport make_report(const SessionTiming& timing) const;

    friend std::vector<RestoreReport> run_concurrent(
        const SnapshotImage&, const StorageModel&, const EngineParams&,
        const SessionOptions&, const std::vector<struct ConcurrentSpec>&);

    const SnapshotImage* image_;
    const StorageModel* storage_;
    RestoreMode mode_;
    EngineParams params_;
    SessionOptions options_;
    const PageTrace* trace_;
    const WorkingSet* ws_;

    bool planning_ = false;
    std::vector<WorkItem> plan_;
    SessionTiming timing_;

    std::vector<bool> resident_;
    std::vector<bool> touched_;
    std::vector<bool> in_prefetch_set_;
    std::uint64_t touched_count_ = 0;
    std::uint64_t prefetched_used_ = 0;
    std::uint64_t faults_ = 0;
    std::uint64_t read_bytes_ = 0;
    double extra_payload_bytes_ = 0.0;
    std::vector<std::uint64_t> fault_log_;
    std::vector<std::vector<std::uint8_t>> private_pages_;  // empty unless copying
    bool calibrated_ = false;
    bool accessed_ = false;
    bool finished_ = false;
    bool finalized_ = false;
};

struct ConcurrentSpec {
    RestoreMode mode = RestoreMode::LazyBaseline;
    const AccessSequence* seq = nullptr;
    const PageTrace* trace = nullptr;  // prefetch mode
    const WorkingSet* ws = nullptr;    // optional content source
};

// Replays all specs against one image on one storage device, starting
// simultaneously at t = 0. Decisions (which pages fault) are timing-free, so
// each spec is compiled to a plan and the plans run under the shared-device
// executor; a single spec reproduces RestoreSession exactly.
std::vector<RestoreReport> run_concurrent(const SnapshotImage& image,
                                          const StorageModel& storage,
                                          const EngineParams& params,
                                          const SessionOptions& options,
                                          const std::vector<ConcurrentSpec>& specs);

}  // namespace reapsnap
