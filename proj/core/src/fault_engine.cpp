#include "reapsnap/fault_engine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"

#include "reapsnap/common.hpp"
#include "reapsnap/errors.hpp"

namespace reapsnap {

namespace {

constexpr std::uint64_t kCalibrationPage = 0;

double round3(double v) { return std::llround(v * 1000.0) / 1000.0; }

// Maximal runs of adjacent pages over the set (order-insensitive).
std::uint64_t region_count(const PageTrace& trace) {
    if (trace.offsets.empty()) return 0;
    std::vector<std::uint64_t> pages;
    pages.reserve(trace.count());
    for (std::size_t i = 0; i < trace.count(); ++i) pages.push_back(trace.page_at(i));
    std::sort(pages.begin(), pages.end());
    std::uint64_t regions = 1;
    for (std::size_t i = 1; i < pages.size(); ++i)
        if (pages[i] != pages[i - 1] + 1) ++regions;
    return regions;
}

}  // namespace

const char* restore_mode_name(RestoreMode mode) {
    switch (mode) {
        case RestoreMode::LazyBaseline: return "lazy";
        case RestoreMode::Record: return "record";
        case RestoreMode::Prefetch: return "prefetch";
    }
    return "?";
}

RestoreMode parse_restore_mode(const std::string& name) {
    if (name == "lazy") return RestoreMode::LazyBaseline;
    if (name == "record") return RestoreMode::Record;
    if (name == "prefetch") return RestoreMode::Prefetch;
    throw std::invalid_argument("unknown restore mode '" + name +
                                "' (expected lazy, record or prefetch)");
}

void EngineParams::validate() const {
    if (!(vmm_fixed_overhead_us >= 0.0) || !(fault_forwarding_us >= 0.0) ||
        !(per_page_install_us >= 0.0) || !(install_call_us >= 0.0) ||
        !(resident_access_us >= 0.0))
        throw std::invalid_argument("engine cost parameters must be non-negative");
}

std::string RestoreReport::to_json() const {
    nlohmann::ordered_json j;
    j["mode"] = restore_mode_name(mode);
    j["total_us"] = round3(total_us);
    j["load_vmm_us"] = round3(load_vmm_us);
    j["conn_us"] = round3(conn_us);
    j["fetch_us"] = round3(fetch_us);
    j["install_us"] = round3(install_us);
    j["fault_us"] = round3(fault_us);
    j["compute_us"] = round3(compute_us);
    j["faults"] = faults;
    j["pages_touched"] = pages_touched;
    j["prefetched"] = prefetched;
    j["mispredicted"] = mispredicted;
    j["read_bytes"] = read_bytes;
    j["effective_read_bandwidth_mbps"] = round3(effective_read_bandwidth_mbps);
    return j.dump(2) + "\n";
}

RestoreSession::RestoreSession(const SnapshotImage& image, RestoreMode mode,
                               const StorageModel& storage, EngineParams params,
                               SessionOptions options, const PageTrace* trace,
                               const WorkingSet* ws)
    : image_(&image),
      storage_(&storage),
      mode_(mode),
      params_(params),
      options_(options),
      trace_(trace),
      ws_(ws) {
    start();
}

RestoreSession::RestoreSession(PlanningTag, const SnapshotImage& image,
                               RestoreMode mode, const StorageModel& storage,
                               const EngineParams& params,
                               const SessionOptions& options, const PageTrace* trace,
                               const WorkingSet* ws)
    : image_(&image),
      storage_(&storage),
      mode_(mode),
      params_(params),
      options_(options),
      trace_(trace),
      ws_(ws),
      planning_(true) {
    start();
}

void RestoreSession::start() {
    params_.validate();
    if (mode_ == RestoreMode::Prefetch) {
        if (trace_ == nullptr)
            throw std::invalid_argument("prefetch mode needs a recorded trace");
        trace_->validate();
        if (trace_->page_size != image_->page_size())
            throw FormatError(FormatIssue::BadPageSize,
                              "trace page size " + std::to_string(trace_->page_size) +
                                  " does not match image page size " +
                                  std::to_string(image_->page_size()));
        if (!trace_->image_id.empty() && trace_->image_id != image_->id())
            throw std::invalid_argument("trace was recorded from image " +
                                        trace_->image_id + ", restoring " +
                                        image_->id());
        for (std::uint64_t off : trace_->offsets)
            if (off / trace_->page_size >= image_->num_pages())
                throw FormatError(FormatIssue::OffsetOutOfRange,
                                  "trace offset " + std::to_string(off) +
                                      " lies beyond the image");
        if (ws_ != nullptr) {
            if (ws_->trace.page_size != trace_->page_size ||
                (!ws_->trace.offsets.empty() && ws_->trace.offsets != trace_->offsets))
                throw std::invalid_argument(
                    "working set does not belong to the prefetch trace");
            if (ws_->pages.size() !=
                trace_->count() * static_cast<std::size_t>(trace_->page_size))
                throw std::invalid_argument("working set holds " +
                                            std::to_string(ws_->pages.size()) +
                                            " bytes, trace wants " +
                                            std::to_string(trace_->count() *
                                                           trace_->page_size));
        } else if (options_.copy_page_content) {
            throw std::invalid_argument(
                "copying page content needs the working-set bytes");
        }
    } else if (trace_ != nullptr || ws_ != nullptr) {
        throw std::invalid_argument(
            "trace/working set are only accepted in prefetch mode");
    }

    resident_.assign(image_->num_pages(), false);
    touched_.assign(image_->num_pages(), false);
    in_prefetch_set_.assign(image_->num_pages(), false);
    if (options_.copy_page_content) private_pages_.resize(image_->num_pages());

    emit(WorkItem::read(static_cast<double>(image_->vmm_state_len()), ReadClass::Bulk,
                        true, TimeBucket::LoadVmm, false));
    emit(WorkItem::delay(params_.vmm_fixed_overhead_us, TimeBucket::LoadVmm));
    read_bytes_ += image_->vmm_state_len();

    if (mode_ != RestoreMode::Prefetch) return;

    const std::uint64_t ws_bytes =
        trace_->count() * static_cast<std::uint64_t>(trace_->page_size);
    if (options_.parallel_fetch) {
        if (trace_->count() > 0) {
            const double agg =
                storage_->throughput_mbps(trace_->page_size, options_.parallel_width,
                                          false);
            double window =
                std::max(static_cast<double>(trace_->count()) *
                             params_.fault_forwarding_us,
                         us_for_bytes(static_cast<double>(ws_bytes), agg));
            window += storage_->service_read_us(trace_->page_size,
                                                options_.parallel_width, false);
            emit(WorkItem::fixed_read(window, TimeBucket::WsFetch));
            extra_payload_bytes_ += static_cast<double>(ws_bytes);
            emit(WorkItem::delay(static_cast<double>(trace_->count()) *
                                     (params_.install_call_us +
                                      params_.per_page_install_us),
                                 TimeBucket::WsInstall));
        }
    } else {
        emit(WorkItem::read(static_cast<double>(ws_bytes), ReadClass::Bulk,
                            options_.ws_fetch_bypass, TimeBucket::WsFetch, true));
        const double install =
            static_cast<double>(region_count(*trace_)) * params_.install_call_us +
            static_cast<double>(trace_->count()) * params_.per_page_install_us;
        if (install > 0.0) emit(WorkItem::delay(install, TimeBucket::WsInstall));
    }
    read_bytes_ += ws_bytes;

    for (std::size_t i = 0; i < trace_->count(); ++i) {
        const std::uint64_t page = trace_->page_at(i);
        resident_[page] = true;
        in_prefetch_set_[page] = true;
        if (options_.copy_page_content)
            install_page(page, ws_->pages.data() + i * trace_->page_size);
    }
}

void RestoreSession::emit(const WorkItem& item) {
    if (planning_) {
        plan_.push_back(item);
        return;
    }
    const double d = solo_item_us(*storage_, item);
    timing_.bucket_us[static_cast<int>(item.bucket)] += d;
    timing_.finish_us += d;
    if (item.payload) {
        timing_.payload_busy_us += d;
        if (item.kind == WorkItem::Kind::Read) timing_.payload_bytes += item.amount;
    }
}

void RestoreSession::touch(std::uint64_t page) {
    if (touched_[page]) return;
    touched_[page] = true;
    ++touched_count_;
    if (in_prefetch_set_[page]) ++prefetched_used_;
}

void RestoreSession::install_page(std::uint64_t page, const std::uint8_t* bytes) {
    private_pages_[page].assign(bytes, bytes + image_->page_size());
}

double RestoreSession::fault_cost_items(std::uint64_t page, TimeBucket bucket,
                                        bool payload) {
    double cost = 0.0;
    if (mode_ != RestoreMode::LazyBaseline) {
        emit(WorkItem::delay(params_.fault_forwarding_us, bucket));
        cost += params_.fault_forwarding_us;
    }
    WorkItem read = WorkItem::read(static_cast<double>(image_->page_size()),
                                   ReadClass::Fault, false, bucket, payload);
    emit(read);
    cost += solo_item_us(*storage_, read);
    emit(WorkItem::delay(params_.per_page_install_us, bucket));
    cost += params_.per_page_install_us;

    read_bytes_ += image_->page_size();
    resident_[page] = true;
    if (options_.copy_page_content) {
        std::vector<std::uint8_t> buf(image_->page_size());
        image_->read_page(page, buf.data());
        install_page(page, buf.data());
    }
    return cost;
}

void RestoreSession::calibrate_base() {
    if (finished_) throw std::logic_error("session already finished");
    if (calibrated_) throw std::logic_error("base mapping already calibrated");
    if (accessed_)
        throw std::logic_error("calibration must precede workload accesses");
    fault_cost_items(kCalibrationPage, TimeBucket::Fault,
                     mode_ != RestoreMode::Prefetch);
    calibrated_ = true;
}

double RestoreSession::access_page(std::uint64_t page, AccessKind kind, Phase phase) {
    (void)kind;  // writes cost the same as reads: first touch copies the page
    if (finished_) throw std::logic_error("session already finished");
    if (page == kCalibrationPage)
        throw std::invalid_argument("page 0 is reserved for calibration");
    if (page >= image_->num_pages())
        throw std::invalid_argument("page " + std::to_string(page) +
                                    " out of range (" +
                                    std::to_string(image_->num_pages()) + " pages)");
    accessed_ = true;
    touch(page);

    if (resident_[page]) {
        if (params_.resident_access_us > 0.0)
            emit(WorkItem::delay(params_.resident_access_us,
                                 phase == Phase::Conn ? TimeBucket::Conn
                                                      : TimeBucket::Compute));
        return params_.resident_access_us;
    }

    ++faults_;
    fault_log_.push_back(page);
    const TimeBucket bucket =
        phase == Phase::Conn ? TimeBucket::Conn : TimeBucket::Fault;
    return fault_cost_items(page, bucket, mode_ != RestoreMode::Prefetch);
}

void RestoreSession::plan_invocation(const AccessSequence& seq) {
    if (finished_) throw std::logic_error("session already finished");
    if (!calibrated_)
        throw std::logic_error("run_invocation needs a calibrated session");
    seq.validate(image_->num_pages());
    for (const AccessEntry& e : seq.entries) access_page(e.page, e.kind, e.phase);
    if (seq.compute_us > 0)
        emit(WorkItem::delay(static_cast<double>(seq.compute_us),
                             TimeBucket::Compute));
    finished_ = true;
}

RestoreReport RestoreSession::run_invocation(const AccessSequence& seq) {
    if (planning_)
        throw std::logic_error("planning sessions are driven by run_concurrent");
    plan_invocation(seq);
    return make_report(timing_);
}

RestoreReport RestoreSession::make_report(const SessionTiming& timing) const {
    RestoreReport r;
    r.mode = mode_;
    r.load_vmm_us = timing.bucket_us[static_cast<int>(TimeBucket::LoadVmm)];
    r.conn_us = timing.bucket_us[static_cast<int>(TimeBucket::Conn)];
    r.fetch_us = timing.bucket_us[static_cast<int>(TimeBucket::WsFetch)];
    r.install_us = timing.bucket_us[static_cast<int>(TimeBucket::WsInstall)];
    r.fault_us = timing.bucket_us[static_cast<int>(TimeBucket::Fault)];
    r.compute_us = timing.bucket_us[static_cast<int>(TimeBucket::Compute)];
    r.total_us = timing.total_us();
    r.faults = faults_;
    r.pages_touched = touched_count_;
    r.prefetched = trace_ != nullptr ? trace_->count() : 0;
    r.mispredicted = r.prefetched - prefetched_used_;
    r.read_bytes = read_bytes_;
    const double payload_bytes = timing.payload_bytes + extra_payload_bytes_;
    r.effective_read_bandwidth_mbps =
        timing.payload_busy_us > 0.0 ? mbps_for(payload_bytes, timing.payload_busy_us)
                                     : 0.0;
    return r;
}

std::pair<PageTrace, WorkingSet> RestoreSession::finalize_record() {
    if (mode_ != RestoreMode::Record)
        throw std::logic_error("finalize_record needs a record-mode session");
    if (!finished_)
        throw std::logic_error("finalize_record before the invocation finished");
    if (finalized_) throw std::logic_error("record already finalized");
    finalized_ = true;
    PageTrace trace =
        PageTrace::from_pages(fault_log_, image_->page_size(), image_->id());
    WorkingSet ws = build_working_set(*image_, trace);
    return {std::move(trace), std::move(ws)};
}

bool RestoreSession::resident(std::uint64_t page) const {
    if (page >= image_->num_pages())
        throw std::invalid_argument("page " + std::to_string(page) + " out of range");
    return resident_[page];
}

const std::vector<std::uint8_t>* RestoreSession::private_page(
    std::uint64_t page) const {
    if (page >= image_->num_pages())
        throw std::invalid_argument("page " + std::to_string(page) + " out of range");
    if (!options_.copy_page_content || private_pages_[page].empty()) return nullptr;
    return &private_pages_[page];
}

std::vector<RestoreReport> run_concurrent(const SnapshotImage& image,
                                          const StorageModel& storage,
                                          const EngineParams& params,
                                          const SessionOptions& options,
                                          const std::vector<ConcurrentSpec>& specs) {
    std::vector<std::unique_ptr<RestoreSession>> sessions;
    sessions.reserve(specs.size());
    std::vector<std::vector<WorkItem>> plans;
    plans.reserve(specs.size());
    for (const ConcurrentSpec& spec : specs) {
        if (spec.seq == nullptr)
            throw std::invalid_argument("concurrent spec without an access sequence");
        std::unique_ptr<RestoreSession> s(
            new RestoreSession(RestoreSession::PlanningTag{}, image, spec.mode,
                               storage, params, options, spec.trace, spec.ws));
        s->calibrate_base();
        s->plan_invocation(*spec.seq);
        plans.push_back(std::move(s->plan_));
        sessions.push_back(std::move(s));
    }
    const std::vector<SessionTiming> timings = run_plans(storage, plans);
    std::vector<RestoreReport> reports;
    reports.reserve(specs.size());
    for (std::size_t i = 0; i < specs.size(); ++i)
        reports.push_back(sessions[i]->make_report(timings[i]));
    return reports;
}

}  // namespace reapsnap
