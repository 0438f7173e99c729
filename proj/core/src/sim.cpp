#include "reapsnap/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace reapsnap {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double mbps_to_bytes_per_us(double mbps) {
    return mbps * static_cast<double>(kMiB) / 1e6;
}

struct ActiveSession {
    const std::vector<WorkItem>* plan = nullptr;
    std::size_t next = 0;

    bool running = false;      // has a current item
    bool done = false;
    WorkItem item;
    double started_at = 0.0;
    double remaining_bytes = 0.0;  // Read only
    double min_done_at = 0.0;      // Read floor / Delay expiry
    double rate = 0.0;             // bytes/us, recomputed at every event

    SessionTiming timing;
};

}  // namespace

double solo_item_us(const StorageModel& model, const WorkItem& item) {
    switch (item.kind) {
        case WorkItem::Kind::Delay:
        case WorkItem::Kind::FixedRead:
            return item.amount;
        case WorkItem::Kind::Read: {
            auto bytes = static_cast<std::uint64_t>(item.amount);
            if (item.cls == ReadClass::Fault) return model.fault_read_us(bytes, 1);
            return model.service_read_us(bytes, 1, item.bypass);
        }
    }
    return 0.0;
}

std::vector<SessionTiming> run_plans(const StorageModel& model,
                                     const std::vector<std::vector<WorkItem>>& plans) {
    std::vector<ActiveSession> sess(plans.size());
    for (std::size_t i = 0; i < plans.size(); ++i) sess[i].plan = &plans[i];

    double now = 0.0;

    auto issue_next = [&](ActiveSession& s) {
        while (s.next < s.plan->size()) {
            s.item = (*s.plan)[s.next++];
            s.started_at = now;
            s.running = true;
            if (s.item.kind == WorkItem::Kind::Read) {
                s.remaining_bytes = s.item.amount;
                s.min_done_at = now + model.min_latency_us();
            } else {
                s.remaining_bytes = 0.0;
                s.min_done_at = now + s.item.amount;
            }
            return;
        }
        s.running = false;
        s.done = true;
        s.timing.finish_us = now;
    };

    auto complete_current = [&](ActiveSession& s) {
        double dt = now - s.started_at;
        s.timing.bucket_us[static_cast<int>(s.item.bucket)] += dt;
        if (s.item.payload) {
            s.timing.payload_busy_us += dt;
            if (s.item.kind == WorkItem::Kind::Read) {
                s.timing.payload_bytes += s.item.amount;
            }
        }
        issue_next(s);
    };

    auto recompute_rates = [&]() {
        std::uint32_t faulting = 0;
        for (const auto& s : sess) {
            if (s.running && s.item.kind == WorkItem::Kind::Read &&
                s.item.cls == ReadClass::Fault && s.remaining_bytes > 0.0) {
                ++faulting;
            }
        }
        double fault_rate_each = 0.0;
        double fault_total_mbps = 0.0;
        if (faulting > 0) {
            fault_total_mbps = model.fault_aggregate_mbps(faulting);
            fault_rate_each = mbps_to_bytes_per_us(fault_total_mbps / faulting);
        }

        // Max-min fair split of the remaining peak budget across bulk reads.
        struct BulkRef { ActiveSession* s; double solo_mbps; };
        std::vector<BulkRef> bulks;
        for (auto& s : sess) {
            if (s.running && s.item.kind == WorkItem::Kind::Read &&
                s.item.cls == ReadClass::Bulk && s.remaining_bytes > 0.0) {
                double solo = model.bulk_solo_mbps(
                    static_cast<std::uint64_t>(s.item.amount), s.item.bypass);
                bulks.push_back({&s, solo});
            }
        }
        std::sort(bulks.begin(), bulks.end(), [](const BulkRef& a, const BulkRef& b) {
            return a.solo_mbps < b.solo_mbps;
        });
        double budget = std::max(0.0, model.peak_mbps() - fault_total_mbps);
        std::size_t left = bulks.size();
        for (auto& b : bulks) {
            double share = budget / static_cast<double>(left);
            double granted = std::min(b.solo_mbps, share);
            b.s->rate = mbps_to_bytes_per_us(granted);
            budget -= granted;
            --left;
        }

        for (auto& s : sess) {
            if (s.running && s.item.kind == WorkItem::Kind::Read &&
                s.item.cls == ReadClass::Fault) {
                s.rate = fault_rate_each;
            }
        }
    };

    for (auto& s : sess) issue_next(s);

    for (;;) {
        bool anyone = false;
        for (const auto& s : sess) {
            if (!s.done) { anyone = true; break; }
        }
        if (!anyone) break;

        recompute_rates();

        // Earliest completion; ties resolved by session index.
        double best_t = kInf;
        std::size_t best_i = sess.size();
        for (std::size_t i = 0; i < sess.size(); ++i) {
            auto& s = sess[i];
            if (!s.running) continue;
            double t;
            if (s.item.kind == WorkItem::Kind::Read && s.remaining_bytes > 0.0) {
                t = (s.rate > 0.0) ? now + s.remaining_bytes / s.rate : kInf;
                t = std::max(t, s.min_done_at);
            } else {
                t = s.min_done_at;
            }
            if (t < best_t) {
                best_t = t;
                best_i = i;
            }
        }
        if (best_i == sess.size()) {
            throw std::logic_error("simulation stalled: no runnable event");
        }

        double dt = best_t - now;
        if (dt > 0.0) {
            for (auto& s : sess) {
                if (s.running && s.item.kind == WorkItem::Kind::Read &&
                    s.remaining_bytes > 0.0) {
                    s.remaining_bytes = std::max(0.0, s.remaining_bytes - s.rate * dt);
                }
            }
            now = best_t;
        }
        sess[best_i].remaining_bytes = 0.0;
        complete_current(sess[best_i]);
    }

    std::vector<SessionTiming> out;
    out.reserve(sess.size());
    for (auto& s : sess) out.push_back(s.timing);
    return out;
}

std::vector<double> shared_schedule(const StorageModel& model,
                                    const std::vector<ScheduledRead>& requests,
                                    SharePolicy policy) {
    if (policy != SharePolicy::EqualShare) {
        throw std::invalid_argument("unknown share policy");
    }
    std::vector<std::vector<WorkItem>> plans;
    plans.reserve(requests.size());
    for (const auto& r : requests) {
        plans.push_back({WorkItem::read(static_cast<double>(r.bytes), ReadClass::Bulk,
                                        r.bypass, TimeBucket::WsFetch, true)});
    }
    auto timings = run_plans(model, plans);
    std::vector<double> out;
    out.reserve(timings.size());
    for (const auto& t : timings) out.push_back(t.finish_us);
    return out;
}

}  // namespace reapsnap
