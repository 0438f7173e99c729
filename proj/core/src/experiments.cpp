#include "reapsnap/experiments.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "reapsnap/common.hpp"
#include "reapsnap/errors.hpp"

namespace reapsnap {

namespace {

double round3(double v) { return std::llround(v * 1000.0) / 1000.0; }

std::string fixed3(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(FormatIssue::IoError, "cannot open " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out.flush())
        throw FormatError(FormatIssue::IoError, "short write to " + path.string());
}

std::uint64_t parse_u64_value(const std::string& s, const std::string& where) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
        throw FormatError(FormatIssue::BadField,
                          where + ": expected unsigned integer, got '" + s + "'");
    errno = 0;
    char* end = nullptr;
    unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (errno == ERANGE || end != s.c_str() + s.size())
        throw FormatError(FormatIssue::BadField, where + ": value out of range");
    return v;
}

struct Recorded {
    FunctionProfile profile;
    Layout layout;
    AccessSequence seq;
    RestoreReport report;
    PageTrace trace;
    WorkingSet ws;
};

Recorded record_function(const ExperimentConfig& config, const SnapshotImage& image,
                         const std::string& function) {
    Recorded rec;
    rec.profile = find_preset(config.presets, function);
    rec.layout = synthesize_layout(rec.profile, config.num_pages);
    rec.seq = derive_invocation(rec.profile, rec.layout, config.seed);
    RestoreSession session(image, RestoreMode::Record, config.storage, config.params);
    session.calibrate_base();
    rec.report = session.run_invocation(rec.seq);
    auto [trace, ws] = session.finalize_record();
    rec.trace = std::move(trace);
    rec.ws = std::move(ws);
    return rec;
}

RestoreReport with_mean_total(const std::vector<RestoreReport>& reports) {
    RestoreReport mean = reports.front();
    double total = 0.0;
    for (const RestoreReport& r : reports) total += r.total_us;
    mean.total_us = total / static_cast<double>(reports.size());
    return mean;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (num_pages < 2) throw std::invalid_argument("num_pages must be at least 2");
    if (!valid_page_size(page_size))
        throw std::invalid_argument("page_size must be a power of two >= 512");
    if (repeats == 0) throw std::invalid_argument("repeats must be positive");
    if (presets.empty()) throw std::invalid_argument("no function presets");
    params.validate();
}

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(FormatIssue::IoError, "cannot open " + path.string());
    ExperimentConfig config;
    const std::filesystem::path base = path.parent_path();
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos || line[start] == '#') continue;
        const std::string where = path.string() + ":" + std::to_string(lineno);
        std::size_t eq = line.find('=', start);
        if (eq == std::string::npos)
            throw FormatError(FormatIssue::BadField, where + ": expected key=value");
        std::string key = line.substr(start, eq - start);
        std::string value = line.substr(eq + 1);
        while (!key.empty() && std::isspace(static_cast<unsigned char>(key.back())))
            key.pop_back();
        std::size_t vs = value.find_first_not_of(" \t");
        value = vs == std::string::npos ? std::string() : value.substr(vs);
        while (!value.empty() &&
               std::isspace(static_cast<unsigned char>(value.back())))
            value.pop_back();

        if (key == "num_pages") {
            config.num_pages = parse_u64_value(value, where);
        } else if (key == "page_size") {
            config.page_size =
                static_cast<std::uint32_t>(parse_u64_value(value, where));
        } else if (key == "content_seed") {
            config.content_seed = parse_u64_value(value, where);
        } else if (key == "vmm_state_bytes") {
            config.vmm_state_bytes = parse_u64_value(value, where);
        } else if (key == "repeats") {
            config.repeats = static_cast<std::uint32_t>(parse_u64_value(value, where));
        } else if (key == "seed") {
            config.seed = parse_u64_value(value, where);
        } else if (key == "presets") {
            config.presets = load_presets(base / value);
        } else if (key == "calibration") {
            config.storage = StorageModel::load_file(base / value);
        } else {
            throw FormatError(FormatIssue::BadField,
                              where + ": unknown key '" + key + "'");
        }
    }
    config.validate();
    return config;
}

std::filesystem::path resolve_out_dir(const std::string& cli_value) {
    if (!cli_value.empty()) return cli_value;
    if (const char* env = std::getenv("REAPSNAP_OUT"); env != nullptr && *env != '\0')
        return env;
    return "results";
}

// ---- cold starts ---------------------------------------------------------------

ColdstartResult run_coldstart(const ExperimentConfig& config,
                              const std::vector<std::string>& functions,
                              const std::filesystem::path& out_dir) {
    config.validate();
    const SnapshotImage image = make_synthetic_image(
        config.num_pages, config.page_size, config.content_seed,
        config.vmm_state_bytes);

    ColdstartResult result;
    std::vector<ReportRow> rows;
    std::vector<SpeedupRow> speedups;

    for (const std::string& name : functions) {
        Recorded rec = record_function(config, image, name);

        FunctionColdstart fc;
        fc.function = name;
        fc.record = rec.report;
        fc.trace = rec.trace;
        fc.ws_bytes = rec.ws.payload_bytes();

        const std::filesystem::path rec_dir = out_dir / "record" / name;
        std::filesystem::create_directories(rec_dir);
        write_trace(rec.trace, rec_dir / "trace.bin");
        write_working_set(rec.ws, rec_dir / "working_set.bin");
        write_text(rec_dir / "report.json", rec.report.to_json());
        rows.push_back({name, rec.report});

        for (std::uint32_t i = 0; i < config.repeats; ++i) {
            const AccessSequence seq =
                derive_invocation(rec.profile, rec.layout, config.seed + 1 + i);

            RestoreSession lazy(image, RestoreMode::LazyBaseline, config.storage,
                                config.params);
            lazy.calibrate_base();
            fc.lazy.push_back(lazy.run_invocation(seq));
            write_text(out_dir / "lazy" / name /
                           ("report_" + std::to_string(i) + ".json"),
                       fc.lazy.back().to_json());

            RestoreSession reap(image, RestoreMode::Prefetch, config.storage,
                                config.params, {}, &rec.trace, &rec.ws);
            reap.calibrate_base();
            fc.prefetch.push_back(reap.run_invocation(seq));
            write_text(out_dir / "prefetch" / name /
                           ("report_" + std::to_string(i) + ".json"),
                       fc.prefetch.back().to_json());
        }
        for (std::uint32_t i = 0; i < config.repeats; ++i)
            rows.push_back({name, fc.lazy[i]});
        for (std::uint32_t i = 0; i < config.repeats; ++i)
            rows.push_back({name, fc.prefetch[i]});

        speedups.push_back(speedup_row(name, with_mean_total(fc.lazy), rec.report,
                                       with_mean_total(fc.prefetch)));
        result.functions.push_back(std::move(fc));
    }

    result.summary = summarize_suite(std::move(speedups));
    write_text(out_dir / "results.csv", reports_csv(rows));
    write_text(out_dir / "results.json", reports_json(rows));
    write_text(out_dir / "speedups.csv", speedups_csv(result.summary));
    write_text(out_dir / "speedups.json", speedups_json(result.summary));
    return result;
}

// ---- restore-path steps ----------------------------------------------------------

OptStepsResult run_opt_steps(const ExperimentConfig& config,
                             const std::string& function,
                             const std::filesystem::path& out_dir) {
    config.validate();
    const SnapshotImage image = make_synthetic_image(
        config.num_pages, config.page_size, config.content_seed,
        config.vmm_state_bytes);
    Recorded rec = record_function(config, image, function);
    const AccessSequence seq =
        derive_invocation(rec.profile, rec.layout, config.seed + 1);

    OptStepsResult result;
    result.function = function;

    auto run_step = [&](const std::string& label, RestoreMode mode,
                        SessionOptions options) {
        const PageTrace* trace =
            mode == RestoreMode::Prefetch ? &rec.trace : nullptr;
        const WorkingSet* ws = mode == RestoreMode::Prefetch ? &rec.ws : nullptr;
        RestoreSession session(image, mode, config.storage, config.params, options,
                               trace, ws);
        session.calibrate_base();
        result.steps.push_back({label, session.run_invocation(seq)});
    };

    run_step("serial_lazy", RestoreMode::LazyBaseline, {});
    SessionOptions parallel;
    parallel.parallel_fetch = true;
    run_step("parallel_prefetch", RestoreMode::Prefetch, parallel);
    SessionOptions cached;
    cached.ws_fetch_bypass = false;
    run_step("ws_cached", RestoreMode::Prefetch, cached);
    run_step("reap", RestoreMode::Prefetch, {});

    std::string csv =
        "step,mode,total_us,load_vmm_us,conn_us,fetch_us,install_us,fault_us,"
        "compute_us,faults,prefetched,mispredicted\n";
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const OptStep& s : result.steps) {
        const RestoreReport& r = s.report;
        csv += s.label;
        csv += ',';
        csv += restore_mode_name(r.mode);
        for (double v : {r.total_us, r.load_vmm_us, r.conn_us, r.fetch_us,
                         r.install_us, r.fault_us, r.compute_us})
            csv += ',' + fixed3(v);
        for (std::uint64_t v : {r.faults, r.prefetched, r.mispredicted})
            csv += ',' + std::to_string(v);
        csv += '\n';

        nlohmann::ordered_json j;
        j["step"] = s.label;
        j["mode"] = restore_mode_name(r.mode);
        j["total_us"] = round3(r.total_us);
        j["fetch_us"] = round3(r.fetch_us);
        j["install_us"] = round3(r.install_us);
        j["fault_us"] = round3(r.fault_us);
        j["faults"] = r.faults;
        j["effective_read_bandwidth_mbps"] = round3(r.effective_read_bandwidth_mbps);
        arr.push_back(std::move(j));
    }
    write_text(out_dir / "opt_steps.csv", csv);
    write_text(out_dir / "opt_steps.json", arr.dump(2) + "\n");
    return result;
}

// ---- concurrency sweep -----------------------------------------------------------

std::vector<std::uint32_t> default_sweep_counts() { return {1, 2, 4, 8, 16, 32, 64}; }

SweepResult run_sweep(const ExperimentConfig& config, const std::string& function,
                      const std::vector<std::uint32_t>& counts,
                      const std::filesystem::path& out_dir) {
    config.validate();
    if (counts.empty()) throw std::invalid_argument("sweep needs at least one count");
    for (std::uint32_t n : counts)
        if (n == 0) throw std::invalid_argument("sweep counts must be positive");

    const SnapshotImage image = make_synthetic_image(
        config.num_pages, config.page_size, config.content_seed,
        config.vmm_state_bytes);
    Recorded rec = record_function(config, image, function);

    const std::uint32_t max_n = *std::max_element(counts.begin(), counts.end());
    std::vector<AccessSequence> seqs;
    seqs.reserve(max_n);
    for (std::uint32_t i = 0; i < max_n; ++i)
        seqs.push_back(derive_invocation(rec.profile, rec.layout, config.seed + 1 + i));

    SweepResult result;
    result.function = function;

    auto aggregate = [](const std::vector<RestoreReport>& reports, double* mean_us,
                        double* max_us, double* agg_mbps) {
        double total = 0.0, longest = 0.0;
        std::uint64_t bytes = 0;
        for (const RestoreReport& r : reports) {
            total += r.total_us;
            longest = std::max(longest, r.total_us);
            bytes += r.read_bytes;
        }
        *mean_us = total / static_cast<double>(reports.size());
        *max_us = longest;
        *agg_mbps = mbps_for(static_cast<double>(bytes), longest);
    };

    for (std::uint32_t n : counts) {
        std::vector<ConcurrentSpec> base_specs, reap_specs;
        for (std::uint32_t i = 0; i < n; ++i) {
            base_specs.push_back({RestoreMode::LazyBaseline, &seqs[i], nullptr,
                                  nullptr});
            reap_specs.push_back({RestoreMode::Prefetch, &seqs[i], &rec.trace,
                                  &rec.ws});
        }
        const std::vector<RestoreReport> base =
            run_concurrent(image, config.storage, config.params, {}, base_specs);
        const std::vector<RestoreReport> reap =
            run_concurrent(image, config.storage, config.params, {}, reap_specs);

        SweepPoint p;
        p.n = n;
        aggregate(base, &p.base_mean_us, &p.base_max_us, &p.base_aggregate_mbps);
        aggregate(reap, &p.reap_mean_us, &p.reap_max_us, &p.reap_aggregate_mbps);
        result.points.push_back(p);
    }

    std::string csv =
        "n,base_mean_us,base_max_us,reap_mean_us,reap_max_us,base_aggregate_mbps,"
        "reap_aggregate_mbps\n";
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const SweepPoint& p : result.points) {
        csv += std::to_string(p.n);
        for (double v : {p.base_mean_us, p.base_max_us, p.reap_mean_us, p.reap_max_us,
                         p.base_aggregate_mbps, p.reap_aggregate_mbps})
            csv += ',' + fixed3(v);
        csv += '\n';

        nlohmann::ordered_json j;
        j["n"] = p.n;
        j["base_mean_us"] = round3(p.base_mean_us);
        j["base_max_us"] = round3(p.base_max_us);
        j["reap_mean_us"] = round3(p.reap_mean_us);
        j["reap_max_us"] = round3(p.reap_max_us);
        j["base_aggregate_mbps"] = round3(p.base_aggregate_mbps);
        j["reap_aggregate_mbps"] = round3(p.reap_aggregate_mbps);
        arr.push_back(std::move(j));
    }
    write_text(out_dir / "sweep.csv", csv);
    write_text(out_dir / "sweep.json", arr.dump(2) + "\n");
    return result;
}

// ---- trace analysis --------------------------------------------------------------

FunctionAnalysis analyze_function(const ExperimentConfig& config,
                                  const std::string& function) {
    config.validate();
    const SnapshotImage image = make_synthetic_image(
        config.num_pages, config.page_size, config.content_seed,
        config.vmm_state_bytes);
    const FunctionProfile& profile = find_preset(config.presets, function);
    const Layout layout = synthesize_layout(profile, config.num_pages);

    std::vector<PageTrace> traces;
    for (std::uint32_t i = 0; i < config.repeats; ++i) {
        const AccessSequence seq =
            derive_invocation(profile, layout, config.seed + i);
        RestoreSession session(image, RestoreMode::Record, config.storage,
                               config.params);
        session.calibrate_base();
        session.run_invocation(seq);
        traces.push_back(session.finalize_record().first);
    }

    FunctionAnalysis a;
    a.function = function;
    a.layout_contiguity = contiguity(layout.stable_order);
    a.trace_contiguity = contiguity(traces.front());
    a.reuse = reuse_of_traces(traces);
    a.footprint = footprint_bytes(traces.front());
    return a;
}

std::vector<FunctionAnalysis> run_analyze(const ExperimentConfig& config,
                                          const std::vector<std::string>& functions,
                                          const std::filesystem::path& out_dir) {
    std::vector<FunctionAnalysis> all;
    for (const std::string& name : functions)
        all.push_back(analyze_function(config, name));

    std::string csv =
        "function,pages,footprint_bytes,layout_mean_run,trace_mean_run,max_run,"
        "stable_pages,stable_fraction,mean_unique_fraction\n";
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const FunctionAnalysis& a : all) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "%s,%llu,%llu,%.4f,%.4f,%llu,%llu,%.4f,%.4f\n",
                      a.function.c_str(),
                      static_cast<unsigned long long>(a.trace_contiguity.pages),
                      static_cast<unsigned long long>(a.footprint),
                      a.layout_contiguity.mean_run, a.trace_contiguity.mean_run,
                      static_cast<unsigned long long>(a.trace_contiguity.max_run),
                      static_cast<unsigned long long>(a.reuse.stable_pages),
                      a.reuse.stable_fraction, a.reuse.mean_unique_fraction);
        csv += buf;

        nlohmann::ordered_json j;
        j["function"] = a.function;
        j["pages"] = a.trace_contiguity.pages;
        j["footprint_bytes"] = a.footprint;
        j["layout_mean_run"] = std::llround(a.layout_contiguity.mean_run * 10000.0) /
                               10000.0;
        j["trace_mean_run"] = std::llround(a.trace_contiguity.mean_run * 10000.0) /
                              10000.0;
        j["max_run"] = a.trace_contiguity.max_run;
        j["stable_pages"] = a.reuse.stable_pages;
        j["stable_fraction"] = std::llround(a.reuse.stable_fraction * 10000.0) /
                               10000.0;
        j["mean_unique_fraction"] =
            std::llround(a.reuse.mean_unique_fraction * 10000.0) / 10000.0;
        arr.push_back(std::move(j));
    }
    write_text(out_dir / "analyze.csv", csv);
    write_text(out_dir / "analyze.json", arr.dump(2) + "\n");
    return all;
}

}  // namespace reapsnap
