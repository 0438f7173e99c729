// Command line driver: snapshot management, cold-start experiments and the
// real-disk measurement harness. Exit codes: 0 success, 1 runtime failure,
// 2 usage error.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "reapsnap/analysis.hpp"
#include "reapsnap/experiments.hpp"
#include "reapsnap/fault_engine.hpp"
#include "reapsnap/snapshot_store.hpp"
#include "reapsnap/workload_gen.hpp"

namespace {

using namespace reapsnap;

struct CommonOpts {
    std::string config;
    std::string calibration;
    std::string presets;
    std::string out;
    std::string format = "csv";
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::uint32_t repeats = 0;
    bool repeats_set = false;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_repeats = true) {
    cmd->add_option("--config", o.config, "experiment config file (key=value)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--calibration", o.calibration,
                    "storage calibration file overriding the built-in table")
        ->check(CLI::ExistingFile);
    cmd->add_option("--presets", o.presets, "function preset table")
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", o.out,
                    "output directory (default: $REAPSNAP_OUT or ./results)");
    cmd->add_option("--format", o.format, "stdout rendering")
        ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option_function<std::uint64_t>(
           "--seed", [&o](std::uint64_t v) { o.seed = v; o.seed_set = true; },
           "input seed of the recorded invocation");
    if (with_repeats)
        cmd->add_option_function<std::uint32_t>(
               "--repeats",
               [&o](std::uint32_t v) { o.repeats = v; o.repeats_set = true; },
               "replayed invocations per function");
}

ExperimentConfig load_config(const CommonOpts& o) {
    ExperimentConfig config = o.config.empty()
                                  ? ExperimentConfig{}
                                  : ExperimentConfig::from_file(o.config);
    if (!o.calibration.empty()) config.storage = StorageModel::load_file(o.calibration);
    if (!o.presets.empty()) config.presets = load_presets(o.presets);
    if (o.seed_set) config.seed = o.seed;
    if (o.repeats_set) config.repeats = o.repeats;
    config.validate();
    return config;
}

std::vector<std::string> pick_functions(const ExperimentConfig& config,
                                        const std::vector<std::string>& profiles) {
    if (profiles.empty() ||
        (profiles.size() == 1 && profiles.front() == "all")) {
        std::vector<std::string> names;
        for (const FunctionProfile& p : config.presets) names.push_back(p.name);
        return names;
    }
    for (const std::string& name : profiles) find_preset(config.presets, name);
    return profiles;
}

void print_reports(const std::vector<ReportRow>& rows, const std::string& format) {
    if (format == "json")
        std::cout << reports_json(rows);
    else
        std::cout << reports_csv(rows);
}

int cmd_snapshot_create(const CommonOpts& o, const std::string& dir) {
    ExperimentConfig config = load_config(o);
    const SnapshotImage image = create_synthetic_image(
        dir, config.num_pages, config.page_size, config.content_seed,
        config.vmm_state_bytes);
    nlohmann::ordered_json j;
    j["dir"] = dir;
    j["id"] = image.id();
    j["num_pages"] = image.num_pages();
    j["page_size"] = image.page_size();
    j["guest_mem_bytes"] = image.guest_mem_len();
    j["vmm_state_bytes"] = image.vmm_state_len();
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_record(const CommonOpts& o, const std::string& profile,
               const std::string& image_dir) {
    ExperimentConfig config = load_config(o);
    const std::filesystem::path out = resolve_out_dir(o.out);

    std::optional<SnapshotImage> image;
    if (image_dir.empty())
        image = make_synthetic_image(config.num_pages, config.page_size,
                                     config.content_seed, config.vmm_state_bytes);
    else
        image = read_image(image_dir);

    const FunctionProfile& p = find_preset(config.presets, profile);
    const Layout layout = synthesize_layout(p, image->num_pages());
    const AccessSequence seq = derive_invocation(p, layout, config.seed);

    RestoreSession session(*image, RestoreMode::Record, config.storage,
                           config.params);
    session.calibrate_base();
    const RestoreReport report = session.run_invocation(seq);
    auto [trace, ws] = session.finalize_record();

    const std::filesystem::path dir = out / "record" / profile;
    std::filesystem::create_directories(dir);
    write_trace(trace, dir / "trace.bin");
    write_working_set(ws, dir / "working_set.bin");
    write_sequence(seq, dir / "sequence.txt");
    {
        std::ofstream rep(dir / "report.json", std::ios::binary | std::ios::trunc);
        rep << report.to_json();
    }
    print_reports({{profile, report}}, o.format);
    std::cerr << "recorded " << trace.count() << " pages to " << dir << "\n";
    return 0;
}

int cmd_coldstart(const CommonOpts& o, const std::vector<std::string>& profiles,
                  const std::string& mode) {
    ExperimentConfig config = load_config(o);
    const std::filesystem::path out = resolve_out_dir(o.out);
    const std::vector<std::string> functions = pick_functions(config, profiles);

    if (mode == "all") {
        const ColdstartResult result = run_coldstart(config, functions, out);
        if (o.format == "json")
            std::cout << speedups_json(result.summary);
        else
            std::cout << speedups_csv(result.summary);
        std::cerr << "results under " << out << "\n";
        return 0;
    }

    // Single-mode run; prefetch still needs a recording pass for its trace,
    // but only the requested mode's reports are emitted.
    const RestoreMode wanted = parse_restore_mode(mode);
    const SnapshotImage image = make_synthetic_image(
        config.num_pages, config.page_size, config.content_seed,
        config.vmm_state_bytes);
    std::vector<ReportRow> rows;
    for (const std::string& name : functions) {
        const FunctionProfile& p = find_preset(config.presets, name);
        const Layout layout = synthesize_layout(p, config.num_pages);

        std::optional<PageTrace> trace;
        std::optional<WorkingSet> ws;
        if (wanted != RestoreMode::LazyBaseline) {
            const AccessSequence seq0 = derive_invocation(p, layout, config.seed);
            RestoreSession rec(image, RestoreMode::Record, config.storage,
                               config.params);
            rec.calibrate_base();
            const RestoreReport rec_report = rec.run_invocation(seq0);
            auto [t, w] = rec.finalize_record();
            trace = std::move(t);
            ws = std::move(w);
            if (wanted == RestoreMode::Record) {
                rows.push_back({name, rec_report});
                const std::filesystem::path dir = out / "record" / name;
                std::filesystem::create_directories(dir);
                write_trace(*trace, dir / "trace.bin");
                write_working_set(*ws, dir / "working_set.bin");
                std::ofstream rep(dir / "report.json",
                                  std::ios::binary | std::ios::trunc);
                rep << rec_report.to_json();
                continue;
            }
        }
        for (std::uint32_t i = 0; i < config.repeats; ++i) {
            const AccessSequence seq =
                derive_invocation(p, layout, config.seed + 1 + i);
            RestoreSession session(image, wanted, config.storage, config.params, {},
                                   trace ? &*trace : nullptr, ws ? &*ws : nullptr);
            session.calibrate_base();
            rows.push_back({name, session.run_invocation(seq)});
            const std::filesystem::path dir = out / mode / name;
            std::filesystem::create_directories(dir);
            std::ofstream rep(dir / ("report_" + std::to_string(i) + ".json"),
                              std::ios::binary | std::ios::trunc);
            rep << rows.back().report.to_json();
        }
    }
    {
        std::filesystem::create_directories(out);
        std::ofstream csv(out / "results.csv", std::ios::binary | std::ios::trunc);
        csv << reports_csv(rows);
    }
    print_reports(rows, o.format);
    std::cerr << "results under " << out << "\n";
    return 0;
}

int cmd_opt_steps(const CommonOpts& o, const std::string& profile) {
    ExperimentConfig config = load_config(o);
    const std::filesystem::path out = resolve_out_dir(o.out);
    const OptStepsResult result = run_opt_steps(config, profile, out);
    if (o.format == "json") {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const OptStep& s : result.steps) {
            nlohmann::ordered_json j;
            j["step"] = s.label;
            j["total_us"] = s.report.total_us;
            j["faults"] = s.report.faults;
            arr.push_back(std::move(j));
        }
        std::cout << arr.dump(2) << "\n";
    } else {
        std::cout << "step,total_us,faults\n";
        for (const OptStep& s : result.steps)
            std::printf("%s,%.3f,%llu\n", s.label.c_str(), s.report.total_us,
                        static_cast<unsigned long long>(s.report.faults));
    }
    std::cerr << "results under " << out << "\n";
    return 0;
}

int cmd_sweep(const CommonOpts& o, const std::string& profile,
              std::vector<std::uint32_t> counts) {
    ExperimentConfig config = load_config(o);
    const std::filesystem::path out = resolve_out_dir(o.out);
    if (counts.empty()) counts = default_sweep_counts();
    const SweepResult result = run_sweep(config, profile, counts, out);
    if (o.format == "json") {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const SweepPoint& p : result.points) {
            nlohmann::ordered_json j;
            j["n"] = p.n;
            j["base_mean_us"] = p.base_mean_us;
            j["reap_mean_us"] = p.reap_mean_us;
            arr.push_back(std::move(j));
        }
        std::cout << arr.dump(2) << "\n";
    } else {
        std::cout << "n,base_mean_us,reap_mean_us\n";
        for (const SweepPoint& p : result.points)
            std::printf("%u,%.3f,%.3f\n", p.n, p.base_mean_us, p.reap_mean_us);
    }
    std::cerr << "results under " << out << "\n";
    return 0;
}

int cmd_analyze(const CommonOpts& o, const std::vector<std::string>& profiles,
                const std::vector<std::string>& trace_files) {
    ExperimentConfig config = load_config(o);
    const std::filesystem::path out = resolve_out_dir(o.out);

    if (!trace_files.empty()) {
        std::vector<PageTrace> traces;
        for (const std::string& f : trace_files) traces.push_back(read_trace(f));
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < traces.size(); ++i) {
            const ContiguityStats c = contiguity(traces[i]);
            nlohmann::ordered_json j;
            j["trace"] = trace_files[i];
            j["pages"] = c.pages;
            j["runs"] = c.runs;
            j["mean_run"] = c.mean_run;
            j["max_run"] = c.max_run;
            j["footprint_bytes"] = footprint_bytes(traces[i]);
            arr.push_back(std::move(j));
        }
        if (traces.size() > 1) {
            const ReuseStats r = reuse_of_traces(traces);
            nlohmann::ordered_json j;
            j["stable_pages"] = r.stable_pages;
            j["union_pages"] = r.union_pages;
            j["stable_fraction"] = r.stable_fraction;
            j["mean_unique_fraction"] = r.mean_unique_fraction;
            nlohmann::ordered_json top;
            top["traces"] = std::move(arr);
            top["reuse"] = std::move(j);
            std::cout << top.dump(2) << "\n";
        } else {
            std::cout << arr.dump(2) << "\n";
        }
        return 0;
    }

    const std::vector<std::string> functions = pick_functions(config, profiles);
    const std::vector<FunctionAnalysis> all = run_analyze(config, functions, out);
    if (o.format == "json") {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const FunctionAnalysis& a : all) {
            nlohmann::ordered_json j;
            j["function"] = a.function;
            j["mean_run"] = a.layout_contiguity.mean_run;
            j["stable_fraction"] = a.reuse.stable_fraction;
            j["footprint_bytes"] = a.footprint;
            arr.push_back(std::move(j));
        }
        std::cout << arr.dump(2) << "\n";
    } else {
        std::cout << "function,mean_run,stable_fraction,footprint_bytes\n";
        for (const FunctionAnalysis& a : all)
            std::printf("%s,%.4f,%.4f,%llu\n", a.function.c_str(),
                        a.layout_contiguity.mean_run, a.reuse.stable_fraction,
                        static_cast<unsigned long long>(a.footprint));
    }
    std::cerr << "results under " << out << "\n";
    return 0;
}

int cmd_measure_disk(const CommonOpts& o, const std::string& file,
                     const std::string& pattern, unsigned parallel) {
    DiskPattern p;
    if (pattern == "serial4k")
        p = DiskPattern::Serial4K;
    else if (pattern == "parallel4k")
        p = DiskPattern::Parallel4K;
    else if (pattern == "bulk")
        p = DiskPattern::Bulk;
    else
        p = DiskPattern::BulkBypass;
    const DiskMeasurement m = measure_real(file, p, parallel);
    if (o.format == "json") {
        nlohmann::ordered_json j;
        j["pattern"] = disk_pattern_name(m.pattern);
        j["mbps"] = m.mbps;
        j["bytes_read"] = m.bytes_read;
        j["seconds"] = m.seconds;
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << "pattern,mbps,bytes_read,seconds\n";
        std::printf("%s,%.2f,%llu,%.4f\n", disk_pattern_name(m.pattern), m.mbps,
                    static_cast<unsigned long long>(m.bytes_read), m.seconds);
    }
    std::cerr << "measured rates describe this host; simulations keep using "
                 "their calibration file\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"snapshot restore engine and cold-start benchmark driver"};
    app.require_subcommand(1);

    CommonOpts common;

    auto* snapshot = app.add_subcommand("snapshot", "snapshot image management");
    snapshot->require_subcommand(1);
    auto* snap_create =
        snapshot->add_subcommand("create", "materialize a synthetic image directory");
    std::string snap_dir;
    snap_create->add_option("--dir", snap_dir, "image directory to create")
        ->required();
    add_common(snap_create, common, false);

    auto* record = app.add_subcommand(
        "record", "record one invocation into a trace + working set");
    std::string record_profile, record_image;
    record->add_option("--profile", record_profile, "function preset name")
        ->required();
    record->add_option("--image", record_image,
                       "existing image directory (default: in-memory synthetic)");
    add_common(record, common, false);

    auto* coldstart = app.add_subcommand(
        "coldstart", "lazy/record/prefetch cold starts over the function suite");
    std::vector<std::string> cold_profiles;
    std::string cold_mode = "all";
    coldstart->add_option("--profile", cold_profiles,
                          "function preset names (default: the whole suite)")
        ->delimiter(',');
    coldstart->add_option("--mode", cold_mode, "restrict to one restore mode")
        ->check(CLI::IsMember({"all", "lazy", "record", "prefetch"}));
    add_common(coldstart, common);

    auto* opt_steps = app.add_subcommand(
        "opt-steps", "restore path one optimization at a time");
    std::string steps_profile = "helloworld";
    opt_steps->add_option("--profile", steps_profile, "function preset name");
    add_common(opt_steps, common, false);

    auto* sweep =
        app.add_subcommand("sweep", "concurrent cold starts sharing one device");
    std::string sweep_profile = "helloworld";
    std::vector<std::uint32_t> sweep_counts;
    sweep->add_option("--profile", sweep_profile, "function preset name");
    sweep->add_option("--counts", sweep_counts,
                      "concurrency levels (default: 1,2,4,8,16,32,64)")
        ->delimiter(',');
    add_common(sweep, common, false);

    auto* analyze =
        app.add_subcommand("analyze", "contiguity and reuse statistics");
    std::vector<std::string> analyze_profiles, analyze_traces;
    analyze->add_option("--profile", analyze_profiles,
                        "function preset names (default: the whole suite)")
        ->delimiter(',');
    analyze->add_option("--trace", analyze_traces, "recorded trace files to inspect")
        ->check(CLI::ExistingFile);
    add_common(analyze, common);

    auto* measure = app.add_subcommand(
        "measure-disk", "run a real access pattern against a scratch file");
    std::string measure_file, measure_pattern;
    unsigned measure_parallel = 16;
    measure->add_option("--file", measure_file, "scratch file of at least 64 MiB")
        ->required()
        ->check(CLI::ExistingFile);
    measure->add_option("--pattern", measure_pattern, "access pattern")
        ->required()
        ->check(CLI::IsMember({"serial4k", "parallel4k", "bulk", "bulk_bypass"}));
    measure->add_option("--parallel", measure_parallel,
                        "worker threads for parallel4k");
    add_common(measure, common, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (snap_create->parsed()) return cmd_snapshot_create(common, snap_dir);
        if (record->parsed()) return cmd_record(common, record_profile, record_image);
        if (coldstart->parsed()) return cmd_coldstart(common, cold_profiles, cold_mode);
        if (opt_steps->parsed()) return cmd_opt_steps(common, steps_profile);
        if (sweep->parsed()) return cmd_sweep(common, sweep_profile, sweep_counts);
        if (analyze->parsed())
            return cmd_analyze(common, analyze_profiles, analyze_traces);
        if (measure->parsed())
            return cmd_measure_disk(common, measure_file, measure_pattern,
                                    measure_parallel);
        std::cerr << "no subcommand\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
