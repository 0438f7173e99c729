#include "reapsnap/workload_gen.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "reapsnap/common.hpp"
#include "reapsnap/errors.hpp"

namespace reapsnap {

namespace {

constexpr std::uint64_t kReservedPage = 0;
constexpr int kPlacementRetries = 10000;

[[noreturn]] void field_error(const std::string& origin, std::size_t line,
                              const std::string& what) {
    throw FormatError(FormatIssue::BadField,
                      origin + ":" + std::to_string(line) + ": " + what);
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

std::uint64_t parse_u64_field(const std::string& s, const std::string& origin,
                              std::size_t line, const char* what) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
        field_error(origin, line, std::string("expected unsigned integer for ") + what +
                                      ", got '" + s + "'");
    errno = 0;
    char* end = nullptr;
    unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (errno == ERANGE || end != s.c_str() + s.size())
        field_error(origin, line, std::string("value out of range for ") + what);
    return v;
}

double parse_double_field(const std::string& s, const std::string& origin,
                          std::size_t line, const char* what) {
    char* end = nullptr;
    errno = 0;
    double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE)
        field_error(origin, line, std::string("expected number for ") + what + ", got '" +
                                      s + "'");
    return v;
}

}  // namespace

// ---- AccessSequence ------------------------------------------------------------

void AccessSequence::validate(std::uint64_t num_pages) const {
    if (num_pages == 0) throw std::invalid_argument("num_pages must be positive");
    bool body_seen = false;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const AccessEntry& e = entries[i];
        if (e.page == kReservedPage)
            throw std::invalid_argument("entry " + std::to_string(i) +
                                        ": page 0 is reserved for calibration");
        if (e.page >= num_pages)
            throw std::invalid_argument("entry " + std::to_string(i) + ": page " +
                                        std::to_string(e.page) + " out of range (" +
                                        std::to_string(num_pages) + " pages)");
        if (e.phase == Phase::Body) body_seen = true;
        if (e.phase == Phase::Conn && body_seen)
            throw std::invalid_argument("entry " + std::to_string(i) +
                                        ": conn access after body phase started");
    }
}

std::vector<std::uint64_t> AccessSequence::first_touch_order() const {
    std::vector<std::uint64_t> out;
    std::unordered_set<std::uint64_t> seen;
    out.reserve(entries.size());
    for (const AccessEntry& e : entries)
        if (seen.insert(e.page).second) out.push_back(e.page);
    return out;
}

// ---- FunctionProfile -----------------------------------------------------------

void FunctionProfile::validate() const {
    if (name.empty()) throw std::invalid_argument("profile name must not be empty");
    for (char c : name)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-')
            throw std::invalid_argument("profile name '" + name +
                                        "' has characters outside [A-Za-z0-9_-]");
    if (ws_pages == 0) throw std::invalid_argument("ws_pages must be positive");
    if (!(mean_run_length >= 1.0))
        throw std::invalid_argument("mean_run_length must be >= 1");
    if (!(unique_fraction >= 0.0 && unique_fraction <= 1.0))
        throw std::invalid_argument("unique_fraction must be within [0, 1]");
    if (infra_pages > stable_pages())
        throw std::invalid_argument("infra_pages exceeds the stable working set");
}

std::uint64_t FunctionProfile::unique_pages() const {
    return static_cast<std::uint64_t>(
        std::llround(unique_fraction * static_cast<double>(ws_pages)));
}

// ---- layout synthesis ----------------------------------------------------------

Layout synthesize_layout(const FunctionProfile& profile, std::uint64_t num_pages) {
    profile.validate();
    const std::uint64_t stable = profile.stable_pages();
    if (num_pages < 2 || stable >= num_pages)
        throw std::invalid_argument("image too small for working set of " +
                                    std::to_string(stable) + " stable pages");

    Rng rng(mix64(profile.layout_seed ^ 0x6c796f7574726e67ull));

    std::vector<std::uint64_t> lengths;
    std::uint64_t total = 0;
    while (total < stable) {
        std::uint64_t len = rng.geometric(profile.mean_run_length);
        if (len > stable - total) len = stable - total;
        lengths.push_back(len);
        total += len;
    }

    // start -> one-past-end of each placed run; a one-page gap keeps planted
    // runs from merging into longer ones.
    std::map<std::uint64_t, std::uint64_t> occupied;
    std::vector<std::uint64_t> starts(lengths.size());
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        const std::uint64_t len = lengths[i];
        if (len + 1 > num_pages - 1)
            throw std::runtime_error("run of " + std::to_string(len) +
                                     " pages does not fit the image");
        bool placed = false;
        for (int attempt = 0; attempt < kPlacementRetries && !placed; ++attempt) {
            std::uint64_t start = 1 + rng.below(num_pages - len);
            std::uint64_t end = start + len;
            auto next = occupied.lower_bound(start);
            if (next != occupied.end() && next->first <= end) continue;
            if (next != occupied.begin()) {
                auto prev = std::prev(next);
                if (prev->second >= start) continue;
            }
            occupied.emplace(start, end);
            starts[i] = start;
            placed = true;
        }
        if (!placed)
            throw std::runtime_error(
                "could not place working set after " +
                std::to_string(kPlacementRetries) + " retries; image of " +
                std::to_string(num_pages) + " pages is too dense for " +
                std::to_string(stable) + " stable pages");
    }

    std::vector<std::size_t> order(lengths.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);

    Layout layout;
    layout.num_pages = num_pages;
    layout.stable_order.reserve(stable);
    layout.run_lengths.reserve(lengths.size());
    for (std::size_t idx : order) {
        layout.run_lengths.push_back(lengths[idx]);
        for (std::uint64_t p = starts[idx]; p < starts[idx] + lengths[idx]; ++p)
            layout.stable_order.push_back(p);
    }

    std::vector<bool> is_stable(num_pages, false);
    for (std::uint64_t p : layout.stable_order) is_stable[p] = true;
    layout.unique_pool.reserve(num_pages - 1 - stable);
    for (std::uint64_t p = 1; p < num_pages; ++p)
        if (!is_stable[p]) layout.unique_pool.push_back(p);
    rng.shuffle(layout.unique_pool);
    return layout;
}

// ---- invocation derivation -----------------------------------------------------

AccessSequence derive_invocation(const FunctionProfile& profile, const Layout& layout,
                                 std::uint64_t input_seed) {
    profile.validate();
    if (layout.stable_order.size() != profile.stable_pages())
        throw std::invalid_argument("layout does not match profile: " +
                                    std::to_string(layout.stable_order.size()) +
                                    " stable pages laid out, profile wants " +
                                    std::to_string(profile.stable_pages()));
    const std::uint64_t uniques = profile.unique_pages();
    if (uniques > 0) {
        if (input_seed > layout.unique_pool.size() / uniques ||
            (input_seed + 1) * uniques > layout.unique_pool.size())
            throw std::invalid_argument(
                "input seed " + std::to_string(input_seed) +
                " exhausts the unique-page pool (" +
                std::to_string(layout.unique_pool.size()) + " pages, " +
                std::to_string(uniques) + " per invocation)");
    }

    const std::uint64_t salt = mix64(profile.layout_seed ^ mix64(input_seed + 1));
    auto kind_for = [salt](std::uint64_t page) {
        return (mix64(salt ^ page) & 3) == 0 ? AccessKind::Write : AccessKind::Read;
    };

    AccessSequence seq;
    seq.compute_us = profile.compute_us;
    seq.entries.reserve(profile.ws_pages);
    for (std::uint64_t i = 0; i < profile.infra_pages; ++i)
        seq.entries.push_back(
            {Phase::Conn, layout.stable_order[i], kind_for(layout.stable_order[i])});
    for (std::uint64_t i = profile.infra_pages; i < layout.stable_order.size(); ++i)
        seq.entries.push_back(
            {Phase::Body, layout.stable_order[i], kind_for(layout.stable_order[i])});
    for (std::uint64_t i = input_seed * uniques; i < (input_seed + 1) * uniques; ++i)
        seq.entries.push_back(
            {Phase::Body, layout.unique_pool[i], kind_for(layout.unique_pool[i])});
    seq.validate(layout.num_pages);
    return seq;
}

// ---- sequence files ------------------------------------------------------------

std::string serialize_sequence(const AccessSequence& seq) {
    std::string out = "compute_us=" + std::to_string(seq.compute_us) + "\n";
    for (const AccessEntry& e : seq.entries) {
        out += e.phase == Phase::Conn ? "conn," : "body,";
        out += std::to_string(e.page);
        out += e.kind == AccessKind::Write ? ",write\n" : ",read\n";
    }
    return out;
}

AccessSequence parse_sequence(const std::string& text, const std::string& origin) {
    AccessSequence seq;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos || line[start] == '#') continue;
        if (!header_seen) {
            if (line.rfind("compute_us=", start) != start)
                field_error(origin, lineno, "expected 'compute_us=<n>' header");
            seq.compute_us = parse_u64_field(line.substr(start + 11), origin, lineno,
                                             "compute_us");
            header_seen = true;
            continue;
        }
        std::vector<std::string> f = split_fields(line.substr(start));
        if (f.size() != 3)
            field_error(origin, lineno, "expected 'phase,page_index,kind'");
        AccessEntry e;
        if (f[0] == "conn")
            e.phase = Phase::Conn;
        else if (f[0] == "body")
            e.phase = Phase::Body;
        else
            field_error(origin, lineno, "unknown phase '" + f[0] + "'");
        e.page = parse_u64_field(f[1], origin, lineno, "page_index");
        if (f[2] == "read")
            e.kind = AccessKind::Read;
        else if (f[2] == "write")
            e.kind = AccessKind::Write;
        else
            field_error(origin, lineno, "unknown access kind '" + f[2] + "'");
        seq.entries.push_back(e);
    }
    if (!header_seen) field_error(origin, lineno, "missing 'compute_us=<n>' header");
    return seq;
}

void write_sequence(const AccessSequence& seq, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(FormatIssue::IoError, "cannot open " + path.string());
    const std::string text = serialize_sequence(seq);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out.flush())
        throw FormatError(FormatIssue::IoError, "short write to " + path.string());
}

AccessSequence read_sequence(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(FormatIssue::IoError, "cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_sequence(buf.str(), path.string());
}

AccessSequence sequence_from_trace(const PageTrace& trace) {
    trace.validate();
    AccessSequence seq;
    seq.entries.reserve(trace.offsets.size());
    for (std::uint64_t off : trace.offsets)
        seq.entries.push_back({Phase::Body, off / trace.page_size, AccessKind::Read});
    return seq;
}

AccessSequence import_trace(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(FormatIssue::IoError, "cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string bytes = buf.str();
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), "RPTR", 4) == 0) {
        return sequence_from_trace(decode_trace(
            reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
    }
    return parse_sequence(bytes, path.string());
}

// ---- presets -------------------------------------------------------------------

const std::vector<FunctionProfile>& default_presets() {
    static const std::vector<FunctionProfile> presets = {
        {"helloworld", 2048, 1536, 2.5, 0.010, 1000, 11},
        {"pyaes", 2304, 1536, 2.5, 0.010, 2000, 12},
        {"chameleon", 3072, 1536, 2.5, 0.012, 8000, 13},
        {"json_serdes", 3584, 1536, 2.5, 0.040, 10000, 14},
        {"image_rotate", 4096, 1536, 3.0, 0.240, 18000, 15},
        {"lr_serving", 4608, 1536, 2.5, 0.012, 6000, 16},
        {"rnn_serving", 5120, 1536, 3.0, 0.012, 15000, 17},
        {"cnn_serving", 6144, 1536, 3.0, 0.012, 25000, 18},
        {"video_processing", 5120, 1536, 2.5, 0.080, 150000, 19},
        {"lr_training", 25344, 1536, 5.0, 0.020, 80000, 20},
    };
    return presets;
}

std::string serialize_presets(const std::vector<FunctionProfile>& presets) {
    std::string out =
        "# name,ws_pages,infra_pages,mean_run_length,unique_fraction,"
        "compute_us,layout_seed\n";
    for (const FunctionProfile& p : presets) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "%s,%llu,%llu,%g,%g,%llu,%llu\n",
                      p.name.c_str(),
                      static_cast<unsigned long long>(p.ws_pages),
                      static_cast<unsigned long long>(p.infra_pages),
                      p.mean_run_length, p.unique_fraction,
                      static_cast<unsigned long long>(p.compute_us),
                      static_cast<unsigned long long>(p.layout_seed));
        out += buf;
    }
    return out;
}

std::vector<FunctionProfile> parse_presets(const std::string& text,
                                           const std::string& origin) {
    std::vector<FunctionProfile> presets;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos || line[start] == '#') continue;
        std::vector<std::string> f = split_fields(line.substr(start));
        if (f.size() != 7)
            field_error(origin, lineno,
                        "expected 7 comma-separated fields, got " +
                            std::to_string(f.size()));
        FunctionProfile p;
        p.name = f[0];
        p.ws_pages = parse_u64_field(f[1], origin, lineno, "ws_pages");
        p.infra_pages = parse_u64_field(f[2], origin, lineno, "infra_pages");
        p.mean_run_length = parse_double_field(f[3], origin, lineno, "mean_run_length");
        p.unique_fraction = parse_double_field(f[4], origin, lineno, "unique_fraction");
        p.compute_us = parse_u64_field(f[5], origin, lineno, "compute_us");
        p.layout_seed = parse_u64_field(f[6], origin, lineno, "layout_seed");
        try {
            p.validate();
        } catch (const std::invalid_argument& e) {
            field_error(origin, lineno, e.what());
        }
        for (const FunctionProfile& q : presets)
            if (q.name == p.name)
                field_error(origin, lineno, "duplicate profile '" + p.name + "'");
        presets.push_back(std::move(p));
    }
    if (presets.empty())
        throw FormatError(FormatIssue::BadField, origin + ": no profiles defined");
    return presets;
}

std::vector<FunctionProfile> load_presets(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(FormatIssue::IoError, "cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_presets(buf.str(), path.string());
}

void save_presets(const std::vector<FunctionProfile>& presets,
                  const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(FormatIssue::IoError, "cannot open " + path.string());
    const std::string text = serialize_presets(presets);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out.flush())
        throw FormatError(FormatIssue::IoError, "short write to " + path.string());
}

const FunctionProfile& find_preset(const std::vector<FunctionProfile>& presets,
                                   const std::string& name) {
    for (const FunctionProfile& p : presets)
        if (p.name == name) return p;
    std::string names;
    for (const FunctionProfile& p : presets) {
        if (!names.empty()) names += ", ";
        names += p.name;
    }
    throw std::invalid_argument("unknown function '" + name + "' (have: " + names + ")");
}

}  // namespace reapsnap
