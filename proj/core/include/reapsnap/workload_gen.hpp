#pragma once

// Synthetic function working sets and access sequences.
//
// A function profile plants a stable working set as runs of adjacent pages
// (geometric run lengths around a target mean, placed uniformly without
// touching each other) plus a per-invocation fraction of fresh "unique"
// pages that model input-dependent data. Invocations derived from the same
// layout share exactly the stable set; their unique pages are drawn from
// disjoint slices of a shuffled pool, so two input seeds never reuse each
// other's unique pages. Page 0 is reserved for the engine's base-mapping
// calibration fault and never appears in generated workloads.
//
// Access sequence text format: header line `compute_us=<n>`, then one
// `phase,page_index,kind` line per access with phase in {conn, body} and
// kind in {read, write}; conn entries precede body entries.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "reapsnap/snapshot_store.hpp"

namespace reapsnap {

enum class Phase { Conn, Body };
enum class AccessKind { Read, Write };

struct AccessEntry {
    Phase phase = Phase::Body;
    std::uint64_t page = 0;
    AccessKind kind = AccessKind::Read;

    bool operator==(const AccessEntry&) const = default;
};

struct AccessSequence {
    std::uint64_t compute_us = 0;
    std::vector<AccessEntry> entries;

    bool operator==(const AccessSequence&) const = default;

    // Bounds and phase-ordering checks; throws FormatError/invalid_argument.
    void validate(std::uint64_t num_pages) const;

    // Distinct pages in first-touch order.
    std::vector<std::uint64_t> first_touch_order() const;
};

struct FunctionProfile {
    std::string name;
    std::uint64_t ws_pages = 0;      // pages touched per invocation
    std::uint64_t infra_pages = 0;   // connection-restore prefix (stable)
    double mean_run_length = 1.0;    // target adjacency run mean, >= 1
    double unique_fraction = 0.0;    // unique pages / pages touched, [0, 1]
    std::uint64_t compute_us = 0;
    std::uint64_t layout_seed = 0;

    void validate() const;
    std::uint64_t unique_pages() const;  // round(unique_fraction * ws_pages)
    std::uint64_t stable_pages() const { return ws_pages - unique_pages(); }
    std::uint64_t footprint_bytes(std::uint32_t page_size) const {
        return ws_pages * page_size;
    }
};

struct Layout {
    std::uint64_t num_pages = 0;
    std::vector<std::uint64_t> stable_order;  // stable pages in touch order
    std::vector<std::uint64_t> run_lengths;   // placed adjacency runs
    std::vector<std::uint64_t> unique_pool;   // shuffled non-stable pages

    double measured_mean_run() const {
        return run_lengths.empty()
                   ? 0.0
                   : static_cast<double>(stable_order.size()) /
                         static_cast<double>(run_lengths.size());
    }
};

// Plants the stable set. Throws when the working set cannot be placed
// without overlap after bounded retries.
Layout synthesize_layout(const FunctionProfile& profile, std::uint64_t num_pages);

// Connection phase over the first infra_pages stable pages, body phase over
// the remaining stable pages plus the input seed's unique slice.
AccessSequence derive_invocation(const FunctionProfile& profile, const Layout& layout,
                                 std::uint64_t input_seed);

// ---- sequence files ----------------------------------------------------------

void write_sequence(const AccessSequence& seq, const std::filesystem::path& path);
AccessSequence read_sequence(const std::filesystem::path& path);

std::string serialize_sequence(const AccessSequence& seq);
AccessSequence parse_sequence(const std::string& text, const std::string& origin);

// Body-phase first-touch sequence from a recorded trace. The path may hold
// either a binary trace file or sequence text (sniffed by magic).
AccessSequence sequence_from_trace(const PageTrace& trace);
AccessSequence import_trace(const std::filesystem::path& path);

// ---- presets -----------------------------------------------------------------

// Ten serverless function profiles. Working sets span 8-99 MiB with a
// 24 MiB mean at 4 KiB pages; helloworld is pinned at 8 MiB / 2.5-page runs
// / 1 ms compute, lr_training at 99 MiB / 5-page runs, image_rotate at 0.24
// unique fraction. The remaining figures are interpolations within the
// measured ranges for such functions.
const std::vector<FunctionProfile>& default_presets();

std::vector<FunctionProfile> load_presets(const std::filesystem::path& path);
void save_presets(const std::vector<FunctionProfile>& presets,
                  const std::filesystem::path& path);
std::vector<FunctionProfile> parse_presets(const std::string& text,
                                           const std::string& origin);
std::string serialize_presets(const std::vector<FunctionProfile>& presets);

const FunctionProfile& find_preset(const std::vector<FunctionProfile>& presets,
                                   const std::string& name);

}  // namespace reapsnap
