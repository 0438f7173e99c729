#pragma once

// Snapshot artifacts and their on-disk formats.
//
// An image is a directory: guest_mem.bin (raw pages), vmm_state.bin (opaque
// blob), and a textual meta file. Synthetic guest pages are a pure function
// of (content_seed, page_index), so images can be carried around as metadata
// and regenerated on demand; a persisted image is additionally backed by its
// guest_mem.bin.
//
// Trace file (little-endian):
//   "RPTR" | u16 version=1 | u16 reserved=0 | u32 page_size | u64 count
//   | count x u64 byte offsets, in fault order
//
// Working-set file (little-endian):
//   "RPWS" | u16 version=1 | u16 reserved=0 | u32 page_size | u64 count
//   | zero padding to the next page_size boundary
//   | count x page_size raw page bytes, in trace order
// The payload starts on a page_size boundary so the file can be read with
// cache bypass (O_DIRECT-style alignment).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "reapsnap/common.hpp"
#include "reapsnap/errors.hpp"

namespace reapsnap {

inline constexpr std::uint32_t kDefaultPageSize = 4096;
inline constexpr std::uint16_t kTraceVersion = 1;
inline constexpr std::uint16_t kWorkingSetVersion = 1;

bool valid_page_size(std::uint32_t page_size);

class SnapshotImage {
public:
    // In-memory synthetic image; pages are regenerated from content_seed.
    SnapshotImage(std::uint64_t num_pages, std::uint32_t page_size,
                  std::uint64_t content_seed, std::uint64_t vmm_state_len);

    std::uint64_t num_pages() const { return num_pages_; }
    std::uint32_t page_size() const { return page_size_; }
    std::uint64_t content_seed() const { return content_seed_; }
    std::uint64_t vmm_state_len() const { return vmm_state_len_; }
    std::uint64_t guest_mem_len() const { return num_pages_ * page_size_; }
    std::uint64_t checksum() const { return checksum_; }
    std::string id() const { return to_hex16(checksum_); }

    // Copies page `index` into `dst` (page_size bytes). Reads the backing
    // file when the image was loaded from disk, otherwise regenerates.
    void read_page(std::uint64_t index, std::uint8_t* dst) const;
    std::vector<std::uint8_t> page(std::uint64_t index) const;

    const std::optional<std::filesystem::path>& backing_dir() const {
        return backing_dir_;
    }

private:
    friend SnapshotImage read_image(const std::filesystem::path&);
    friend void write_image(const SnapshotImage&, const std::filesystem::path&);
    friend SnapshotImage create_synthetic_image(const std::filesystem::path&,
                                                std::uint64_t, std::uint32_t,
                                                std::uint64_t, std::uint64_t);

    std::uint64_t num_pages_;
    std::uint32_t page_size_;
    std::uint64_t content_seed_;
    std::uint64_t vmm_state_len_;
    std::uint64_t checksum_ = 0;
    std::optional<std::filesystem::path> backing_dir_;
};

struct PageTrace {
    std::uint32_t page_size = kDefaultPageSize;
    std::string image_id;  // empty when unknown (e.g. a bare file just read)
    std::vector<std::uint64_t> offsets;  // byte offsets, fault order

    std::size_t count() const { return offsets.size(); }
    std::uint64_t page_at(std::size_t i) const { return offsets[i] / page_size; }

    static PageTrace from_pages(const std::vector<std::uint64_t>& pages,
                                std::uint32_t page_size,
                                std::string image_id = {});

    // Throws FormatError on misaligned or duplicate offsets.
    void validate() const;
};

struct WorkingSet {
    PageTrace trace;
    std::vector<std::uint8_t> pages;  // trace.count() x page_size bytes

    std::uint64_t payload_bytes() const { return pages.size(); }
};

struct WsValidation {
    enum class Status { Ok, Mismatch, Structural };
    Status status = Status::Ok;
    std::optional<std::size_t> first_mismatch_index;
    std::string detail;

    bool ok() const { return status == Status::Ok; }
};

// ---- images ----------------------------------------------------------------

SnapshotImage make_synthetic_image(std::uint64_t num_pages,
                                   std::uint32_t page_size,
                                   std::uint64_t content_seed,
                                   std::uint64_t vmm_state_len);

// make + persist under dir (created if absent).
SnapshotImage create_synthetic_image(const std::filesystem::path& dir,
                                     std::uint64_t num_pages,
                                     std::uint32_t page_size,
                                     std::uint64_t content_seed,
                                     std::uint64_t vmm_state_len);

void write_image(const SnapshotImage& image, const std::filesystem::path& dir);
SnapshotImage read_image(const std::filesystem::path& dir);

// ---- traces ----------------------------------------------------------------

void write_trace(const PageTrace& trace, const std::filesystem::path& path);
PageTrace read_trace(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_trace(const PageTrace& trace);
PageTrace decode_trace(const std::uint8_t* data, std::size_t len);

// ---- working sets ----------------------------------------------------------

WorkingSet build_working_set(const SnapshotImage& image, const PageTrace& trace);

void write_working_set(const WorkingSet& ws, const std::filesystem::path& path);
WorkingSet read_working_set(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_working_set(const WorkingSet& ws);
WorkingSet decode_working_set(const std::uint8_t* data, std::size_t len);

// Checks every WS page against the image pages named by the trace.
// Structural problems (count/page_size disagreement) are reported as
// Structural, not as a content mismatch.
WsValidation validate_working_set(const SnapshotImage& image,
                                  const PageTrace& trace, const WorkingSet& ws);

}  // namespace reapsnap
