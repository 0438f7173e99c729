#include "reapsnap/snapshot_store.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

namespace reapsnap {

namespace fs = std::filesystem;

namespace {

constexpr char kTraceMagic[4] = {'R', 'P', 'T', 'R'};
constexpr char kWsMagic[4] = {'R', 'P', 'W', 'S'};
constexpr std::size_t kHeaderLen = 4 + 2 + 2 + 4 + 8;

void write_file(const fs::path& path, const std::uint8_t* data, std::size_t len) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw FormatError(FormatIssue::IoError, "cannot open for write: " + path.string());
    }
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(len));
    if (!out) {
        throw FormatError(FormatIssue::IoError, "short write: " + path.string());
    }
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) {
        throw FormatError(FormatIssue::IoError, "cannot open: " + path.string());
    }
    auto len = static_cast<std::size_t>(in.tellg());
    std::vector<std::uint8_t> buf(len);
    in.seekg(0);
    if (len > 0) {
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(len));
        if (!in) {
            throw FormatError(FormatIssue::IoError, "short read: " + path.string());
        }
    }
    return buf;
}

// Shared header checks for both formats. Returns (page_size, count).
std::pair<std::uint32_t, std::uint64_t> decode_header(const std::uint8_t* data,
                                                      std::size_t len,
                                                      const char magic[4],
                                                      std::uint16_t version,
                                                      const char* what) {
    if (len < kHeaderLen) {
        throw FormatError(FormatIssue::Truncated,
                          std::string(what) + " shorter than header");
    }
    if (std::memcmp(data, magic, 4) != 0) {
        throw FormatError(FormatIssue::BadMagic, std::string(what) + " magic");
    }
    std::uint16_t ver = get_u16le(data + 4);
    if (ver != version) {
        throw FormatError(FormatIssue::BadVersion,
                          std::string(what) + " version " + std::to_string(ver));
    }
    std::uint16_t reserved = get_u16le(data + 6);
    if (reserved != 0) {
        throw FormatError(FormatIssue::BadReserved,
                          std::string(what) + " reserved=" + std::to_string(reserved));
    }
    std::uint32_t page_size = get_u32le(data + 8);
    if (!valid_page_size(page_size)) {
        throw FormatError(FormatIssue::BadPageSize,
                          std::string(what) + " page_size=" + std::to_string(page_size));
    }
    std::uint64_t count = get_u64le(data + 12);
    return {page_size, count};
}

}  // namespace

bool valid_page_size(std::uint32_t page_size) {
    return page_size >= 512 && (page_size & (page_size - 1)) == 0;
}

// ---- SnapshotImage ----------------------------------------------------------

SnapshotImage::SnapshotImage(std::uint64_t num_pages, std::uint32_t page_size,
                             std::uint64_t content_seed, std::uint64_t vmm_state_len)
    : num_pages_(num_pages),
      page_size_(page_size),
      content_seed_(content_seed),
      vmm_state_len_(vmm_state_len) {
    if (num_pages == 0) {
        throw std::invalid_argument("image must have at least one page");
    }
    if (!valid_page_size(page_size)) {
        throw std::invalid_argument("page size must be a power of two >= 512");
    }
    if (num_pages > UINT64_MAX / page_size) {
        throw std::invalid_argument("image size overflows");
    }
    std::vector<std::uint8_t> buf(page_size_);
    std::uint64_t state = kFnvOffset;
    for (std::uint64_t p = 0; p < num_pages_; ++p) {
        fill_page(content_seed_, p, buf.data(), page_size_);
        state = fnv1a64(buf.data(), page_size_, state);
    }
    checksum_ = state;
}

void SnapshotImage::read_page(std::uint64_t index, std::uint8_t* dst) const {
    if (index >= num_pages_) {
        throw std::invalid_argument("page index out of range: " + std::to_string(index));
    }
    if (backing_dir_) {
        std::ifstream in(*backing_dir_ / "guest_mem.bin", std::ios::binary);
        if (!in) {
            throw FormatError(FormatIssue::IoError,
                              "cannot open guest_mem.bin under " + backing_dir_->string());
        }
        in.seekg(static_cast<std::streamoff>(index * page_size_));
        in.read(reinterpret_cast<char*>(dst), page_size_);
        if (!in) {
            throw FormatError(FormatIssue::Truncated, "guest_mem.bin ends early");
        }
        return;
    }
    fill_page(content_seed_, index, dst, page_size_);
}

std::vector<std::uint8_t> SnapshotImage::page(std::uint64_t index) const {
    std::vector<std::uint8_t> buf(page_size_);
    read_page(index, buf.data());
    return buf;
}

SnapshotImage make_synthetic_image(std::uint64_t num_pages, std::uint32_t page_size,
                                   std::uint64_t content_seed,
                                   std::uint64_t vmm_state_len) {
    return SnapshotImage(num_pages, page_size, content_seed, vmm_state_len);
}

void write_image(const SnapshotImage& image, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw FormatError(FormatIssue::IoError,
                          "cannot create " + dir.string() + ": " + ec.message());
    }

    {
        std::ofstream out(dir / "guest_mem.bin", std::ios::binary | std::ios::trunc);
        if (!out) {
            throw FormatError(FormatIssue::IoError, "cannot write guest_mem.bin");
        }
        std::vector<std::uint8_t> buf(image.page_size());
        for (std::uint64_t p = 0; p < image.num_pages(); ++p) {
            fill_page(image.content_seed(), p, buf.data(), image.page_size());
            out.write(reinterpret_cast<const char*>(buf.data()), image.page_size());
        }
        if (!out) {
            throw FormatError(FormatIssue::IoError, "short write: guest_mem.bin");
        }
    }
    {
        std::ofstream out(dir / "vmm_state.bin", std::ios::binary | std::ios::trunc);
        if (!out) {
            throw FormatError(FormatIssue::IoError, "cannot write vmm_state.bin");
        }
        std::vector<std::uint8_t> buf(64 * 1024);
        std::uint64_t remaining = image.vmm_state_len();
        std::uint64_t block = 0;
        while (remaining > 0) {
            std::size_t n = static_cast<std::size_t>(
                std::min<std::uint64_t>(remaining, buf.size()));
            for (std::size_t off = 0; off < n; off += 8) {
                std::uint64_t w = content_word(image.content_seed() ^ 0x5653544154455631ull,
                                               block, off / 8);
                std::memcpy(buf.data() + off, &w, std::min<std::size_t>(8, n - off));
            }
            out.write(reinterpret_cast<const char*>(buf.data()),
                      static_cast<std::streamsize>(n));
            remaining -= n;
            ++block;
        }
        if (!out) {
            throw FormatError(FormatIssue::IoError, "short write: vmm_state.bin");
        }
    }
    {
        std::ofstream out(dir / "meta");
        if (!out) {
            throw FormatError(FormatIssue::IoError, "cannot write meta");
        }
        out << "page_size=" << image.page_size() << "\n"
            << "num_pages=" << image.num_pages() << "\n"
            << "content_seed=" << image.content_seed() << "\n"
            << "checksum=" << to_hex16(image.checksum()) << "\n";
        if (!out) {
            throw FormatError(FormatIssue::IoError, "short write: meta");
        }
    }
}

SnapshotImage create_synthetic_image(const fs::path& dir, std::uint64_t num_pages,
                                     std::uint32_t page_size,
                                     std::uint64_t content_seed,
                                     std::uint64_t vmm_state_len) {
    SnapshotImage image = make_synthetic_image(num_pages, page_size, content_seed,
                                               vmm_state_len);
    write_image(image, dir);
    image.backing_dir_ = dir;
    return image;
}

SnapshotImage read_image(const fs::path& dir) {
    std::ifstream meta(dir / "meta");
    if (!meta) {
        throw FormatError(FormatIssue::IoError, "cannot open meta under " + dir.string());
    }
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(meta, line)) {
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw FormatError(FormatIssue::BadField, "meta line without '=': " + line);
        }
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    for (const char* key : {"page_size", "num_pages", "content_seed", "checksum"}) {
        if (!kv.count(key)) {
            throw FormatError(FormatIssue::BadField, std::string("meta missing ") + key);
        }
    }

    std::uint32_t page_size = 0;
    std::uint64_t num_pages = 0, seed = 0;
    try {
        page_size = static_cast<std::uint32_t>(std::stoul(kv["page_size"]));
        num_pages = std::stoull(kv["num_pages"]);
        seed = std::stoull(kv["content_seed"]);
    } catch (const std::exception&) {
        throw FormatError(FormatIssue::BadField, "non-numeric meta field");
    }
    if (!valid_page_size(page_size)) {
        throw FormatError(FormatIssue::BadPageSize, kv["page_size"]);
    }

    std::error_code ec;
    std::uint64_t mem_len = fs::file_size(dir / "guest_mem.bin", ec);
    if (ec) {
        throw FormatError(FormatIssue::IoError, "missing guest_mem.bin");
    }
    if (mem_len != num_pages * page_size) {
        throw FormatError(FormatIssue::Truncated, "guest_mem.bin length mismatch");
    }
    std::uint64_t vmm_len = fs::file_size(dir / "vmm_state.bin", ec);
    if (ec) {
        throw FormatError(FormatIssue::IoError, "missing vmm_state.bin");
    }

    SnapshotImage image(num_pages, page_size, seed, vmm_len);
    std::uint64_t expect = parse_hex16(kv["checksum"]);
    // Verify the declared checksum against the actual file contents.
    {
        std::ifstream in(dir / "guest_mem.bin", std::ios::binary);
        std::vector<std::uint8_t> buf(1 << 20);
        std::uint64_t state = kFnvOffset;
        while (in) {
            in.read(reinterpret_cast<char*>(buf.data()),
                    static_cast<std::streamsize>(buf.size()));
            std::streamsize got = in.gcount();
            if (got > 0) state = fnv1a64(buf.data(), static_cast<std::size_t>(got), state);
        }
        if (state != expect) {
            throw FormatError(FormatIssue::BadField, "guest_mem.bin checksum mismatch");
        }
    }
    if (image.checksum() != expect) {
        throw FormatError(FormatIssue::BadField,
                          "checksum does not match content_seed regeneration");
    }
    image.backing_dir_ = dir;
    return image;
}

// ---- PageTrace ---------------------------------------------------------------

PageTrace PageTrace::from_pages(const std::vector<std::uint64_t>& pages,
                                std::uint32_t page_size, std::string image_id) {
    PageTrace t;
    t.page_size = page_size;
    t.image_id = std::move(image_id);
    t.offsets.reserve(pages.size());
    for (std::uint64_t p : pages) t.offsets.push_back(p * page_size);
    return t;
}

void PageTrace::validate() const {
    if (!valid_page_size(page_size)) {
        throw FormatError(FormatIssue::BadPageSize, std::to_string(page_size));
    }
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(offsets.size() * 2);
    for (std::uint64_t off : offsets) {
        if (off % page_size != 0) {
            throw FormatError(FormatIssue::MisalignedOffset, std::to_string(off));
        }
        if (!seen.insert(off).second) {
            throw FormatError(FormatIssue::DuplicateOffset, std::to_string(off));
        }
    }
}

std::vector<std::uint8_t> encode_trace(const PageTrace& trace) {
    trace.validate();
    std::vector<std::uint8_t> buf(kHeaderLen + trace.offsets.size() * 8);
    std::memcpy(buf.data(), kTraceMagic, 4);
    put_u16le(buf.data() + 4, kTraceVersion);
    put_u16le(buf.data() + 6, 0);
    put_u32le(buf.data() + 8, trace.page_size);
    put_u64le(buf.data() + 12, trace.offsets.size());
    for (std::size_t i = 0; i < trace.offsets.size(); ++i) {
        put_u64le(buf.data() + kHeaderLen + i * 8, trace.offsets[i]);
    }
    return buf;
}

PageTrace decode_trace(const std::uint8_t* data, std::size_t len) {
    auto [page_size, count] = decode_header(data, len, kTraceMagic, kTraceVersion, "trace");
    if (count > (len - kHeaderLen) / 8) {
        throw FormatError(FormatIssue::Truncated,
                          "trace promises " + std::to_string(count) + " offsets");
    }
    if (len != kHeaderLen + count * 8) {
        throw FormatError(FormatIssue::TrailingBytes,
                          "trace has bytes past the offset array");
    }
    PageTrace t;
    t.page_size = page_size;
    t.offsets.reserve(count);
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(count * 2);
    for (std::uint64_t i = 0; i < count; ++i) {
        std::uint64_t off = get_u64le(data + kHeaderLen + i * 8);
        if (off % page_size != 0) {
            throw FormatError(FormatIssue::MisalignedOffset, std::to_string(off));
        }
        if (!seen.insert(off).second) {
            throw FormatError(FormatIssue::DuplicateOffset, std::to_string(off));
        }
        t.offsets.push_back(off);
    }
    return t;
}

void write_trace(const PageTrace& trace, const fs::path& path) {
    auto buf = encode_trace(trace);
    write_file(path, buf.data(), buf.size());
}

PageTrace read_trace(const fs::path& path) {
    auto buf = read_file(path);
    return decode_trace(buf.data(), buf.size());
}

// ---- WorkingSet ----------------------------------------------------------------

WorkingSet build_working_set(const SnapshotImage& image, const PageTrace& trace) {
    trace.validate();
    if (trace.page_size != image.page_size()) {
        throw FormatError(FormatIssue::BadPageSize,
                          "trace page size differs from image");
    }
    if (!trace.image_id.empty() && trace.image_id != image.id()) {
        throw std::invalid_argument("trace belongs to a different image: " +
                                    trace.image_id);
    }
    WorkingSet ws;
    ws.trace = trace;
    ws.pages.resize(trace.count() * image.page_size());
    for (std::size_t i = 0; i < trace.count(); ++i) {
        std::uint64_t off = trace.offsets[i];
        if (off >= image.guest_mem_len()) {
            throw FormatError(FormatIssue::OffsetOutOfRange, std::to_string(off));
        }
        image.read_page(off / image.page_size(),
                        ws.pages.data() + i * image.page_size());
    }
    return ws;
}

std::vector<std::uint8_t> encode_working_set(const WorkingSet& ws) {
    ws.trace.validate();
    std::uint32_t page_size = ws.trace.page_size;
    if (ws.pages.size() != ws.trace.count() * page_size) {
        throw std::invalid_argument("working set payload does not match trace count");
    }
    // Header block padded to the payload alignment boundary.
    std::size_t header_block = ((kHeaderLen + page_size - 1) / page_size) * page_size;
    std::vector<std::uint8_t> buf(header_block + ws.pages.size(), 0);
    std::memcpy(buf.data(), kWsMagic, 4);
    put_u16le(buf.data() + 4, kWorkingSetVersion);
    put_u16le(buf.data() + 6, 0);
    put_u32le(buf.data() + 8, page_size);
    put_u64le(buf.data() + 12, ws.trace.count());
    std::memcpy(buf.data() + header_block, ws.pages.data(), ws.pages.size());
    return buf;
}

WorkingSet decode_working_set(const std::uint8_t* data, std::size_t len) {
    auto [page_size, count] =
        decode_header(data, len, kWsMagic, kWorkingSetVersion, "working set");
    std::size_t header_block = ((kHeaderLen + page_size - 1) / page_size) * page_size;
    if (count > (UINT64_MAX - header_block) / page_size) {
        throw FormatError(FormatIssue::Truncated, "working set count overflows");
    }
    if (len < header_block + count * page_size) {
        throw FormatError(FormatIssue::Truncated,
                          "working set promises " + std::to_string(count) + " pages");
    }
    if (len != header_block + count * page_size) {
        throw FormatError(FormatIssue::TrailingBytes,
                          "working set has bytes past the page payload");
    }
    WorkingSet ws;
    ws.trace.page_size = page_size;
    // Offsets are not stored in the WS file; the paired trace carries them.
    ws.pages.assign(data + header_block, data + len);
    ws.trace.offsets.clear();
    return ws;
}

void write_working_set(const WorkingSet& ws, const fs::path& path) {
    auto buf = encode_working_set(ws);
    write_file(path, buf.data(), buf.size());
}

WorkingSet read_working_set(const fs::path& path) {
    auto buf = read_file(path);
    return decode_working_set(buf.data(), buf.size());
}

WsValidation validate_working_set(const SnapshotImage& image, const PageTrace& trace,
                                  const WorkingSet& ws) {
    WsValidation v;
    if (trace.page_size != image.page_size()) {
        v.status = WsValidation::Status::Structural;
        v.detail = "trace page size differs from image";
        return v;
    }
    if (ws.trace.page_size != trace.page_size) {
        v.status = WsValidation::Status::Structural;
        v.detail = "working set page size differs from trace";
        return v;
    }
    if (ws.pages.size() != trace.count() * trace.page_size) {
        v.status = WsValidation::Status::Structural;
        v.detail = "working set holds " +
                   std::to_string(ws.pages.size() / trace.page_size) +
                   " pages, trace names " + std::to_string(trace.count());
        return v;
    }
    try {
        trace.validate();
    } catch (const FormatError& e) {
        v.status = WsValidation::Status::Structural;
        v.detail = e.what();
        return v;
    }
    std::vector<std::uint8_t> expect(image.page_size());
    for (std::size_t i = 0; i < trace.count(); ++i) {
        std::uint64_t off = trace.offsets[i];
        if (off >= image.guest_mem_len()) {
            v.status = WsValidation::Status::Structural;
            v.detail = "trace offset out of range: " + std::to_string(off);
            return v;
        }
        image.read_page(off / image.page_size(), expect.data());
        if (std::memcmp(expect.data(), ws.pages.data() + i * image.page_size(),
                        image.page_size()) != 0) {
            v.status = WsValidation::Status::Mismatch;
            v.first_mismatch_index = i;
            v.detail = "page content differs at trace index " + std::to_string(i);
            return v;
        }
    }
    return v;
}

}  // namespace reapsnap
