#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <vector>

#include "reapsnap/common.hpp"
#include "reapsnap/disk_model.hpp"

namespace reapsnap {

namespace {

constexpr std::uint64_t kMinFileBytes = 64 * kMiB;
constexpr std::uint64_t kBlock = 4096;
constexpr std::uint64_t kSmallReadBudget = 16 * kMiB;   // per serial 4K run
constexpr std::uint64_t kBulkChunk = kMiB;

struct Fd {
    int fd = -1;
    ~Fd() {
        if (fd >= 0) ::close(fd);
    }
};

std::uint64_t file_size_checked(const std::filesystem::path& file, int fd) {
    struct stat st{};
    if (::fstat(fd, &st) != 0)
        throw std::runtime_error("fstat failed on " + file.string() + ": " +
                                 std::strerror(errno));
    if (!S_ISREG(st.st_mode))
        throw std::invalid_argument(file.string() + " is not a regular file");
    const auto size = static_cast<std::uint64_t>(st.st_size);
    if (size < kMinFileBytes)
        throw std::invalid_argument(
            file.string() + " is too small for measurement (" +
            std::to_string(size) + " bytes, need at least " +
            std::to_string(kMinFileBytes) + ")");
    return size;
}

void pread_fully(int fd, std::uint8_t* buf, std::size_t n, std::uint64_t off) {
    std::size_t done = 0;
    while (done < n) {
        ssize_t r = ::pread(fd, buf + done, n - done, static_cast<off_t>(off + done));
        if (r < 0) {
            if (errno == EINTR) continue;
            throw std::runtime_error(std::string("pread failed: ") +
                                     std::strerror(errno));
        }
        if (r == 0) throw std::runtime_error("unexpected end of file during pread");
        done += static_cast<std::size_t>(r);
    }
}

// 4 KiB reads at uniformly random block offsets; one seed per worker keeps
// repeat runs comparable.
std::uint64_t random_small_reads(int fd, std::uint64_t file_bytes,
                                 std::uint64_t budget, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::uint8_t> buf(kBlock);
    const std::uint64_t blocks = file_bytes / kBlock;
    std::uint64_t total = 0;
    while (total < budget) {
        const std::uint64_t off = rng.below(blocks) * kBlock;
        pread_fully(fd, buf.data(), kBlock, off);
        total += kBlock;
    }
    return total;
}

}  // namespace

DiskMeasurement measure_real(const std::filesystem::path& file, DiskPattern pattern,
                             unsigned parallelism) {
    if (parallelism == 0) throw std::invalid_argument("parallelism must be positive");

    int flags = O_RDONLY;
#ifdef O_DIRECT
    if (pattern == DiskPattern::BulkBypass) flags |= O_DIRECT;
#else
    if (pattern == DiskPattern::BulkBypass)
        throw std::runtime_error(
            "bulk_bypass is unsupported on this platform: O_DIRECT is not available");
#endif

    Fd f;
    f.fd = ::open(file.c_str(), flags);
    if (f.fd < 0) {
        if (pattern == DiskPattern::BulkBypass && (errno == EINVAL || errno == ENOTSUP))
            throw std::runtime_error(
                "bulk_bypass is unsupported here: " + file.string() +
                " cannot be opened with O_DIRECT (" + std::strerror(errno) + ")");
        throw std::runtime_error("cannot open " + file.string() + ": " +
                                 std::strerror(errno));
    }
    const std::uint64_t file_bytes = file_size_checked(file, f.fd);

    std::uint64_t bytes = 0;
    const auto t0 = std::chrono::steady_clock::now();

    switch (pattern) {
        case DiskPattern::Serial4K:
            bytes = random_small_reads(f.fd, file_bytes, kSmallReadBudget, 42);
            break;

        case DiskPattern::Parallel4K: {
            std::vector<std::thread> workers;
            std::vector<Fd> fds(parallelism);
            std::atomic<std::uint64_t> total{0};
            std::exception_ptr failure;
            std::mutex failure_mu;
            for (unsigned w = 0; w < parallelism; ++w) {
                fds[w].fd = ::open(file.c_str(), O_RDONLY);
                if (fds[w].fd < 0)
                    throw std::runtime_error("cannot reopen " + file.string() + ": " +
                                             std::strerror(errno));
            }
            for (unsigned w = 0; w < parallelism; ++w) {
                workers.emplace_back([&, w] {
                    try {
                        total += random_small_reads(fds[w].fd, file_bytes,
                                                    kSmallReadBudget / parallelism +
                                                        kBlock,
                                                    1000 + w);
                    } catch (...) {
                        std::lock_guard<std::mutex> lock(failure_mu);
                        if (!failure) failure = std::current_exception();
                    }
                });
            }
            for (auto& t : workers) t.join();
            if (failure) std::rethrow_exception(failure);
            bytes = total.load();
            break;
        }

        case DiskPattern::Bulk: {
            std::vector<std::uint8_t> buf(kBulkChunk);
            for (std::uint64_t off = 0; off + kBulkChunk <= file_bytes;
                 off += kBulkChunk) {
                pread_fully(f.fd, buf.data(), kBulkChunk, off);
                bytes += kBulkChunk;
            }
            break;
        }

        case DiskPattern::BulkBypass: {
            void* raw = nullptr;
            if (posix_memalign(&raw, 4096, kBulkChunk) != 0)
                throw std::runtime_error("posix_memalign failed");
            std::unique_ptr<void, decltype(&std::free)> guard(raw, &std::free);
            auto* buf = static_cast<std::uint8_t*>(raw);
            for (std::uint64_t off = 0; off + kBulkChunk <= file_bytes;
                 off += kBulkChunk) {
                try {
                    pread_fully(f.fd, buf, kBulkChunk, off);
                } catch (const std::runtime_error& e) {
                    throw std::runtime_error(
                        std::string("bulk_bypass is unsupported here: direct read "
                                    "failed (") +
                        e.what() + ")");
                }
                bytes += kBulkChunk;
            }
            break;
        }
    }

    const auto t1 = std::chrono::steady_clock::now();
    DiskMeasurement m;
    m.pattern = pattern;
    m.bytes_read = bytes;
    m.seconds = std::chrono::duration<double>(t1 - t0).count();
    if (m.seconds > 0.0)
        m.mbps = static_cast<double>(bytes) / static_cast<double>(kMiB) / m.seconds;
    return m;
}

}  // namespace reapsnap
