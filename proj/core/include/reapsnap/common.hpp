#pragma once

// Shared low-level helpers: explicit little-endian packing for the on-disk
// formats, the keyed mixing function that defines synthetic page content,
// FNV-1a digests, and a deterministic RNG that does not depend on the
// standard library's implementation-defined distributions.

#include <cstdint>
#include <cstddef>
#include <cstring>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace reapsnap {

inline constexpr std::uint64_t kMiB = 1024ull * 1024ull;

// All throughput figures in this project are MiB/s; times are microseconds.
inline double us_for_bytes(double bytes, double mbps) {
    return bytes / (mbps * static_cast<double>(kMiB)) * 1e6;
}

inline double mbps_for(double bytes, double micros) {
    return bytes / (micros * 1e-6) / static_cast<double>(kMiB);
}

// ---- little-endian packing -------------------------------------------------

inline void put_u16le(std::uint8_t* p, std::uint16_t v) {
    p[0] = static_cast<std::uint8_t>(v);
    p[1] = static_cast<std::uint8_t>(v >> 8);
}

inline void put_u32le(std::uint8_t* p, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

inline void put_u64le(std::uint8_t* p, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

inline std::uint16_t get_u16le(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline std::uint32_t get_u32le(const std::uint8_t* p) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

inline std::uint64_t get_u64le(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

// ---- mixing / digests ------------------------------------------------------

inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// One 8-byte lane of synthetic page content. Pure in (seed, page, lane).
inline std::uint64_t content_word(std::uint64_t seed, std::uint64_t page,
                                  std::uint64_t lane) {
    return mix64(mix64(seed ^ (page * 0xd6e8feb86659fd93ull)) ^ lane);
}

// Fills a whole page; page_size must be a multiple of 8 (enforced by the
// store's power-of-two >= 512 rule).
inline void fill_page(std::uint64_t seed, std::uint64_t page, std::uint8_t* dst,
                      std::size_t page_size) {
    for (std::size_t off = 0; off < page_size; off += 8) {
        std::uint64_t w = content_word(seed, page, off / 8);
        std::memcpy(dst + off, &w, 8);
    }
}

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;

inline std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t n,
                             std::uint64_t state = kFnvOffset) {
    for (std::size_t i = 0; i < n; ++i) {
        state ^= data[i];
        state *= kFnvPrime;
    }
    return state;
}

inline std::string to_hex16(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

inline std::uint64_t parse_hex16(const std::string& s) {
    std::uint64_t v = 0;
    for (char c : s) {
        v <<= 4;
        if (c >= '0' && c <= '9') v |= static_cast<std::uint64_t>(c - '0');
        else if (c >= 'a' && c <= 'f') v |= static_cast<std::uint64_t>(c - 'a' + 10);
        else if (c >= 'A' && c <= 'F') v |= static_cast<std::uint64_t>(c - 'A' + 10);
        else throw std::invalid_argument("bad hex digit in checksum: " + s);
    }
    return v;
}

// ---- deterministic RNG -----------------------------------------------------

// splitmix64 sequence. Sampling helpers are hand-rolled so that results are
// identical on every platform and standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        state_ += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, bound); bound > 0. Rejection-free would bias; rejection
    // keeps it exact and still deterministic.
    std::uint64_t below(std::uint64_t bound) {
        std::uint64_t threshold = (0ull - bound) % bound;
        for (;;) {
            std::uint64_t r = next();
            if (r >= threshold) return r % bound;
        }
    }

    // Uniform double in [0, 1).
    double unit() { return (next() >> 11) * 0x1.0p-53; }

    // Geometric on {1, 2, ...} with mean m >= 1, via inverse CDF.
    std::uint64_t geometric(double mean) {
        if (mean <= 1.0) return 1;
        double p = 1.0 / mean;
        double u = unit();
        // smallest k >= 1 with 1-(1-p)^k >= u
        double k = std::ceil(std::log1p(-u) / std::log1p(-p));
        if (k < 1.0) k = 1.0;
        return static_cast<std::uint64_t>(k);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

}  // namespace reapsnap
