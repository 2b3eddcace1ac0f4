#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

namespace aznas {

// splitmix64 finalizer; full 64-bit avalanche.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t hash_str(std::string_view s) {
    // FNV-1a, then finalized.
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return mix64(h);
}

// Counter-based keyed random stream. Values are addressed by a counter, so two
// evaluations that touch disjoint counters never interact and any draw can be
// reproduced without replaying the stream.
class CounterRng {
public:
    CounterRng() : base_(mix64(0)) {}
    explicit CounterRng(std::uint64_t seed) : base_(mix64(seed)) {}

    // Derive an independent stream keyed by `k`.
    CounterRng keyed(std::uint64_t k) const {
        CounterRng r;
        r.base_ = mix64(base_ ^ mix64(k + 0x9e3779b97f4a7c15ull));
        return r;
    }
    CounterRng keyed(std::string_view name) const { return keyed(hash_str(name)); }

    std::uint64_t bits(std::uint64_t counter) const {
        return mix64(base_ + counter * 0x9e3779b97f4a7c15ull);
    }

    // Uniform in [0, 1).
    double uniform01(std::uint64_t counter) const {
        return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; draw i consumes counters 2i and 2i+1.
    double gaussian(std::uint64_t counter) const {
        const double u1 =
            (static_cast<double>(bits(2 * counter) >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
        const double u2 =
            static_cast<double>(bits(2 * counter + 1) >> 11) * 0x1.0p-53;  // [0, 1)
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    double rademacher(std::uint64_t counter) const {
        return (bits(counter) & 1ull) ? 1.0 : -1.0;
    }

private:
    std::uint64_t base_;
};

// Sequential convenience wrapper over CounterRng for loops that just want the
// next value (mutation, elite picks, subsampling).
class SeqRng {
public:
    SeqRng() = default;
    explicit SeqRng(std::uint64_t seed) : stream_(seed) {}
    explicit SeqRng(const CounterRng& stream) : stream_(stream) {}

    std::uint64_t next_bits() { return stream_.bits(counter_++); }
    double uniform01() { return static_cast<double>(next_bits() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n). Lemire multiply-shift; bias is O(n / 2^64).
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_bits()) * n) >> 64);
    }

private:
    CounterRng stream_;
    std::uint64_t counter_ = 0;
};

}  // namespace aznas
