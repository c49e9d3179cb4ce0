#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace thinkrl {

/// Deterministic random stream. All sampling in the project goes through the
/// draw helpers below rather than std distributions, so the byte-level
/// behavior is pinned by this file alone.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1).
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n). Requires n >= 1.
    int uniform_int(int n) {
        auto wide = static_cast<unsigned __int128>(next_u64());
        return static_cast<int>((wide * static_cast<unsigned __int128>(n)) >> 64);
    }

    bool bernoulli(double p) { return uniform01() < p; }

    /// Index drawn from an explicit probability vector (need not be exactly
    /// normalized; the last bucket absorbs rounding slack).
    int categorical(std::span<const double> probs) {
        double u = uniform01();
        double cum = 0.0;
        for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
            cum += probs[i];
            if (u < cum) return static_cast<int>(i);
        }
        return static_cast<int>(probs.size()) - 1;
    }

private:
    std::mt19937_64 engine_;
};

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view s);

/// Order-sensitive seed derivation. Every independent random stream is keyed
/// by a path of labels/ids/indices mixed into a root seed, so adding or
/// reordering work elsewhere never perturbs an existing stream.
class SeedSeq {
public:
    explicit SeedSeq(std::uint64_t root) : state_(splitmix64(root)) {}

    SeedSeq& mix(std::uint64_t v) {
        state_ = splitmix64(state_ ^ splitmix64(v));
        return *this;
    }
    SeedSeq& mix(int v) { return mix(static_cast<std::uint64_t>(v)); }
    SeedSeq& mix(std::string_view s) { return mix(fnv1a64(s)); }

    std::uint64_t value() const { return state_; }
    RngStream stream() const { return RngStream(state_); }

private:
    std::uint64_t state_;
};

}  // namespace thinkrl
