#ifndef VRPF_RNG_HPP
#define VRPF_RNG_HPP

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "vrpf/errors.hpp"
#include "vrpf/linalg.hpp"

// Deterministic, seedable randomness split into named independent streams.
// Every stream is a PCG32 generator whose (state, sequence) keys are hashed
// from (seed, label[, particle, time]), so a draw sequence depends only on
// that tuple and never on what other streams have consumed. This is what
// makes the M=0 reductions bit-exact: skipping a rejection or race draw
// cannot perturb any other stream.

namespace vrpf {

namespace detail {

// splitmix64 finalizer; full 64-bit avalanche.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

inline std::uint64_t key_chain(std::uint64_t key, std::uint64_t value) {
    return mix64(key ^ (value + 0x9E3779B97F4A7C15ULL + (key << 6) + (key >> 2)));
}

}  // namespace detail

/// One independent PCG32 draw stream. Value semantics: copying a Stream
/// snapshots its state, which tests use to check isolation contracts.
class Stream {
public:
    Stream() : Stream(0, 0) {}

    Stream(std::uint64_t state_key, std::uint64_t seq_key) {
        inc_ = (seq_key << 1u) | 1u;
        state_ = 0;
        next_u32();
        state_ += state_key;
        next_u32();
    }

    std::uint32_t next_u32() {
        const std::uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        const std::uint32_t xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
        const std::uint32_t rot = static_cast<std::uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
    }

    /// Uniform draw in (0,1) ⊂ [0,1); never returns an exact endpoint.
    double uniform() {
        constexpr double inv = 1.0 / 4294967296.0;
        return (static_cast<double>(next_u32()) + 0.5) * inv;
    }

    /// Standard normal via Box-Muller. Consumes exactly two uniforms per
    /// call (no spare caching), so stream consumption is call-countable.
    double normal() {
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return r * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    Vec normal_vec(std::size_t d) {
        Vec v(d);
        for (std::size_t i = 0; i < d; ++i) v[i] = normal();
        return v;
    }

    friend bool operator==(const Stream& a, const Stream& b) {
        return a.state_ == b.state_ && a.inc_ == b.inc_;
    }

private:
    std::uint64_t state_;
    std::uint64_t inc_;
};

/// Pure derivation of an independent stream from (seed, label).
inline Stream derive_stream(std::uint64_t seed, std::string_view label) {
    const std::uint64_t h = detail::fnv1a64(label);
    const std::uint64_t k1 = detail::key_chain(detail::mix64(seed), h);
    const std::uint64_t k2 = detail::key_chain(h ^ 0xA5A5A5A55A5A5A5AULL, detail::mix64(seed));
    return Stream(k1, k2);
}

/// Pure derivation of a per-(particle, time) sub-stream; used when particle
/// propagation fans out across workers.
inline Stream derive_stream(std::uint64_t seed, std::string_view label, std::uint64_t particle,
                            std::uint64_t time) {
    const std::uint64_t h = detail::fnv1a64(label);
    std::uint64_t k1 = detail::key_chain(detail::mix64(seed), h);
    k1 = detail::key_chain(k1, particle);
    k1 = detail::key_chain(k1, time);
    std::uint64_t k2 = detail::key_chain(h ^ 0xA5A5A5A55A5A5A5AULL, detail::mix64(seed));
    k2 = detail::key_chain(k2, time);
    k2 = detail::key_chain(k2, particle);
    return Stream(k1, k2);
}

/// Pure derivation of an independent 64-bit seed, e.g. one per replication.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    return detail::key_chain(detail::mix64(seed ^ 0x6C8E9CF570932BD5ULL), index);
}

/// A family of named independent streams sharing one master seed.
class StreamFamily {
public:
    StreamFamily(std::uint64_t seed, const std::vector<std::string>& labels) : seed_(seed) {
        for (const auto& label : labels) {
            auto [it, inserted] = streams_.emplace(label, derive_stream(seed, label));
            (void)it;
            if (!inserted) throw ConfigError("duplicate stream label: " + label);
        }
    }

    Stream& stream(std::string_view label) {
        auto it = streams_.find(label);
        if (it == streams_.end())
            throw ConfigError("unknown stream label: " + std::string(label));
        return it->second;
    }

    bool has(std::string_view label) const { return streams_.find(label) != streams_.end(); }

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::map<std::string, Stream, std::less<>> streams_;
};

/// Stream labels used by the estimators. Isolating each consumer on its own
/// label is what keeps skipped draws (M=0 short-circuits) from shifting
/// anything else.
inline const std::vector<std::string>& default_stream_labels() {
    static const std::vector<std::string> labels = {
        "data-sim", "proposal", "prc-uniform", "delta",
        "race-categorical", "race-coin", "emission-init",
    };
    return labels;
}

inline StreamFamily make_streams(std::uint64_t seed, const std::vector<std::string>& labels) {
    return StreamFamily(seed, labels);
}

inline StreamFamily make_default_streams(std::uint64_t seed) {
    return StreamFamily(seed, default_stream_labels());
}

}  // namespace vrpf

#endif  // VRPF_RNG_HPP
