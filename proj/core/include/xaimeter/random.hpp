#pragma once

#include <cstddef>
#include <cstdint>

namespace xaimeter {

/// SplitMix64 step; used both as a standalone mixer and to expand seeds.
std::uint64_t splitmix64(std::uint64_t& state);

/// One-shot mix of a value through SplitMix64.
std::uint64_t mix64(std::uint64_t value);

/// Derives a child stream id from a parent id and a tag. Chained calls give
/// hierarchical, order-independent substream ids.
std::uint64_t derive_stream(std::uint64_t parent, std::uint64_t tag);

/// FNV-1a 64-bit hash, used for checksums and explainer-id stream tags.
std::uint64_t fnv1a64(const void* data, std::size_t length);
std::uint64_t fnv1a64_str(const char* str);

/// Deterministic random stream. A given (seed, stream_id) pair reproduces the
/// identical draw sequence on every platform: the generator (xoshiro256**)
/// and every distribution transform are implemented here rather than taken
/// from <random>, whose distribution outputs are implementation-defined.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t stream_id);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

    std::uint64_t next_u64();

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform01();
    /// Uniform in (0, 1).
    double uniform_open01();
    /// Uniform in [lo, hi).
    double uniform(double lo, double hi);
    /// Uniform integer in [lo, hi], inclusive, unbiased.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
    /// Standard Gaussian via Box-Muller (one spare cached).
    double normal();

    /// Independent child stream; same (seed, tag) always yields the same child.
    RandomStream substream(std::uint64_t tag) const;

private:
    std::uint64_t seed_ = 0;
    std::uint64_t stream_id_ = 0;
    std::uint64_t state_[4] = {};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace xaimeter
