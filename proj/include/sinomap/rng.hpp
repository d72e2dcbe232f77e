#pragma once

#include <cstdint>
#include <vector>

namespace sinomap {

/// One splitmix64 step; advances the state and returns the next word.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Derive an independent stream seed from a base seed and a stream tag.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t s = seed ^ (0x9e3779b97f4a7c15ull * (tag + 1));
    splitmix64(s);
    return splitmix64(s);
}

/// Counter-based random stream keyed by (seed, entry index). Entries of a
/// field can be sampled independently and in any order with identical
/// results, so entrywise parallel sampling stays deterministic.
class EntryRng {
public:
    EntryRng(std::uint64_t seed, std::uint64_t entry) {
        state_ = seed ^ (entry * 0xd1342543de82ef95ull + 0x2545f4914f6cdd1dull);
        splitmix64(state_);
        splitmix64(state_);
    }

    std::uint64_t next_u64() { return splitmix64(state_); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in (0, 1]; safe as a logarithm argument.
    double uniform_pos() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller (one value per two uniforms).
    double normal();

    /// Exact Poisson sample: inversion below mean 10, PTRS rejection above.
    std::uint64_t poisson(double mean);

private:
    std::uint64_t state_ = 0;
};

/// Sequential generator for shuffles and initialization; deterministic
/// across platforms (never relies on std::shuffle internals).
class SeqRng {
public:
    explicit SeqRng(std::uint64_t seed) : state_(seed) {
        splitmix64(state_);
        splitmix64(state_);
    }

    std::uint64_t next_u64() { return splitmix64(state_); }
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [a, b).
    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return n ? next_u64() % n : 0; }

    /// In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_ = 0;
};

}  // namespace sinomap
