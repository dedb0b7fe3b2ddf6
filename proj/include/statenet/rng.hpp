#pragma once

#include <cstdint>
#include <random>

namespace statenet {

namespace detail {
// splitmix64; used to derive independent stream seeds from one root seed.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}
} // namespace detail

// Deterministic PRNG threaded explicitly through everything that draws
// randomness. Uniform doubles are produced from raw mt19937_64 output rather
// than std::uniform_real_distribution, whose mapping is
// implementation-defined; every draw here is reproducible from the seed on
// any conforming standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), gen_(detail::mix64(seed)) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). n must be positive. Uses 128-bit multiply
    // rejection-free mapping (Lemire); bias is < 2^-64, irrelevant here.
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    template <typename V>
    void shuffle(V& v) {
        if (v.size() < 2) return;
        for (std::size_t i = v.size() - 1; i > 0; --i) {
            std::size_t j = static_cast<std::size_t>(below(i + 1));
            std::swap(v[i], v[j]);
        }
    }

    // Independent child stream; forking with the same id always yields the
    // same stream regardless of how much this generator has been consumed.
    Rng fork(std::uint64_t stream_id) const {
        return Rng(detail::mix64(seed_ ^ detail::mix64(stream_id + 1)));
    }

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 gen_;
};

} // namespace statenet
