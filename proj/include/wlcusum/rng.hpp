#pragma once

#include <cstdint>
#include <random>

namespace wlcusum {

// SplitMix64 finalizer; used to derive well-separated engine seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Reproducible random stream identified by (root seed, stream index).
///
/// Streams for distinct indices are seeded from a SplitMix64 hash chain of
/// the pair, so trial k always sees the same numbers regardless of which
/// worker runs it or in what order.
class RngStream {
public:
    RngStream(std::uint64_t root_seed, std::uint64_t stream_index)
        : root_(root_seed), index_(stream_index) {
        const std::uint64_t a = splitmix64(root_seed);
        const std::uint64_t b = splitmix64(a ^ splitmix64(stream_index + 0x632be59bd9b4e019ULL));
        std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                          static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
        engine_.seed(seq);
    }

    std::uint64_t root_seed() const noexcept { return root_; }
    std::uint64_t stream_index() const noexcept { return index_; }

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    double exponential() { return exponential_(engine_); }
    bool coin() { return (engine_() >> 63) != 0; }

    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::uint64_t root_;
    std::uint64_t index_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
    std::exponential_distribution<double> exponential_{1.0};
};

}  // namespace wlcusum
