#pragma once

#include <cstdint>
#include <vector>

namespace fluxfed {

// SplitMix64 step. seed 0 -> 0xE220A8397B1DCDAF on the first call.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Order-sensitive 64-bit combine built from the SplitMix64 output function.
// Used to derive independent child streams from (master seed, tags...).
std::uint64_t hash_combine64(std::uint64_t a, std::uint64_t b);

// Deterministic PRNG stream. Every stochastic component in the simulator draws
// from one of these; cross-run and cross-thread reproducibility hangs on it.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return splitmix64_next(state_); }

    // Uniform in [0, 1): value / 2^64.
    double next_real() {
        return static_cast<double>(next_u64()) * 0x1.0p-64;
    }

    // Uniform strictly inside (0, 1): (value + 0.5) / 2^64. Safe under log().
    double next_real_open() {
        return (static_cast<double>(next_u64()) + 0.5) * 0x1.0p-64;
    }

    // Unbiased integer in [0, n) via rejection.
    std::uint64_t next_index(std::uint64_t n);

    // Standard normal via Box-Muller; consumes exactly two uniforms per call.
    double next_gaussian();

    // Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_index(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

// Child-stream derivation: SplitMix64 seeded with master ^ hash(tags...).
// Streams for distinct (tag, k, r) never collide in practice; the client-k
// round-r training stream must not depend on mode or on other clients.
RngStream derive_stream(std::uint64_t master_seed, std::uint64_t tag);
RngStream derive_stream(std::uint64_t master_seed, std::uint64_t tag, std::uint64_t a);
RngStream derive_stream(std::uint64_t master_seed, std::uint64_t tag, std::uint64_t a,
                        std::uint64_t b);

// Stream tags (arbitrary distinct constants).
namespace stream_tag {
inline constexpr std::uint64_t kDataBase = 0x64617461;      // per-client base sample draw
inline constexpr std::uint64_t kDataPlan = 0x706c616e;      // per-federation shift plan
inline constexpr std::uint64_t kModelInit = 0x696e6974;     // shared initial parameters
inline constexpr std::uint64_t kTrain = 0x747261696e;       // client k, round r local training
inline constexpr std::uint64_t kParticipation = 0x70617274; // round r participant sampling
inline constexpr std::uint64_t kPca = 0x706361;             // shared projection fit
inline constexpr std::uint64_t kDpNoise = 0x6470;           // client k descriptor noise
inline constexpr std::uint64_t kKmeans = 0x6b6d65616e73;    // seeding for the known-M prior
}  // namespace stream_tag

}  // namespace fluxfed
