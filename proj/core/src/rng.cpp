#include "fluxfed/rng.hpp"

#include <cmath>

namespace fluxfed {

std::uint64_t hash_combine64(std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2));
    return splitmix64_next(s);
}

RngStream derive_stream(std::uint64_t master_seed, std::uint64_t tag) {
    return RngStream(master_seed ^ hash_combine64(tag, 0));
}

RngStream derive_stream(std::uint64_t master_seed, std::uint64_t tag, std::uint64_t a) {
    return RngStream(master_seed ^ hash_combine64(hash_combine64(tag, a), 1));
}

RngStream derive_stream(std::uint64_t master_seed, std::uint64_t tag, std::uint64_t a,
                        std::uint64_t b) {
    return RngStream(master_seed ^ hash_combine64(hash_combine64(hash_combine64(tag, a), b), 2));
}

std::uint64_t RngStream::next_index(std::uint64_t n) {
    // Rejection sampling over the top of the range keeps the draw unbiased.
    std::uint64_t threshold = (0 - n) % n;
    for (;;) {
        std::uint64_t v = next_u64();
        if (v >= threshold) return v % n;
    }
}

double RngStream::next_gaussian() {
    double u1 = next_real_open();
    double u2 = next_real();
    double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(2.0 * M_PI * u2);
}

}  // namespace fluxfed
