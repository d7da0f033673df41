#include "bpu/rng.hpp"

#include <cmath>
#include <numbers>

namespace bpu {

uint64_t RngStream::next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double RngStream::next_unit() {
    ++draws_;
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

double RngStream::next_gaussian() {
    ++draws_;
    if (has_cached_) {
        has_cached_ = false;
        return cached_;
    }
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    const double u2 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(t);
    has_cached_ = true;
    return r * std::cos(t);
}

double RngStream::next_gaussian(double mean, double stddev) {
    require(stddev >= 0.0, "gaussian draw: stddev must be >= 0");
    return mean + stddev * next_gaussian();
}

int RngStream::next_index(int n) {
    require(n > 0, "next_index: n must be positive");
    ++draws_;
    return static_cast<int>(next_u64() % static_cast<uint64_t>(n));
}

RngStream RngStream::substream(uint64_t seed, uint64_t tag) {
    RngStream mix(seed ^ (0xA5A5A5A5A5A5A5A5ULL * (tag + 1)));
    return RngStream(mix.next_u64());
}

Matrix rng_gaussian_matrix(RngStream& stream, int rows, int cols, double mean, double stddev) {
    require(stddev >= 0.0, "rng_gaussian_matrix: stddev must be >= 0");
    Matrix m(rows, cols);
    for (double& v : m.values) v = mean + stddev * stream.next_gaussian();
    return m;
}

}  // namespace bpu
