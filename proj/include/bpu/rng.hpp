#pragma once

#include <cstdint>

#include "bpu/matrix.hpp"

namespace bpu {

// Deterministic pseudo-random stream: splitmix64 state update feeding a
// Box-Muller transform. Same seed gives a bit-identical sequence on every
// platform. Gaussians are produced in pairs; the second member of a pair is
// cached and emitted by the next call.
class RngStream {
public:
    explicit RngStream(uint64_t seed) : state_(seed) {}

    uint64_t next_u64();

    // Uniform in (0, 1]; never returns 0 so log(u) is safe.
    double next_unit();

    double next_gaussian();  // standard normal
    double next_gaussian(double mean, double stddev);

    // Uniform integer in [0, n). Rejection-free scaling; fine for the
    // desk-scale index draws this stream serves.
    int next_index(int n);

    uint64_t state() const { return state_; }
    uint64_t draws() const { return draws_; }

    // Derives an independent substream: re-seeds from the parent's seed and a
    // stream tag so separately tagged streams never share state.
    static RngStream substream(uint64_t seed, uint64_t tag);

private:
    uint64_t state_;
    uint64_t draws_ = 0;
    bool has_cached_ = false;
    double cached_ = 0.0;
};

// Matrix of i.i.d. N(mean, stddev^2) entries drawn in row-major order.
// Always consumes rows*cols gaussians, so stddev = 0 gives a constant matrix
// of `mean` while advancing the stream exactly as stddev > 0 would.
Matrix rng_gaussian_matrix(RngStream& stream, int rows, int cols, double mean, double stddev);

}  // namespace bpu
