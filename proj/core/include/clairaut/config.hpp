#pragma once

#include <cstdint>

namespace clairaut {

/// All numeric tolerances in one place. Defaults are the tolerances the
/// library is verified against; override per call site only in tests.
struct Tolerances {
    double newton_residual = 1e-12;   // sup-norm convergence for velocity resolution
    int newton_max_iterations = 50;
    double rank_relative = 1e-9;      // singular values below rank_relative * sigma_max count as zero
    double independence = 1e-8;       // probe disagreement allowed for h_alpha / H0
    double f_inverse = 1e-10;         // ||F*Finv - I|| in the full-rank branch
    double image_consistency = 1e-8;  // residual of F v = D on the image of F
    double fd_step = 1e-6;            // central finite-difference step
    double el_residual = 1e-6;        // Euler-Lagrange residual bound for verified trajectories
};

/// Sample-point generation for rank decisions: `count` points per model,
/// each variable drawn uniformly from [lo, hi].
struct Sampling {
    std::uint64_t seed = 42;
    int count = 8;
    double lo = -1.0;
    double hi = 1.0;
};

/// Deterministic uniform generator. The mapping from raw 64-bit draws to
/// doubles is spelled out here so that frozen test values do not depend on
/// the standard library's distribution implementation.
class DeterministicRng {
public:
    explicit DeterministicRng(std::uint64_t seed) : state_(seed == 0 ? 0x9e3779b97f4a7c15ULL : seed) {}

    std::uint64_t next_u64() {
        // xorshift64* : small, reproducible, good enough for sampling points
        std::uint64_t x = state_;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        state_ = x;
        return x * 0x2545F4914F6CDD1DULL;
    }

    double uniform(double lo, double hi) {
        const double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
        return lo + (hi - lo) * u;
    }

private:
    std::uint64_t state_;
};

}  // namespace clairaut
