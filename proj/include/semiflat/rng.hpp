#pragma once

#include <cstdint>
#include <numbers>

#include "core.hpp"

namespace semiflat {

// SplitMix64. The constants are part of the reproducibility contract: any
// reimplementation using them draws the same sample points.
class SplitMix64 {
public:
    static constexpr std::uint64_t increment = 0x9E3779B97F4A7C15ULL;
    static constexpr std::uint64_t mix1 = 0xBF58476D1CE4E5B9ULL;
    static constexpr std::uint64_t mix2 = 0x94D049BB133111EBULL;

    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += increment);
        z = (z ^ (z >> 30)) * mix1;
        z = (z ^ (z >> 27)) * mix2;
        return z ^ (z >> 31);
    }

    // Top 53 bits scaled into [0, 1).
    double uniform() { return double(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Point with modulus in [rmin, rmax] and argument in [amin, amax).
    cplx polar(double rmin, double rmax, double amin, double amax) {
        double r = uniform(rmin, rmax);
        double a = uniform(amin, amax);
        return std::polar(r, a);
    }

    // Independent stream for sample i, so parallel evaluation does not depend
    // on the order in which workers draw.
    SplitMix64 fork(std::uint64_t i) const {
        SplitMix64 g(state_ ^ (i * increment + mix2));
        g.next();
        return g;
    }

private:
    std::uint64_t state_;
};

}  // namespace semiflat
