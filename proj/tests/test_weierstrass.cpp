#include <catch_amalgamated.hpp>

#include <semiflat/rng.hpp>
#include <semiflat/weierstrass.hpp>

using namespace semiflat;
using Catch::Matchers::WithinAbs;

namespace {

const cplx I(0, 1);

// sum_m (x - m)^-4 and (x - m)^-6 from the Laurent structure of csc^2.
cplx row4(cplx x) {
    const cplx c = 1.0 / (std::sin(pi * x) * std::sin(pi * x));
    return std::pow(pi, 4) * (c * c - 2.0 / 3 * c);
}
cplx row6(cplx x) {
    const cplx c = 1.0 / (std::sin(pi * x) * std::sin(pi * x));
    return std::pow(pi, 6) * (c * c * c - c * c + 2.0 / 15 * c);
}

// Eisenstein sums G4, G6 of Z + tau Z by rows; tau should have Im tau >= 0.8.
std::pair<cplx, cplx> eisenstein(cplx tau) {
    cplx g4 = 2 * std::pow(pi, 4) / 90, g6 = 2 * std::pow(pi, 6) / 945;
    for (int n = 1; n <= 12; ++n)
        for (int s : {1, -1}) {
            g4 += row4(double(s * n) * tau);
            g6 += row6(double(s * n) * tau);
        }
    return {g4, g6};
}

// Brute force partial sums of the g2 / g3 series.
cplx long_sum(cplx q, int power_hi, double c_hi, int power_lo, double c_lo) {
    cplx acc = 0, qn = 1;
    for (int n = 1; n <= 10000; ++n) {
        qn *= q;
        acc += (c_hi * std::pow(double(n), power_hi) + c_lo * std::pow(double(n), power_lo)) * qn / (1.0 - qn);
    }
    return acc;
}

}  // namespace

TEST_CASE("elliptic data", "[weierstrass]") {
    EllipticData ed{2, cplx(0.2, 0)};
    CHECK(std::abs(ed.tau() - 2.0 / (2 * pi * I) * std::log(0.2)) < 1e-15);
    CHECK(ed.tau().imag() > 0);
    CHECK(std::abs(ed.nome() - 0.04) < 1e-16);
    CHECK_THROWS_AS((EllipticData{1, cplx(1.0, 0)}.validate()), NotConvergent);
    CHECK_THROWS_AS((EllipticData{0, cplx(0.2, 0)}.validate()), ConfigError);
}

TEST_CASE("p is even, periodic and homogeneous", "[weierstrass]") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        SplitMix64 rng(seed);
        for (int n = 0; n < 10; ++n) {
            EllipticData ed{1 + int(rng.uniform() * 2), std::polar(rng.uniform(0.05, 0.5), rng.uniform(-3, 3))};
            const cplx tau = ed.tau();
            const cplx v = rng.uniform(0.1, 0.9) + rng.uniform(0.1, 0.9) * tau;
            const cplx p = wp(ed, v);
            const double scale = std::max(1.0, std::abs(p));
            CHECK(std::abs(wp(ed, -v) - p) < 1e-12 * scale);
            CHECK(std::abs(wp(ed, v + 1.0) - p) < 1e-11 * scale);
            CHECK(std::abs(wp(ed, v + tau) - p) < 1e-11 * scale);
            CHECK(std::abs(wp_prime(ed, -v) + wp_prime(ed, v)) < 1e-11 * std::max(1.0, std::abs(wp_prime(ed, v))));
            const cplx c = std::polar(rng.uniform(0.5, 2.0), rng.uniform(-3, 3));
            CHECK(std::abs(wp_lattice(c, c * tau, c * v) - p / (c * c)) < 1e-10 * scale / std::norm(c));
            // Doubling the truncation moves nothing.
            CHECK(std::abs(wp_lattice(1.0, tau, v, 20) - p) < 1e-12 * scale);
        }
    }
}

TEST_CASE("p against the Eisenstein differential equation", "[weierstrass]") {
    for (cplx tau : {cplx(0.1, 1.1), cplx(-0.4, 0.9), cplx(0.5, 2.0)}) {
        auto [g4, g6] = eisenstein(tau);
        const cplx g2 = 60.0 * g4, g3 = 140.0 * g6;
        for (cplx v : {cplx(0.3, 0.1), 0.2 + 0.6 * tau, 0.7 + 0.35 * tau}) {
            const cplx p = wp_lattice(1.0, tau, v), dp = wp_prime_lattice(1.0, tau, v);
            const double scale = std::max(1.0, std::pow(std::abs(p), 3));
            CHECK(std::abs(dp * dp - (4.0 * p * p * p - g2 * p - g3)) < 1e-9 * scale);
        }
        // q-series coefficients after the shift X = -1/12 - p / 4 pi^2.
        const cplx q = std::exp(2 * pi * I * tau);
        const cplx e4 = 3.0 * g2 / (4 * std::pow(pi, 4)), e6 = 27.0 * g3 / (8 * std::pow(pi, 6));
        CHECK(std::abs(g2_series(q) - (e4 - 1.0) / 12.0) < 1e-8);
        CHECK(std::abs(g3_series(q) + (1.0 / 432 - e4 / 144.0 + e6 / 216.0)) < 1e-8);
    }
}

TEST_CASE("pole and branch points", "[weierstrass]") {
    EllipticData ed{1, cplx(0.2, 0)};
    CHECK_THROWS_AS(wp(ed, ed.tau() + 1.0), PolePoint);
    CHECK_THROWS_AS(wp(ed, cplx(1e-10, 0)), PolePoint);
    CHECK_THROWS_AS(volume_pullback_ratio(ed, cplx(0.5, 0)), BranchPoint);
    CHECK_THROWS_AS(volume_pullback_ratio(ed, 0.5 * ed.tau()), BranchPoint);
}

TEST_CASE("q-series", "[weierstrass]") {
    CHECK(g2_series(0.0) == 0.0);
    CHECK(g3_series(0.0) == 0.0);
    for (cplx q : {cplx(0.1, 0), cplx(-0.3, 0.2), cplx(0.5, 0.5)}) {
        CHECK(std::abs(g2_series(q) - long_sum(q, 3, 20.0, 3, 0.0)) < 1e-10 * std::max(1.0, std::abs(g2_series(q))));
        CHECK(std::abs(g3_series(q) - long_sum(q, 5, 7.0 / 3, 3, 5.0 / 3)) < 1e-10 * std::max(1.0, std::abs(g3_series(q))));
    }
    CHECK_THROWS_AS(g2_series(0.96), NotConvergent);
    CHECK_NOTHROW(g2_series(0.94));
}

TEST_CASE("cubic model and volume form on a grid", "[weierstrass]") {
    const double offsets[] = {0.17, 0.31, 0.43, 0.62, 0.79};
    for (int b : {1, 2})
        for (cplx z : {cplx(0.05, 0), cplx(0.1, 0.1), cplx(-0.2, 0.15), cplx(0.3, -0.2), cplx(0.5, 0)}) {
            EllipticData ed{b, z};
            const cplx tau = ed.tau();
            for (int i = 0; i < 5; ++i) {
                const cplx v = offsets[i] + offsets[(i + 2) % 5] * tau;
                CHECK(cubic_residual(ed, v) < 1e-8);
                // Differencing X loses eps |p| / (h |p'|); skip points where p is flat.
                if (std::abs(wp_prime(ed, v)) > 1e-2 * std::max(1.0, std::abs(wp(ed, v))))
                    CHECK(std::abs(volume_pullback_ratio(ed, v) - 1.0) < 1e-8);
                CHECK(std::abs(cubic_residual(ed, v + tau) - cubic_residual(ed, v)) < 1e-8);
            }
        }
    EllipticData ed{1, cplx(0.2, 0)};
    CHECK(cubic_residual(ed, cplx(0.3, 0.1)) < 1e-8);
    CHECK(std::abs(volume_pullback_ratio(ed, cplx(0.3, 0.1)) - volume_pullback_ratio(ed, cplx(0.2, 0.05))) < 1e-8);
}

TEST_CASE("double cover lattice", "[weierstrass]") {
    // Z + tau Z is Z + 2 tau Z together with its translate by tau.
    for (cplx z : {cplx(0.2, 0), cplx(0.1, 0.3)}) {
        EllipticData one{1, z}, two{2, z};
        const cplx t1 = one.tau();
        REQUIRE(std::abs(two.tau() - 2.0 * t1) < 1e-14);
        for (cplx v : {cplx(0.3, 0.1), 0.2 + 0.3 * t1}) {
            const cplx lhs = wp(one, v);
            const cplx rhs = wp(two, v) + wp(two, v + t1) - wp(two, t1);
            CHECK(std::abs(lhs - rhs) < 1e-10 * std::max(1.0, std::abs(lhs)));
        }
    }
}

TEST_CASE("degeneration towards the nodal cubic", "[weierstrass]") {
    // As z -> 0 at fixed X the coefficients vanish and the curve tends to y^2 = 4x^3 + x^2.
    double prev = 1e300;
    for (double r : {1e-1, 1e-2, 1e-3, 1e-4}) {
        const double size = std::abs(g2_series(r)) + std::abs(g3_series(r));
        CHECK(size < prev);
        prev = size;
    }
    CHECK(prev < 1e-2);
}
