#pragma once

#include "core.hpp"

namespace semiflat {

// Lattice Z + tau Z with tau = (b / 2 pi i) log z, the I_b local model.
struct EllipticData {
    int b = 1;
    cplx z{0.2, 0};

    void validate() const {
        if (b < 1) throw ConfigError("I_b needs b >= 1");
        if (!(std::abs(z) > 0 && std::abs(z) < 1)) throw NotConvergent("base parameter must satisfy 0 < |z| < 1");
    }
    cplx tau() const { return double(b) / (2 * pi * cplx(0, 1)) * std::log(z); }
    cplx nome() const { return ipow(z, b); }
};

namespace detail {

// pi^2 / sin^2(pi x), through q = exp(+-2 pi i x) away from the real axis.
inline cplx csc2_pi(cplx x) {
    if (std::abs(x.imag()) < 1) {
        const cplx s = std::sin(pi * x);
        return pi * pi / (s * s);
    }
    const cplx q = std::exp(cplx(0, x.imag() > 0 ? 2 * pi : -2 * pi) * x);
    return -4 * pi * pi * q / ((1.0 - q) * (1.0 - q));
}

// pi^3 cos(pi x) / sin^3(pi x).
inline cplx cot_csc2_pi(cplx x) {
    if (std::abs(x.imag()) < 1) {
        const cplx s = std::sin(pi * x);
        return pi * pi * pi * std::cos(pi * x) / (s * s * s);
    }
    const bool upper = x.imag() > 0;
    const cplx q = std::exp(cplx(0, upper ? 2 * pi : -2 * pi) * x);
    const cplx v = cplx(0, 4 * pi * pi * pi) * q * (1.0 + q) / ((1.0 - q) * (1.0 - q) * (1.0 - q));
    return upper ? v : -v;
}

// Basis (w1, w2) of the same lattice with tau = w2/w1 in the standard
// fundamental domain.
struct ReducedBasis {
    cplx w1, w2;
    cplx tau() const { return w2 / w1; }
};

inline ReducedBasis gauss_reduce(cplx w1, cplx w2) {
    if (!((w2 / w1).imag() > 0)) throw DegenerateLattice("lattice basis must be positively oriented");
    for (int it = 0; it < 200; ++it) {
        const double shift = std::round((w2 / w1).real());
        w2 -= shift * w1;
        if (std::abs(w2 / w1) >= 1 - 1e-15) return {w1, w2};
        const cplx t = w1;
        w1 = w2;
        w2 = -t;
    }
    throw NoConvergence("lattice reduction did not terminate");
}

// Rows |n| <= N whose neglected tail is below tol for a reduced tau.
inline int row_count(cplx tau, double tol) {
    const double y = tau.imag();
    const double r = std::exp(-2 * pi * y);
    for (int n = 1; n < 1000; ++n) {
        // |v - n tau| has imaginary part >= (n - 1/2) y after reduction of v.
        const double head = std::exp(-2 * pi * (n + 0.5) * y);
        const double tail = 2 * 8 * pi * pi * pi * head / ((1 - r) * std::pow(1 - std::sqrt(r), 3));
        if (tail < tol) return n;
    }
    throw NotConvergent("lattice sum rows do not converge");
}

struct ReducedPoint {
    ReducedBasis basis;
    cplx v;  // in units of w1, reduced to the centered cell
    cplx tau;
    double distance = 0;  // to the nearest lattice point
};

inline ReducedPoint reduce_point(cplx w1, cplx w2, cplx v) {
    ReducedPoint rp{gauss_reduce(w1, w2), 0, 0, 0};
    rp.tau = rp.basis.tau();
    cplx x = v / rp.basis.w1;
    const double n = std::round(x.imag() / rp.tau.imag());
    x -= n * rp.tau;
    x -= std::round(x.real());
    double dist = 1e300;
    for (int a = -1; a <= 1; ++a)
        for (int c = -1; c <= 1; ++c) dist = std::min(dist, std::abs((x - double(a) - double(c) * rp.tau) * rp.basis.w1));
    if (dist < 1e-8) throw PolePoint("point lies on the lattice");
    rp.v = x;
    rp.distance = dist;
    return rp;
}

}  // namespace detail

// Weierstrass p for the lattice Z w1 + Z w2, summed row by row with the
// closed form of each row. extra_rows widens the truncation past the bound.
inline cplx wp_lattice(cplx w1, cplx w2, cplx v, int extra_rows = 0) {
    auto rp = detail::reduce_point(w1, w2, v);
    const int rows = detail::row_count(rp.tau, 1e-14) + extra_rows;
    cplx acc = detail::csc2_pi(rp.v) - pi * pi / 3;
    for (int n = 1; n <= rows; ++n)
        for (int sgn : {1, -1}) {
            const cplx shift = double(sgn * n) * rp.tau;
            acc += detail::csc2_pi(rp.v - shift) - detail::csc2_pi(shift);
        }
    return acc / (rp.basis.w1 * rp.basis.w1);
}

inline cplx wp_prime_lattice(cplx w1, cplx w2, cplx v, int extra_rows = 0) {
    auto rp = detail::reduce_point(w1, w2, v);
    const int rows = detail::row_count(rp.tau, 1e-14) + extra_rows;
    cplx acc = detail::cot_csc2_pi(rp.v);
    for (int n = 1; n <= rows; ++n)
        for (int sgn : {1, -1}) acc += detail::cot_csc2_pi(rp.v - double(sgn * n) * rp.tau);
    return -2.0 * acc / (rp.basis.w1 * rp.basis.w1 * rp.basis.w1);
}

inline cplx wp(const EllipticData& ed, cplx v) {
    ed.validate();
    return wp_lattice(1.0, ed.tau(), v);
}

inline cplx wp_prime(const EllipticData& ed, cplx v) {
    ed.validate();
    return wp_prime_lattice(1.0, ed.tau(), v);
}

namespace detail {

// sum_n c(n) q^n / (1 - q^n) with c(n) = sum_j coeff_j n^{power_j}; stops
// once the geometric tail bound drops below tol.
inline cplx lambert_series(cplx q, std::initializer_list<std::pair<double, int>> terms, double tol) {
    const double r = std::abs(q);
    if (r > 0.95) throw NotConvergent("q-series not evaluated for |q| > 0.95");
    if (r == 0) return 0;
    int top = 0;
    double weight = 0;
    for (auto [c, p] : terms) {
        top = std::max(top, p);
        weight += std::abs(c);
    }
    cplx acc = 0, qn = 1;
    for (int n = 1; n < 100000; ++n) {
        qn *= q;
        double c = 0;
        for (auto [coef, p] : terms) c += coef * std::pow(double(n), p);
        acc += c * qn / (1.0 - qn);
        const double ratio = std::pow(double(n + 2) / double(n + 1), top) * r;
        if (ratio < 1) {
            const double next = weight * std::pow(double(n + 1), top) * std::pow(r, n + 1) / (1 - r);
            if (next / (1 - ratio) < tol) return acc;
        }
    }
    throw NotConvergent("q-series did not reach its tail bound");
}

}  // namespace detail

// The coefficients of the nodal-degeneration cubic as q-series in the nome.
inline cplx g2_series(cplx q) { return 20.0 * detail::lambert_series(q, {{1.0, 3}}, 1e-14); }
inline cplx g3_series(cplx q) { return detail::lambert_series(q, {{7.0 / 3, 5}, {5.0 / 3, 3}}, 1e-14); }

// Image of v under the embedding into Y^2 = 4X^3 + X^2 - g2 X - g3.
struct CubicPoint {
    cplx x, y;
};

inline CubicPoint cubic_point(const EllipticData& ed, cplx v) {
    return {-1.0 / 12 - wp(ed, v) / (4 * pi * pi), cplx(0, 1) * wp_prime(ed, v) / (8 * pi * pi * pi)};
}

inline double cubic_residual(const EllipticData& ed, cplx v) {
    const auto p = cubic_point(ed, v);
    const cplx q = ed.nome();
    return std::abs(p.y * p.y - (4.0 * p.x * p.x * p.x + p.x * p.x - g2_series(q) * p.x - g3_series(q)));
}

// (dX/dv) / Y divided by 2 pi i; the holomorphic volume forms agree iff this is 1.
inline cplx volume_pullback_ratio(const EllipticData& ed, cplx v) {
    const cplx yp = wp_prime(ed, v);
    if (std::abs(yp) < 1e-8) throw BranchPoint("p' vanishes: half period");
    // Step proportional to the distance to the nearest pole.
    const double h = 1e-3 * std::min(detail::reduce_point(1.0, ed.tau(), v).distance, 1.0);
    auto x = [&](double t) { return -1.0 / 12 - wp(ed, v + t) / (4 * pi * pi); };
    const cplx dx = (-x(2 * h) + 8.0 * x(h) - 8.0 * x(-h) + x(-2 * h)) / (12 * h);
    const cplx y = cplx(0, 1) * yp / (8 * pi * pi * pi);
    return dx / y / (2 * pi * cplx(0, 1));
}

}  // namespace semiflat
