#pragma once

#include "diffgeo.hpp"
#include "rng.hpp"

namespace semiflat {

// Eguchi-Hanson model on the resolution of C^3 / Z_3 glued to the flat metric
// across the shell 1 <= u <= 1 + delta, u = |z|^2.
struct EHConfig {
    double a = 0.05;
    double delta = 1.0;

    void validate() const {
        if (!(a > 0)) throw ConfigError("Eguchi-Hanson scale must be positive");
        if (!(delta > 0 && delta <= 1)) throw ConfigError("cutoff width must lie in (0, 1]");
    }
};

// f_a(u) = (a^3 + u^3)^{1/3} + (a/3) sum_j zeta^j log(w - zeta^j), w = (1 + u^3/a^3)^{1/3}.
// The j = 1, 2 terms are conjugate and evaluated as 2 Re of one of them.
inline double eh_potential(double a, double u) {
    if (!(u > 0)) throw OriginSingular("potential needs u > 0");
    if (a == 0) return u;
    const double r = std::log1p(std::pow(u / a, 3)) / 3;
    const double w = std::exp(r);
    const double w_minus_one = std::expm1(r);
    const cplx zeta = root_of_unity(3, 1);
    const double paired = 2 * (zeta * std::log(cplx(w) - zeta)).real();
    return a * w + (a / 3) * (std::log(w_minus_one) + paired);
}

// Radial derivatives f'(u), f''(u); the metric is f' delta_ij + f'' conj(z_i) z_j.
struct RadialDerivatives {
    double first = 1;
    double second = 0;
};

inline RadialDerivatives eh_radial(double a, double u) {
    const double t = std::pow(a / u, 3);
    const double c = std::cbrt(1 + t);
    return {c, -t / (u * c * c)};
}

inline CMatrixd radial_metric(const RadialDerivatives& d, const CVectord& z) {
    return d.first * CMatrixd::Identity(z.size(), z.size()) + d.second * (z.conjugate() * z.transpose());
}

inline CMatrixd eh_metric(double a, const CVectord& z) {
    const double u = z.squaredNorm();
    if (!(u > 0)) throw OriginSingular("Eguchi-Hanson metric is singular at the origin");
    return radial_metric(eh_radial(a, u), z);
}

// Smooth step from exp(-1/t): 0 for t <= 0, 1 for t >= 1, flat to all orders at both ends.
struct StepValue {
    double value = 0, first = 0, second = 0;
};

inline StepValue smooth_step(double t) {
    if (t <= 0) return {0, 0, 0};
    if (t >= 1) return {1, 0, 0};
    auto psi = [](double x) { return std::exp(-1 / x); };
    auto dpsi = [&](double x) { return psi(x) / (x * x); };
    auto ddpsi = [&](double x) { return psi(x) * (1 / std::pow(x, 4) - 2 / std::pow(x, 3)); };
    const double a = psi(t), b = psi(1 - t);
    const double da = dpsi(t), db = -dpsi(1 - t);
    const double dda = ddpsi(t), ddb = ddpsi(1 - t);
    const double s = a + b;
    const double num1 = da * b - a * db;
    const double value = a / s;
    const double first = num1 / (s * s);
    const double second = ((dda * b - a * ddb) * s - 2 * num1 * (da + db)) / (s * s * s);
    return {value, first, second};
}

// chi = 1 on u <= 1, 0 on u >= 1 + delta.
inline StepValue cutoff(double u, double delta) {
    auto s = smooth_step((u - 1) / delta);
    return {1 - s.value, -s.first / delta, -s.second / (delta * delta)};
}

inline double glued_potential(const EHConfig& cfg, const CVectord& z) {
    const double u = z.squaredNorm();
    const double chi = cutoff(u, cfg.delta).value;
    if (chi == 0) return u;
    return u + chi * (eh_potential(cfg.a, u) - u);
}

inline RadialDerivatives glued_radial(const EHConfig& cfg, double u) {
    const auto chi = cutoff(u, cfg.delta);
    if (chi.value == 0 && chi.first == 0) return {1, 0};
    const auto eh = eh_radial(cfg.a, u);
    const double gap = eh_potential(cfg.a, u) - u;
    return {1 + chi.first * gap + chi.value * (eh.first - 1),
            chi.second * gap + 2 * chi.first * (eh.first - 1) + chi.value * eh.second};
}

inline CMatrixd glued_metric(const EHConfig& cfg, const CVectord& z) {
    const double u = z.squaredNorm();
    if (!(u > 0)) throw OriginSingular("glued metric is singular at the origin");
    return radial_metric(glued_radial(cfg, u), z);
}

// Uniform direction on S^5 scaled to a radius drawn in [rmin, rmax].
inline CVectord shell_point(SplitMix64& rng, double rmin, double rmax) {
    CVectord z(3);
    double n2 = 0;
    do {
        for (int i = 0; i < 3; ++i) z(i) = cplx(rng.uniform(-1, 1), rng.uniform(-1, 1));
        n2 = z.squaredNorm();
    } while (n2 > 1 || n2 < 1e-6);
    return z * (rng.uniform(rmin, rmax) / std::sqrt(n2));
}

// Smallest eigenvalue of the glued metric across the transition shell. The
// metric is radial, so a dense u grid sees every eigenvalue it can take.
inline double transition_min_eigenvalue(const EHConfig& cfg, int points = 2001) {
    double out = 1e300;
    for (int i = 0; i < points; ++i) {
        const double u = 1 + cfg.delta * i / double(points - 1);
        const auto d = glued_radial(cfg, u);
        out = std::min({out, d.first, d.first + u * d.second});
    }
    return out;
}

// Largest a (up to a_cap) with a positive definite glued metric, by bisection.
inline double max_positive_scale(double delta, double a_cap = 4.0) {
    auto positive = [&](double a) { return transition_min_eigenvalue(EHConfig{a, delta}) > 0; };
    if (positive(a_cap)) return a_cap;
    double lo = 0, hi = a_cap;
    for (int it = 0; it < 60 && hi - lo > 1e-10 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (positive(mid) ? lo : hi) = mid;
    }
    return lo;
}

struct GluingReport {
    double min_eigenvalue = 0;        // glued metric over the shell samples
    double max_deviation = 0;         // max |g_a - I| over the cutoff shell
    double det_residual = 0;          // max |det g - 1| where the cutoff is 1
    double hessian_mismatch = 0;      // FD Hessian of the glued potential vs the closed form
    double a_max = 0;
    bool a_max_capped = false;
};

inline GluingReport gluing_report(const EHConfig& cfg, int samples, std::uint64_t seed) {
    cfg.validate();
    SplitMix64 rng(seed);
    GluingReport rep;
    rep.min_eigenvalue = 1e300;
    const double annulus_hi = std::sqrt(1 + cfg.delta);
    const FDScheme sc{3e-3, 2, true};
    std::function<double(const CVectord&)> phi = [&](const CVectord& y) { return glued_potential(cfg, y); };
    for (int n = 0; n < samples; ++n) {
        const CVectord z = shell_point(rng, 0.5, 2.0);
        const CMatrixd g = glued_metric(cfg, z);
        rep.min_eigenvalue = std::min(rep.min_eigenvalue, min_eigenvalue(g));
        if (z.squaredNorm() <= 1) rep.det_residual = std::max(rep.det_residual, std::abs(g.determinant() - 1.0));
        const CMatrixd fd = complex_hessian(phi, z, sc);
        rep.hessian_mismatch = std::max(rep.hessian_mismatch, max_abs(fd - g));
        const CVectord w = shell_point(rng, 1.0, annulus_hi);
        rep.max_deviation = std::max(rep.max_deviation, max_abs(eh_metric(cfg.a, w) - CMatrixd::Identity(3, 3)));
    }
    rep.a_max = max_positive_scale(cfg.delta);
    rep.a_max_capped = rep.a_max >= 4.0;
    return rep;
}

}  // namespace semiflat
