#pragma once

#include <span>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include "diffgeo.hpp"
#include "parallel.hpp"

namespace semiflat {

// ---- fits ----

enum class DecayKind { Power, Exponential };

struct LineFit {
    double slope = 0;
    double intercept = 0;
    double residual = 0;  // 1 - R^2
};

inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) throw FitRejected("line fit needs two or more paired points");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= double(n);
    my /= double(n);
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0)) throw FitRejected("abscissae are all equal");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - f.intercept - f.slope * x[i];
        ss += r * r;
    }
    f.residual = syy > 0 ? ss / syy : 0.0;
    return f;
}

// log(value) against log(radius) (power) or radius (exponential). The slope
// is the exponent, or minus the rate.
struct DecayFit {
    DecayKind kind = DecayKind::Power;
    double slope = 0;
    double intercept = 0;
    double residual = 0;
    double window_lo = 0, window_hi = 0;
    bool flat = false;  // every value at rounding level; no fit attempted
    std::vector<double> radii, values;
};

inline DecayFit fit_decay(DecayKind kind, std::vector<double> radii, std::vector<double> values,
                          std::size_t min_points = 12) {
    if (radii.size() != values.size()) throw FitRejected("radii and values differ in length");
    if (radii.size() < min_points) throw FitRejected("fit needs at least " + std::to_string(min_points) + " radii");
    std::vector<double> x, y;
    for (std::size_t i = 0; i < radii.size(); ++i) {
        if (!(values[i] > 0) || !std::isfinite(values[i])) throw FitRejected("observable is not positive and finite");
        x.push_back(kind == DecayKind::Power ? std::log(radii[i]) : radii[i]);
        y.push_back(std::log(values[i]));
    }
    const auto [lo, hi] = std::minmax_element(radii.begin(), radii.end());
    auto line = fit_line(x, y);
    DecayFit out{kind, line.slope, line.intercept, line.residual, *lo, *hi, false, std::move(radii), std::move(values)};
    if (kind == DecayKind::Power && std::log10(out.window_hi / out.window_lo) < 1.5 - 1e-12)
        throw FitRejected("power window spans less than 1.5 decades");
    if (kind == DecayKind::Exponential && std::abs(out.slope) * (out.window_hi - out.window_lo) < 3)
        throw FitRejected("exponential window spans less than 3 e-foldings");
    if (out.residual >= 0.01) throw FitRejected("log-linear fit residual " + std::to_string(out.residual));
    return out;
}

// Refit on the upper half of the radii; the span rules are not reapplied.
inline double upper_half_slope(const DecayFit& fit) {
    std::vector<std::size_t> idx(fit.radii.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return fit.radii[a] < fit.radii[b]; });
    std::vector<double> x, y;
    for (std::size_t j = idx.size() / 2; j < idx.size(); ++j) {
        const double r = fit.radii[idx[j]];
        x.push_back(fit.kind == DecayKind::Power ? std::log(r) : r);
        y.push_back(std::log(fit.values[idx[j]]));
    }
    return fit_line(x, y).slope;
}

inline std::vector<double> geometric_radii(double lo, double hi, int n) {
    if (!(lo > 0 && hi > lo && n >= 2)) throw ConfigError("radius window must satisfy 0 < lo < hi with n >= 2");
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out[std::size_t(i)] = lo * std::pow(hi / lo, double(i) / (n - 1));
    return out;
}

inline std::vector<double> linear_radii(double lo, double hi, int n) {
    if (!(hi > lo && n >= 2)) throw ConfigError("radius window must satisfy lo < hi with n >= 2");
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out[std::size_t(i)] = lo + (hi - lo) * double(i) / (n - 1);
    return out;
}

// ---- (alpha, beta) charts at infinity ----

// ALG: z = (alpha / alpha0)^{-k/p}, p = k - a_1 - a_2, alpha in the sector
// 0 < arg alpha < 2 pi p / k. ALH: z = exp(-rate alpha), 0 < Im alpha < 2 pi / rate.
// In both, v = diag(s^{a_i}) M beta.
struct AsymptoticChart {
    AsymptoticKind kind = AsymptoticKind::ALG;
    int cover_degree = 1;
    std::array<int, 2> powers{};
    int excess = 0;
    double alpha0 = 0;
    double rate = 0;
    double sector_lo = 0, sector_hi = 0;
    Eigen::Matrix2d mixing = Eigen::Matrix2d::Identity();
    std::array<std::array<cplx, 2>, 2> limit_lattices{};
    Eigen::Matrix3d limit_metric = Eigen::Matrix3d::Zero();

    Rational angle_over_pi() const { return kind == AsymptoticKind::ALG ? Rational(2 * excess, cover_degree) : Rational(0); }

    template <class R>
    complex_t<R> log_s(complex_t<R> alpha) const {
        if (kind == AsymptoticKind::ALG) return -(std::log(alpha) - R(std::log(alpha0))) / R(excess);
        return -R(rate) * alpha / R(cover_degree);
    }

    // d log s / d alpha.
    template <class R>
    complex_t<R> log_s_prime(complex_t<R> alpha) const {
        if (kind == AsymptoticKind::ALG) return R(-1) / (R(excess) * alpha);
        return complex_t<R>(-R(rate) / R(cover_degree));
    }

    template <class R>
    complex_t<R> alpha_of(complex_t<R> ls) const {
        if (kind == AsymptoticKind::ALG) return R(alpha0) * std::exp(-R(excess) * ls);
        return -R(cover_degree) * ls / R(rate);
    }

    template <class R>
    CVector<R> fiber(complex_t<R> alpha, const CVector<R>& beta) const {
        const complex_t<R> ls = log_s(alpha);
        CVector<R> v(2);
        for (int i = 0; i < 2; ++i)
            v(i) = std::exp(R(powers[i]) * ls) * (R(mixing(i, 0)) * beta(0) + R(mixing(i, 1)) * beta(1));
        return v;
    }

    template <class R>
    CVector<R> beta_of(complex_t<R> ls, const CVector<R>& v) const {
        CVector<R> w(2);
        for (int i = 0; i < 2; ++i) w(i) = v(i) * std::exp(-R(powers[i]) * ls);
        const Eigen::Matrix2d inv = mixing.inverse();
        CVector<R> beta(2);
        for (int i = 0; i < 2; ++i) beta(i) = R(inv(i, 0)) * w(0) + R(inv(i, 1)) * w(1);
        return beta;
    }
};

inline AsymptoticChart to_chart(const FibrationModel& fm, double eps, const VolumeForm& vf) {
    if (fm.fiber_dim() != 2) throw Unsupported("asymptotic charts are defined for product models");
    if (!(eps > 0)) throw ConfigError("epsilon must be positive");
    const double k0 = std::abs(vf.k0);
    if (!(k0 > 0)) throw ConfigError("k(0) must be nonzero");
    const auto cls = classify_asymptotics(fm);
    if (cls.kind != AsymptoticKind::ALG && cls.kind != AsymptoticKind::ALH)
        throw Unsupported("star-like ends have no (alpha, beta) chart; use the radial profile");
    AsymptoticChart ch;
    ch.kind = cls.kind;
    ch.cover_degree = fm.cover_degree;
    ch.powers = {fm.coordinate_powers[0], fm.coordinate_powers[1]};
    ch.excess = ch.cover_degree - ch.powers[0] - ch.powers[1];
    if ((ch.kind == AsymptoticKind::ALG) != (ch.excess > 0)) throw Unsupported("coordinate powers disagree with the deck data");
    if (fm.isotrivial) ch.mixing << 1, 1, 1, -1;
    double pairing_product = 1, area_product = 1;
    Eigen::Matrix2d fiber_limit = Eigen::Matrix2d::Zero();
    for (int i = 0; i < 2; ++i) {
        const auto& f = fm.factors[std::size_t(i)];
        const double c = leading_pairing(f);
        const double e = eps * f.area_scale;
        pairing_product *= c;
        area_product *= e;
        fiber_limit(i, i) = e / (2 * c);
        auto sp = stripped_periods<double>(f.shape, cplx(0), cplx(0));
        ch.limit_lattices[std::size_t(i)] = {sp.t[0], sp.t[1]};
    }
    const int k = ch.cover_degree;
    if (ch.kind == AsymptoticKind::ALG) {
        ch.alpha0 = std::sqrt(8 * pairing_product / area_product) * k * k0 / ch.excess;
        ch.sector_hi = 2 * pi * ch.excess / k;
    } else {
        ch.rate = std::sqrt(area_product / (8 * pairing_product)) / k0;
        ch.sector_hi = 2 * pi / ch.rate;
    }
    ch.limit_metric(0, 0) = 0.5;
    ch.limit_metric.block<2, 2>(1, 1) = ch.mixing.transpose() * fiber_limit * ch.mixing;
    return ch;
}

// h pulled back to (alpha, beta): h' = J^T h conj(J), J = d(z, v) / d(alpha, beta).
template <class R>
CMatrix<R> chart_metric(const AsymptoticChart& ch, const FibrationModel& fm, double eps, const VolumeForm& vf,
                        complex_t<R> alpha, const CVector<R>& beta) {
    const complex_t<R> ls = ch.log_s(alpha);
    const CoverPoint<R> p{ls, ch.cover_degree};
    const CVector<R> v = ch.fiber(alpha, beta);
    const auto ms = metric_at<R>(fm, eps, vf, p, v);
    const complex_t<R> d = ch.log_s_prime(alpha);
    CMatrix<R> j = CMatrix<R>::Zero(3, 3);
    j(0, 0) = R(ch.cover_degree) * p.z() * d;
    for (int i = 0; i < 2; ++i) {
        j(i + 1, 0) = R(ch.powers[std::size_t(i)]) * d * v(i);
        const complex_t<R> sa = std::exp(R(ch.powers[std::size_t(i)]) * ls);
        for (int c = 0; c < 2; ++c) j(i + 1, c + 1) = sa * R(ch.mixing(i, c));
    }
    return j.transpose() * ms.h * j.conjugate();
}

template <class R>
MetricField<R> chart_field(const AsymptoticChart& ch, const FibrationModel& fm, double eps, const VolumeForm& vf) {
    return [=](const CVector<R>& y) { return chart_metric<R>(ch, fm, eps, vf, y(0), CVector<R>(y.tail(2))); };
}

struct ChartSample {
    cplx alpha;
    CVectord beta;
};

// Fixed relative positions: three directions across the sector (or strip)
// and two points of the limit lattices, the same at every radius.
inline std::vector<ChartSample> chart_samples(const AsymptoticChart& ch, double radius) {
    static const double angles[] = {0.25, 0.5, 0.75};
    static const double cells[][2] = {{0.3, 0.6}, {0.7, 0.2}};
    std::vector<ChartSample> out;
    for (double f : angles) {
        const double t = ch.sector_lo + f * (ch.sector_hi - ch.sector_lo);
        const cplx alpha = ch.kind == AsymptoticKind::ALG ? std::polar(radius, t) : cplx(radius, t);
        for (const auto& c : cells) {
            CVectord beta(2);
            for (int i = 0; i < 2; ++i)
                beta(i) = c[0] * ch.limit_lattices[std::size_t(i)][0] + c[1] * ch.limit_lattices[std::size_t(i)][1];
            out.push_back({alpha, beta});
        }
    }
    return out;
}

inline double chart_deviation(const AsymptoticChart& ch, const FibrationModel& fm, double eps, const VolumeForm& vf,
                              double radius) {
    const CMatrixd limit = ch.limit_metric.cast<cplx>();
    double out = 0;
    for (const auto& smp : chart_samples(ch, radius))
        out = std::max(out, max_abs(chart_metric<double>(ch, fm, eps, vf, smp.alpha, smp.beta) - limit));
    return out;
}

// Max-norm of d h' / d|alpha| (ALG) or d h' / d Re alpha (ALH) at fixed beta.
inline double chart_derivative(const AsymptoticChart& ch, const FibrationModel& fm, double eps, const VolumeForm& vf,
                               double radius) {
    const double h = ch.kind == AsymptoticKind::ALG ? 1e-2 * radius : 1e-2 / ch.rate;
    double out = 0;
    for (const auto& smp : chart_samples(ch, radius)) {
        const cplx dir = ch.kind == AsymptoticKind::ALG ? smp.alpha / std::abs(smp.alpha) : cplx(1);
        auto at = [&](double t) { return chart_metric<double>(ch, fm, eps, vf, smp.alpha + t * dir, smp.beta); };
        const CMatrixd d = (-at(2 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2 * h)) / (12 * h);
        out = std::max(out, max_abs(d));
    }
    return out;
}

inline double chart_curvature(const AsymptoticChart& ch, const FibrationModel& fm, double eps, const VolumeForm& vf,
                              double radius, const FDScheme& sc) {
    using L = long double;
    auto field = chart_field<L>(ch, fm, eps, vf);
    const double alpha_scale = ch.kind == AsymptoticKind::ALG ? radius : 1.0;
    double out = 0;
    for (const auto& smp : chart_samples(ch, radius)) {
        CVector<L> y(3);
        y(0) = complex_t<L>(smp.alpha.real(), smp.alpha.imag());
        for (int i = 0; i < 2; ++i) y(i + 1) = complex_t<L>(smp.beta(i).real(), smp.beta(i).imag());
        out = std::max(out, double(chern_curvature_norm<L>(field, y, sc, {alpha_scale, 1.0, 1.0})));
    }
    return out;
}

// Default radii: |alpha| in [1e2, 1e5] (ALG) or rate Re alpha in [5, 25] (ALH).
// Curvature uses a shorter window that stays above the difference-quotient floor.
inline std::vector<double> default_chart_radii(const AsymptoticChart& ch, bool curvature = false, int n = 16) {
    if (ch.kind == AsymptoticKind::ALG) return geometric_radii(1e2, curvature ? 1e4 : 1e5, n);
    return curvature ? linear_radii(4 / ch.rate, 16 / ch.rate, n) : linear_radii(5 / ch.rate, 25 / ch.rate, n);
}

inline void check_chart_radii(const AsymptoticChart& ch, std::span<const double> radii) {
    for (double r : radii) {
        const bool ok = ch.kind == AsymptoticKind::ALG ? r > ch.alpha0 : r > 0;
        if (!ok) throw ConfigError("radius " + std::to_string(r) + " lies outside the chart");
    }
}

inline constexpr double flat_threshold = 1e-12;

enum class ChartObservable { Deviation, Derivative, Curvature };

inline DecayFit chart_decay_fit(const FibrationModel& fm, double eps, const VolumeForm& vf, ChartObservable obs,
                                std::vector<double> radii = {}, int threads = 1, FDScheme sc = {1e-3, 2, true}) {
    const auto ch = to_chart(fm, eps, vf);
    if (radii.empty()) radii = default_chart_radii(ch, obs == ChartObservable::Curvature);
    check_chart_radii(ch, radii);
    auto values = parallel_map(radii.size(), threads, [&](std::size_t i) {
        switch (obs) {
            case ChartObservable::Deviation: return chart_deviation(ch, fm, eps, vf, radii[i]);
            case ChartObservable::Derivative: return chart_derivative(ch, fm, eps, vf, radii[i]);
            case ChartObservable::Curvature: return chart_curvature(ch, fm, eps, vf, radii[i], sc);
        }
        return 0.0;
    });
    const DecayKind kind = ch.kind == AsymptoticKind::ALG ? DecayKind::Power : DecayKind::Exponential;
    const double threshold = obs == ChartObservable::Curvature ? 1e-10 : flat_threshold;
    if (std::all_of(values.begin(), values.end(), [&](double v) { return v < threshold; })) {
        DecayFit out;
        out.kind = kind;
        out.flat = true;
        out.window_lo = *std::min_element(radii.begin(), radii.end());
        out.window_hi = *std::max_element(radii.begin(), radii.end());
        out.radii = std::move(radii);
        out.values = std::move(values);
        return out;
    }
    return fit_decay(kind, std::move(radii), std::move(values));
}

inline DecayFit error_decay_fit(const FibrationModel& fm, double eps, const VolumeForm& vf,
                                std::vector<double> radii = {}, int threads = 1) {
    return chart_decay_fit(fm, eps, vf, ChartObservable::Deviation, std::move(radii), threads);
}

inline DecayFit curvature_decay_fit(const FibrationModel& fm, double eps, const VolumeForm& vf,
                                    std::vector<double> radii = {}, int threads = 1, FDScheme sc = {1e-3, 2, true}) {
    return chart_decay_fit(fm, eps, vf, ChartObservable::Curvature, std::move(radii), threads, sc);
}

// ---- star-like ends: radial profile of the base metric ----

// Rotationally symmetric base end in a radial parameter t. Distance grows at
// `speed`, the level circle has length `circle` per radian, and `area` is the
// area per unit t over the full angle.
struct RadialProfile {
    std::function<double(double)> speed;
    std::function<double(double)> area;
    std::function<double(double)> circle;
    std::function<double(double)> fiber_diameter;
    double t0 = 0;
    double fiber_volume = 1;
};

// t = -log|z| from |z| = 1/2; g = 2B |dz|^2 with B evaluated in log space.
inline RadialProfile star_profile(const FibrationModel& fm, double eps, const VolumeForm& vf) {
    const auto cls = classify_asymptotics(fm);
    if (cls.kind != AsymptoticKind::RayLike && cls.kind != AsymptoticKind::ConeLike)
        throw Unsupported("radial profiles are for star-like ends");
    const int k = fm.cover_degree;
    auto log_density = [=](double t) {
        // log(2 B rho^2); B depends on |z| only for these ends.
        return std::log(2.0) + log_base_coefficient<double>(fm, eps, vf, cplx(-t / k, pi / k)) - 2 * t;
    };
    RadialProfile p;
    p.speed = [=](double t) { return std::exp(0.5 * log_density(t)); };
    p.circle = p.speed;
    p.area = [=](double t) { return 2 * pi * std::exp(log_density(t)); };
    p.fiber_diameter = [=](double t) {
        double d2 = 0;
        for (const auto& f : fm.factors) {
            const cplx log_q = double(f.step) * cplx(-t / k, pi / k);
            auto sp = stripped_periods<double>(f.shape, std::exp(log_q), log_q);
            const double pairing = im_pairing(sp.t[0], sp.t[1]);
            const double span = std::abs(sp.t[0]) + std::abs(sp.t[1]);
            d2 += eps * f.area_scale * span * span / (4 * pairing);
        }
        return std::sqrt(d2);
    };
    p.t0 = std::log(2.0);
    p.fiber_volume = eps;
    return p;
}

// The plane in polar radius: balls about the origin have area pi r^2.
inline RadialProfile euclidean_profile() {
    RadialProfile p;
    p.speed = [](double) { return 1.0; };
    p.circle = [](double t) { return t; };
    p.area = [](double t) { return 2 * pi * t; };
    p.fiber_diameter = [](double) { return 0.0; };
    return p;
}

namespace detail {

inline double integrate(const std::function<double(double)>& f, double a, double b) {
    if (b <= a) return 0;
    using boost::math::quadrature::gauss_kronrod;
    return gauss_kronrod<double, 31>::integrate(f, a, b, 15, 1e-13);
}

// Distance from t0 out to t, and its inverse.
inline double radial_distance(const RadialProfile& p, double t) { return integrate(p.speed, p.t0, t); }

inline double radial_parameter(const RadialProfile& p, double r) {
    double hi = p.t0 + 1;
    while (radial_distance(p, hi) < r) {
        hi = p.t0 + 2 * (hi - p.t0);
        if (hi > 1e7) throw NoConvergence("radius beyond the profile range");
    }
    std::uintmax_t iters = 200;
    auto [a, b] = boost::math::tools::toms748_solve([&](double t) { return radial_distance(p, t) - r; }, p.t0, hi,
                                                    boost::math::tools::eps_tolerance<double>(50), iters);
    return 0.5 * (a + b);
}

}  // namespace detail

struct VolumeSeries {
    std::vector<double> radii, parameters, volumes;
};

// Volume of the ball = fiber volume x base area within radial distance r.
inline VolumeSeries volume_series(const RadialProfile& p, const std::vector<double>& radii, int threads = 1) {
    VolumeSeries out{radii, {}, {}};
    auto rows = parallel_map(radii.size(), threads, [&](std::size_t i) {
        const double t = detail::radial_parameter(p, radii[i]);
        return std::pair{t, p.fiber_volume * detail::integrate(p.area, p.t0, t)};
    });
    for (auto [t, v] : rows) {
        out.parameters.push_back(t);
        out.volumes.push_back(v);
    }
    return out;
}

inline DecayFit volume_growth_fit(const RadialProfile& p, std::vector<double> radii = {}, int threads = 1) {
    if (radii.empty()) radii = geometric_radii(1e2, 1e6, 13);
    auto vs = volume_series(p, radii, threads);
    return fit_decay(DecayKind::Power, std::move(radii), std::move(vs.volumes));
}

struct SobReport {
    double beta = 0;
    double upper_min = 0, upper_max = 0;  // Vol(B(x0, r)) / r^beta
    double lower_min = 0, lower_max = 0;  // inner estimate of |B(x, r_x / 2)| / r_x^beta
    bool connected = true;                // annuli of circle-fibred ends are connected
    std::vector<double> radii, upper, lower;
};

// Upper clause from the ball volumes. Lower clause from a region inside
// B(x, r/2): radial half-width w and angular half-width w / circle, with
// w = (r/2 - fiber diameter) / 2 so that radial + angular + fiber paths fit.
inline SobReport sob_check(const RadialProfile& p, std::vector<double> radii = {}, int threads = 1) {
    if (radii.empty()) radii = geometric_radii(1e2, 1e6, 13);
    auto vs = volume_series(p, radii, threads);
    SobReport rep;
    rep.beta = fit_decay(DecayKind::Power, radii, vs.volumes).slope;
    rep.radii = radii;
    auto lower = parallel_map(radii.size(), threads, [&](std::size_t i) {
        const double r = radii[i];
        const double tx = vs.parameters[i];
        const double far = detail::radial_parameter(p, 1.25 * r);
        const double w = 0.5 * (0.5 * r - p.fiber_diameter(far));
        if (!(w > 0)) throw NoConvergence("fiber diameter exceeds the ball radius");
        const double tlo = detail::radial_parameter(p, std::max(r - w, 0.0));
        const double thi = detail::radial_parameter(p, r + w);
        const double width = std::min(pi, w / std::max({p.circle(tlo), p.circle(thi), p.circle(tx)}));
        const double vol = p.fiber_volume * detail::integrate(p.area, tlo, thi) * width / pi;
        return vol / std::pow(r, rep.beta);
    });
    for (std::size_t i = 0; i < radii.size(); ++i) {
        rep.upper.push_back(vs.volumes[i] / std::pow(radii[i], rep.beta));
        rep.lower.push_back(lower[i]);
    }
    rep.upper_min = *std::min_element(rep.upper.begin(), rep.upper.end());
    rep.upper_max = *std::max_element(rep.upper.begin(), rep.upper.end());
    rep.lower_min = *std::min_element(rep.lower.begin(), rep.lower.end());
    rep.lower_max = *std::max_element(rep.lower.begin(), rep.lower.end());
    return rep;
}

// ---- tangent cones ----

struct ConeDescription {
    AsymptoticKind kind = AsymptoticKind::ALG;
    Rational angle_over_pi{0};
    double limit = std::numeric_limits<double>::quiet_NaN();      // extrapolated rescaled coefficient
    double published = std::numeric_limits<double>::quiet_NaN();  // displayed constant, when there is one
    std::vector<double> lambdas, coefficients;
};

namespace detail {

inline const std::vector<double>& cone_lambdas() {
    static const std::vector<double> l{1e-4, 1e-5, 1e-6, 1e-7};
    return l;
}

// Coefficients must settle: successive differences shrink.
inline void require_cauchy(const std::vector<double>& c) {
    for (std::size_t i = 2; i < c.size(); ++i)
        if (std::abs(c[i] - c[i - 1]) > std::abs(c[i - 1] - c[i - 2]) + 1e-10 * std::abs(c[i]))
            throw NoConvergence("rescaled coefficients do not settle");
}

// Linear extrapolation to x = 0 through the last two points.
inline double extrapolate(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    return y[n - 1] - x[n - 1] * (y[n - 1] - y[n - 2]) / (x[n - 1] - x[n - 2]);
}

}  // namespace detail

inline ConeDescription tangent_cone(const FibrationModel& fm, double eps, const VolumeForm& vf) {
    const auto cls = classify_asymptotics(fm);
    ConeDescription out;
    out.kind = cls.kind;
    const int k = fm.cover_degree;
    const double k0 = std::abs(vf.k0);
    if (cls.kind == AsymptoticKind::ALG || cls.kind == AsymptoticKind::ALH) {
        const auto ch = to_chart(fm, eps, vf);
        out.angle_over_pi = ch.angle_over_pi();
        return out;
    }
    auto log_b = [&](double t) { return log_base_coefficient<double>(fm, eps, vf, cplx(-t / k, pi / k)); };
    const auto& lambdas = detail::cone_lambdas();
    out.lambdas = lambdas;
    std::vector<double> xs;
    if (cls.kind == AsymptoticKind::RayLike) {
        // z = exp(-lambda^{-1/2} s^{1/2} + i theta) / 2 at s = 1; ds (x) ds coefficient of lambda^2 g.
        for (double l : lambdas) {
            const double t = std::log(2.0) + 1 / std::sqrt(l);
            out.coefficients.push_back(l * std::exp(log_b(t) - 2 * t) / 4);
            xs.push_back(std::sqrt(l));
        }
        double b = 1;
        for (const auto& f : fm.factors) b *= std::get<FiberType>(f.shape).b;
        out.published = b * k0 * k0 / (2 * pi * eps);
    } else {
        // z = (alpha / alpha_l)^{-n}, alpha_l |log alpha_l|^{-1/2} = lambda, at |alpha| = 1.
        const int p = k - fm.coordinate_powers[0] - fm.coordinate_powers[1];
        const double n = double(k) / p;
        for (double l : lambdas) {
            std::uintmax_t iters = 200;
            auto eq = [&](double u) { return u + 0.5 * std::log(u) + std::log(l); };
            auto [a, b] = boost::math::tools::toms748_solve(eq, 1e-3, -2 * std::log(l) + 10,
                                                            boost::math::tools::eps_tolerance<double>(50), iters);
            const double u = 0.5 * (a + b);
            const double t = n * u;
            out.coefficients.push_back(l * l * n * n * std::exp(log_b(t) - 2 * t));
            xs.push_back(1 / u);
        }
        out.angle_over_pi = Rational(2 * p, k);
        const auto* other = std::get_if<FiberType>(&fm.factors[1].shape);
        const auto* star = std::get_if<FiberType>(&fm.factors[0].shape);
        if (other && star && other->kind == FiberKind::IVstar && star->kind == FiberKind::Istar)
            out.published = 216 * std::sqrt(3.0) * star->b * k0 * k0 / (eps * eps);
    }
    detail::require_cauchy(out.coefficients);
    out.limit = detail::extrapolate(xs, out.coefficients);
    return out;
}

}  // namespace semiflat
