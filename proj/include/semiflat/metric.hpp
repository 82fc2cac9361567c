#pragma once

#include <boost/math/quadrature/gauss.hpp>

#include "kodaira.hpp"
#include "lattice.hpp"

namespace semiflat {

// Holomorphic volume form Omega = k(z)/z^2 dz ^ dv. k is a polynomial whose
// constant term k0 is the only datum the asymptotics see.
struct VolumeForm {
    cplx k0{1, 0};
    std::vector<cplx> higher;  // coefficients of z, z^2, ...

    template <class R>
    complex_t<R> k_at(complex_t<R> z) const {
        complex_t<R> acc(0);
        for (auto it = higher.rbegin(); it != higher.rend(); ++it)
            acc = (acc + complex_t<R>(R(it->real()), R(it->imag()))) * z;
        return acc + complex_t<R>(R(k0.real()), R(k0.imag()));
    }
};

// The elliptic corollary can be read with Omega or with Omega/sqrt2; both
// readings are kept as presets.
enum class Normalization { Theorem, EllipticHalf };

// A point of the cover z = s^k, stored through log s so that log z and the
// factor logarithms are single valued and never lose range.
template <class R>
struct CoverPoint {
    complex_t<R> log_s;
    int degree = 1;

    static CoverPoint from_s(complex_t<R> s, int degree) { return {std::log(s), degree}; }
    complex_t<R> s() const { return std::exp(log_s); }
    complex_t<R> z() const { return ipow(s(), degree); }
    complex_t<R> log_z() const { return R(degree) * log_s; }
};

template <class R>
struct FactorState {
    std::array<complex_t<R>, 2> tau{};
    std::array<complex_t<R>, 2> dtau_dz{};
    R pairing = 0;      // Im(conj tau_1 tau_2)
    R fiber_coeff = 0;  // eps_i / (2 pairing), the flat fiber metric
};

template <class R>
FactorState<R> factor_state(const Factor& f, double eps, const CoverPoint<R>& p) {
    const complex_t<R> log_q = R(f.step) * p.log_s;
    const complex_t<R> q = ipow(p.s(), f.step);
    auto fp = full_periods<R>(f.shape, q, log_q);
    FactorState<R> st;
    st.tau = fp.tau;
    const complex_t<R> z = p.z();
    for (int j = 0; j < 2; ++j) st.dtau_dz[j] = fp.dtau_dlog[j] * R(f.step) / (R(p.degree) * z);
    st.pairing = im_pairing(st.tau[0], st.tau[1]);
    if (!(st.pairing > 0)) throw DegenerateLattice("period pairing is not positive at this point");
    st.fiber_coeff = R(eps * f.area_scale) / (2 * st.pairing);
    return st;
}

// Closed-form Christoffel symbol of the flat lattice connection for one
// elliptic factor.
template <class R>
complex_t<R> christoffel_factor(const FactorState<R>& st, complex_t<R> v) {
    return (im_pairing(st.tau[0], v) * st.dtau_dz[1] - im_pairing(st.tau[1], v) * st.dtau_dz[0]) / st.pairing;
}

// The I_b* factor in its double-cover coordinate u (z = u^2 locally), with
// w = v/u: Gamma = w/(2u) - i Im(w) / (2u |log|u||).
template <class R>
complex_t<R> christoffel_istar(complex_t<R> u, complex_t<R> v) {
    const complex_t<R> w = v / u;
    const R l = -std::log(std::abs(u));
    return w / (R(2) * u) - complex_t<R>(0, 1) * w.imag() / (R(2) * u * l);
}

template <class R>
struct MetricSample {
    CoverPoint<R> point;
    CVector<R> v;
    CMatrix<R> h;        // coefficients of i dx^a ^ d conj(x^b), x = (z, v_1, ...)
    complex_t<R> g;      // Omega coefficient k(z)/z^2
};

inline double base_factor(int m) { return m == 1 ? 2.0 : 1.0; }

template <class R>
MetricSample<R> metric_at(const FibrationModel& fm, double eps, const VolumeForm& vf, const CoverPoint<R>& p,
                          const CVector<R>& v) {
    using C = complex_t<R>;
    if (!(eps > 0)) throw ConfigError("epsilon must be positive");
    const int m = fm.fiber_dim();
    if (v.size() != m) throw ConfigError("fiber coordinate dimension mismatch");
    const C z = p.z();
    MetricSample<R> out{p, v, CMatrix<R>::Zero(m + 1, m + 1), vf.k_at<R>(z) / (z * z)};
    R prod = 1;
    for (int i = 0; i < m; ++i) {
        auto st = factor_state<R>(fm.factors[i], eps, p);
        const C gam = christoffel_factor(st, v(i));
        const R f = st.fiber_coeff;
        prod *= f;
        out.h(0, 0) += f * std::norm(gam);
        out.h(0, i + 1) = -f * gam;
        out.h(i + 1, 0) = -f * std::conj(gam);
        out.h(i + 1, i + 1) = f;
    }
    out.h(0, 0) += std::norm(out.g) / (R(base_factor(m)) * prod);
    return out;
}

// log of the base coefficient |g|^2 / (c prod F_i), computed from log s alone
// so that it stays finite for |z| far below the double range.
template <class R>
R log_base_coefficient(const FibrationModel& fm, double eps, const VolumeForm& vf, complex_t<R> log_s) {
    const int k = fm.cover_degree;
    const complex_t<R> log_z = R(k) * log_s;
    const complex_t<R> z = std::exp(log_z);
    R out = 2 * std::log(std::abs(vf.k_at<R>(z))) - 4 * log_z.real() - std::log(R(base_factor(fm.fiber_dim())));
    for (const auto& f : fm.factors) {
        const complex_t<R> log_q = R(f.step) * log_s;
        auto sp = stripped_periods<R>(f.shape, std::exp(log_q), log_q);
        R stripped = im_pairing(sp.t[0], sp.t[1]);
        if (!(stripped > 0)) throw DegenerateLattice("period pairing is not positive at this point");
        out += std::log(2 * stripped / R(eps * f.area_scale)) + 2 * R(sp.power) * log_q.real();
    }
    return out;
}

// Im(conj t_1 t_2) of the stripped periods at q = 0; the limit fiber metric
// in a chart with v = s^a beta is eps_i / (2 * this).
inline double leading_pairing(const Factor& f) {
    auto sp = stripped_periods<double>(f.shape, cplx(0), cplx(0));
    return im_pairing(sp.t[0], sp.t[1]);
}

// Calibration: the constant c with c det h = |g_eff|^2 on the flat model
// (square lattice, g = 1, eps = 2).
inline double calibration_constant(int m, Normalization n) {
    FibrationModel flat;
    flat.cover_degree = 1;
    for (int i = 0; i < m; ++i) flat.factors.push_back(Factor{ConstantShape{cplx(0, 1), 0}, 1, 1.0});
    VolumeForm vf;
    CoverPoint<double> p{cplx(std::log(0.5), 0.3), 1};
    auto ms = metric_at<double>(flat, 2.0, vf, p, CVectord::Zero(m));
    const double g_eff2 = std::norm(ms.g) * ((n == Normalization::EllipticHalf && m == 1) ? 0.5 : 1.0);
    return g_eff2 / ms.h.determinant().real();
}

template <class R>
double ma_residual(const MetricSample<R>& ms, Normalization n = Normalization::Theorem) {
    const int m = int(ms.v.size());
    static const double c[2][2] = {{calibration_constant(1, Normalization::Theorem),
                                    calibration_constant(1, Normalization::EllipticHalf)},
                                   {calibration_constant(2, Normalization::Theorem),
                                    calibration_constant(2, Normalization::EllipticHalf)}};
    const double cal = c[m - 1][n == Normalization::EllipticHalf ? 1 : 0];
    const double g_eff2 = double(std::norm(ms.g)) * ((n == Normalization::EllipticHalf && m == 1) ? 0.5 : 1.0);
    const double det = double(ms.h.determinant().real());
    return std::abs(cal * det - g_eff2) / g_eff2;
}

// Block period matrix of the model at a point and its z-derivative.
struct PeriodData {
    CMatrixd periods;
    CMatrixd derivative;
};

inline PeriodData period_data(const FibrationModel& fm, double eps, const CoverPoint<double>& p) {
    const int m = fm.fiber_dim();
    PeriodData pd{CMatrixd::Zero(m, 2 * m), CMatrixd::Zero(m, 2 * m)};
    for (int i = 0; i < m; ++i) {
        auto st = factor_state<double>(fm.factors[i], eps, p);
        for (int j = 0; j < 2; ++j) {
            pd.periods(i, 2 * i + j) = st.tau[j];
            pd.derivative(i, 2 * i + j) = st.dtau_dz[j];
        }
    }
    return pd;
}

inline RMatrixd block_polarization(int m) {
    RMatrixd q = RMatrixd::Zero(2 * m, 2 * m);
    for (int i = 0; i < m; ++i) {
        q(2 * i, 2 * i + 1) = 1;
        q(2 * i + 1, 2 * i) = -1;
    }
    return q;
}

// Gamma = (dT/dz) (T; conj T)^{-1} (v; conj v) for an arbitrary period matrix.
inline CVectord christoffel_general(const CMatrixd& t, const CMatrixd& dt, const CVectord& v) {
    const auto m = t.rows();
    CMatrixd st(2 * m, 2 * m);
    st << t, t.conjugate();
    Eigen::JacobiSVD<CMatrixd> svd(st);
    const auto& sv = svd.singularValues();
    if (sv(sv.size() - 1) <= 0 || sv(0) / sv(sv.size() - 1) > 1e12)
        throw SingularPeriods("period matrix is numerically singular");
    CVectord vv(2 * m);
    vv << v, v.conjugate();
    return dt * st.partialPivLu().solve(vv);
}

inline CVectord christoffel_closed(const FibrationModel& fm, double eps, const CoverPoint<double>& p,
                                   const CVectord& v) {
    CVectord out(fm.fiber_dim());
    for (int i = 0; i < fm.fiber_dim(); ++i)
        out(i) = christoffel_factor(factor_state<double>(fm.factors[i], eps, p), v(i));
    return out;
}

// Area of fiber factor i: the fiber block integrated over a fundamental cell.
inline double fiber_area(const MetricSample<double>& ms, const FibrationModel& fm, double eps, int i) {
    auto st = factor_state<double>(fm.factors[i], eps, ms.point);
    const double jac = st.pairing;
    const double coeff = ms.h(i + 1, i + 1).real();
    using boost::math::quadrature::gauss;
    auto inner = [&](double) {
        return gauss<double, 7>::integrate([&](double) { return 2 * coeff * jac; }, 0.0, 1.0);
    };
    return gauss<double, 7>::integrate(inner, 0.0, 1.0);
}

// Seeded in-chart sample: |z| in [zmin, zmax], arg s off the log slit, v
// spread over a fundamental cell of each factor.
struct SampleSpec {
    double zmin = 0.05;
    double zmax = 0.5;
};

inline std::pair<CoverPoint<double>, CVectord> draw_sample(const FibrationModel& fm, double eps, SplitMix64& rng,
                                                           SampleSpec spec = {}) {
    const int k = fm.cover_degree;
    const double zr = rng.uniform(spec.zmin, spec.zmax);
    const double arg = rng.uniform(0.02, 1.0 - 0.02) * 2 * pi / k;
    CoverPoint<double> p{cplx(std::log(zr) / k, arg), k};
    CVectord v(fm.fiber_dim());
    for (int i = 0; i < fm.fiber_dim(); ++i) {
        auto st = factor_state<double>(fm.factors[i], eps, p);
        v(i) = rng.uniform() * st.tau[0] + rng.uniform() * st.tau[1];
    }
    return {p, v};
}

}  // namespace semiflat
