#pragma once

#include <functional>
#include <limits>

#include "metric.hpp"

namespace semiflat {

struct FDScheme {
    double step = 1e-4;
    int order = 2;
    bool richardson = true;

    void validate() const {
        if (!(step >= 1e-8 && step <= 1e-2)) throw ConfigError("fd step must lie in [1e-8, 1e-2]");
        if (order != 2 && order != 4) throw ConfigError("fd order must be 2 or 4");
    }
};

// A Hermitian coefficient field over complex coordinates x. Derivatives are
// taken along the real coordinates (Re x_0, Im x_0, Re x_1, ...) and the
// Wirtinger combinations assembled afterwards.
template <class R>
using MetricField = std::function<CMatrix<R>(const CVector<R>&)>;

namespace detail {

template <class R>
CVector<R> shifted(CVector<R> x, int real_index, R d) {
    auto& c = x(real_index / 2);
    c += (real_index % 2 == 0) ? complex_t<R>(d, 0) : complex_t<R>(0, d);
    return x;
}

template <class R>
CMatrix<R> first_difference(const MetricField<R>& f, const CVector<R>& x, int j, R h, int order) {
    if (order == 2) return (f(shifted(x, j, h)) - f(shifted(x, j, -h))) / complex_t<R>(2 * h);
    return (-f(shifted(x, j, 2 * h)) + R(8) * f(shifted(x, j, h)) - R(8) * f(shifted(x, j, -h)) +
            f(shifted(x, j, -2 * h))) /
           complex_t<R>(12 * h);
}

template <class R>
CMatrix<R> richardson(const CMatrix<R>& coarse, const CMatrix<R>& fine, int order) {
    const R w = std::pow(R(2), R(order));
    return (w * fine - coarse) / complex_t<R>(w - 1);
}

template <class R>
std::vector<R> real_steps(const FDScheme& sc, const std::vector<double>& scales, int n, R factor) {
    std::vector<R> out(2 * n);
    for (int j = 0; j < 2 * n; ++j) {
        const double s = scales.empty() ? 1.0 : scales[std::size_t(j / 2)];
        out[j] = R(sc.step) * R(s) * factor;
    }
    return out;
}

// Derivatives of f along every real coordinate.
template <class R>
std::vector<CMatrix<R>> gradient(const MetricField<R>& f, const CVector<R>& x, const FDScheme& sc,
                                 const std::vector<double>& scales, R factor) {
    const int n = int(x.size());
    auto steps = real_steps<R>(sc, scales, n, factor);
    std::vector<CMatrix<R>> out(2 * n);
    for (int j = 0; j < 2 * n; ++j) {
        out[j] = first_difference(f, x, j, steps[j], sc.order);
        if (sc.richardson)
            out[j] = richardson(out[j], first_difference(f, x, j, steps[j] / 2, sc.order), sc.order);
    }
    return out;
}

template <class R>
struct SecondOrderData {
    CMatrix<R> value;
    std::vector<CMatrix<R>> first;                // along real coordinate j
    std::vector<std::vector<CMatrix<R>>> second;  // along real coordinates j, l
};

// Second-order central stencils at a single step.
template <class R>
SecondOrderData<R> stencil(const MetricField<R>& f, const CVector<R>& x, const std::vector<R>& steps) {
    const int dim = int(steps.size());
    SecondOrderData<R> out;
    out.value = f(x);
    out.first.resize(dim);
    out.second.assign(dim, std::vector<CMatrix<R>>(dim));
    std::vector<CMatrix<R>> plus(dim), minus(dim);
    for (int j = 0; j < dim; ++j) {
        plus[j] = f(shifted(x, j, steps[j]));
        minus[j] = f(shifted(x, j, -steps[j]));
        out.first[j] = (plus[j] - minus[j]) / complex_t<R>(2 * steps[j]);
        out.second[j][j] = (plus[j] - R(2) * out.value + minus[j]) / complex_t<R>(steps[j] * steps[j]);
    }
    for (int j = 0; j < dim; ++j)
        for (int l = j + 1; l < dim; ++l) {
            auto at = [&](R a, R b) { return f(shifted(shifted(x, j, a * steps[j]), l, b * steps[l])); };
            out.second[j][l] = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / complex_t<R>(4 * steps[j] * steps[l]);
            out.second[l][j] = out.second[j][l];
        }
    return out;
}

// Stencils at h and h/2 combined by Richardson when the scheme asks for it.
template <class R>
SecondOrderData<R> second_order_data(const MetricField<R>& f, const CVector<R>& x, const FDScheme& sc,
                                     const std::vector<double>& scales) {
    const int n = int(x.size());
    auto coarse = stencil(f, x, real_steps<R>(sc, scales, n, R(1)));
    if (!sc.richardson) return coarse;
    auto fine = stencil(f, x, real_steps<R>(sc, scales, n, R(0.5)));
    for (std::size_t j = 0; j < coarse.first.size(); ++j) {
        coarse.first[j] = richardson(coarse.first[j], fine.first[j], 2);
        for (std::size_t l = 0; l < coarse.first.size(); ++l)
            coarse.second[j][l] = richardson(coarse.second[j][l], fine.second[j][l], 2);
    }
    return coarse;
}

template <class R>
CMatrix<R> wirtinger(const std::vector<CMatrix<R>>& d, int c, bool conjugate) {
    const complex_t<R> sign(0, conjugate ? 1 : -1);
    return (d[2 * c] + sign * d[2 * c + 1]) / complex_t<R>(2);
}

// d_c dbar_d from the real Hessian.
template <class R>
CMatrix<R> mixed_wirtinger(const SecondOrderData<R>& s, int c, int d) {
    const complex_t<R> i(0, 1);
    return (s.second[2 * c][2 * d] + s.second[2 * c + 1][2 * d + 1] +
            i * (s.second[2 * c][2 * d + 1] - s.second[2 * c + 1][2 * d])) /
           complex_t<R>(4);
}

// A with A h A^H = I, from the Cholesky factor of h.
template <class R>
CMatrix<R> orthonormalizer(const CMatrix<R>& h) {
    CMatrix<R> herm = (h + h.adjoint()) / complex_t<R>(2);
    Eigen::LLT<CMatrix<R>> llt(herm);
    if (llt.info() != Eigen::Success) throw NotPositive("metric is not positive definite");
    CMatrix<R> l = llt.matrixL();
    return l.inverse();
}

template <class R>
R max_entry(const CMatrix<R>& m) {
    R out = 0;
    for (Eigen::Index i = 0; i < m.size(); ++i) out = std::max(out, std::abs(m.data()[i]));
    return out;
}

}  // namespace detail

struct ClosednessResult {
    double residual = 0;  // max |d_c h_ab - d_a h_cb| / max |h| at the finest step
    double order = std::numeric_limits<double>::quiet_NaN();  // NaN when every residual sits at the noise floor
    std::array<double, 3> residuals{};                          // at h, h/2, h/4
};

// Closedness of omega = i h_ab dx^a ^ d conj(x^b): the (2,1) part of d omega
// vanishes iff d_c h_ab = d_a h_cb. `scales` multiplies the step per complex
// coordinate.
template <class R>
ClosednessResult closedness_residual(const MetricField<R>& f, const CVector<R>& x, const FDScheme& sc,
                                     const std::vector<double>& scales = {}) {
    sc.validate();
    const int n = int(x.size());
    const R norm = std::max(detail::max_entry<R>(f(x)), std::numeric_limits<R>::min());
    ClosednessResult out;
    for (int level = 0; level < 3; ++level) {
        auto grad = detail::gradient(f, x, sc, scales, R(1) / R(1 << level));
        std::vector<CMatrix<R>> d(n);
        for (int c = 0; c < n; ++c) d[c] = detail::wirtinger(grad, c, false);
        R worst = 0;
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                for (int c = a + 1; c < n; ++c) worst = std::max(worst, std::abs(d[c](a, b) - d[a](c, b)));
        out.residuals[level] = double(worst / norm);
    }
    double min_scale = 1;
    for (double s : scales) min_scale = std::min(min_scale, s);
    const double floor = 1e2 * double(std::numeric_limits<R>::epsilon()) / (sc.step * min_scale);
    out.residual = out.residuals[2];
    if (out.residuals[1] < floor && out.residuals[2] < floor) return out;
    if (out.residuals[2] > out.residuals[1]) throw StepTooSmall("closedness residual grows as the step shrinks");
    out.order = std::log2(out.residuals[0] / out.residuals[2]) / 2;
    return out;
}

// Pointwise norm of the Chern curvature, contracted in an h-orthonormal frame.
// Second derivatives use second-order stencils, lifted by Richardson.
template <class R>
R chern_curvature_norm(const MetricField<R>& f, const CVector<R>& x, const FDScheme& sc,
                       const std::vector<double>& scales = {}) {
    sc.validate();
    const int n = int(x.size());
    auto data = detail::second_order_data(f, x, sc, scales);
    const CMatrix<R>& h = data.value;
    const CMatrix<R> inv = h.inverse();
    const CMatrix<R> a = detail::orthonormalizer(h);
    // rc[k][l](i, j) = R_{i jbar k lbar}, then rotated in (i, j).
    std::vector<std::vector<CMatrix<R>>> rc(n, std::vector<CMatrix<R>>(n));
    for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
            CMatrix<R> r = -detail::mixed_wirtinger(data, k, l) +
                           detail::wirtinger(data.first, k, false) * inv * detail::wirtinger(data.first, l, true);
            rc[k][l] = a * r * a.adjoint();
        }
    R total = 0;
    for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
            CMatrix<R> acc = CMatrix<R>::Zero(n, n);
            for (int kk = 0; kk < n; ++kk)
                for (int ll = 0; ll < n; ++ll) acc += a(k, kk) * std::conj(a(l, ll)) * rc[kk][ll];
            total += acc.squaredNorm();
        }
    return std::sqrt(total);
}

// Norm of Ric = -i d dbar log det h in an h-orthonormal frame.
template <class R>
R ricci_norm(const MetricField<R>& f, const CVector<R>& x, const FDScheme& sc,
             const std::vector<double>& scales = {}) {
    sc.validate();
    const int n = int(x.size());
    MetricField<R> logdet = [&](const CVector<R>& y) {
        CMatrix<R> out(1, 1);
        out(0, 0) = std::log(std::abs(f(y).determinant()));
        return out;
    };
    auto data = detail::second_order_data(logdet, x, sc, scales);
    CMatrix<R> ric(n, n);
    for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d) ric(c, d) = -detail::mixed_wirtinger(data, c, d)(0, 0);
    const CMatrix<R> a = detail::orthonormalizer<R>(f(x));
    return (a * ric * a.adjoint()).norm();
}

// Complex Hessian d_c dbar_d phi of a real function.
template <class R>
CMatrix<R> complex_hessian(const std::function<R(const CVector<R>&)>& phi, const CVector<R>& x, const FDScheme& sc,
                           const std::vector<double>& scales = {}) {
    sc.validate();
    const int n = int(x.size());
    MetricField<R> wrapped = [&](const CVector<R>& y) { return CMatrix<R>::Constant(1, 1, phi(y)); };
    auto data = detail::second_order_data(wrapped, x, sc, scales);
    CMatrix<R> out(n, n);
    for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d) out(c, d) = detail::mixed_wirtinger(data, c, d)(0, 0);
    return out;
}

template <class R>
using SiegelField = std::function<CMatrix<R>(complex_t<R>)>;

struct RicciBase {
    cplx lhs;  // coefficient of dz ^ dzbar in -i d dbar log det Im Z
    cplx rhs;  // coefficient of dz ^ dzbar in (i/4) tr(Y^-1 dZ ^ Y^-1 dZbar)
    double residual = 0;
};

inline RicciBase ricci_form_base(const SiegelField<double>& zf, cplx z0, const FDScheme& sc, double scale = 1) {
    sc.validate();
    MetricField<double> logdet = [&](const CVectord& y) {
        CMatrixd out(1, 1);
        out(0, 0) = std::log(zf(y(0)).imag().determinant());
        return out;
    };
    CVectord x = CVectord::Constant(1, z0);
    auto data = detail::second_order_data(logdet, x, sc, {scale});
    const cplx lhs = -cplx(0, 1) * detail::mixed_wirtinger(data, 0, 0)(0, 0);

    // Z is holomorphic, so dZ/dz is its derivative along Re z.
    MetricField<double> zfield = [&](const CVectord& y) { return zf(y(0)); };
    const CMatrixd dz = detail::gradient(zfield, x, sc, {scale}, 1.0)[0];
    const Eigen::MatrixXd y = zf(z0).imag();
    const CMatrixd yinv = y.inverse().cast<cplx>();
    const cplx rhs = cplx(0, 0.25) * (yinv * dz * yinv * dz.conjugate()).trace();
    return {lhs, rhs, std::abs(lhs - rhs)};
}

// The semi-flat metric as a field over (z, v) near a base point; z moves
// through log(z / z0) so the cover branch follows continuously.
template <class R>
MetricField<R> semiflat_field(const FibrationModel& fm, double eps, const VolumeForm& vf, const CoverPoint<double>& p0) {
    const complex_t<R> log_s0(R(p0.log_s.real()), R(p0.log_s.imag()));
    const complex_t<R> z0 = std::exp(R(p0.degree) * log_s0);
    const int k = p0.degree;
    return [=](const CVector<R>& x) {
        CoverPoint<R> p{log_s0 + std::log(x(0) / z0) / R(k), k};
        return metric_at<R>(fm, eps, vf, p, CVector<R>(x.tail(x.size() - 1))).h;
    };
}

template <class R>
CVector<R> field_point(const CoverPoint<double>& p, const CVectord& v) {
    CVector<R> x(v.size() + 1);
    const cplx z = p.z();
    x(0) = complex_t<R>(R(z.real()), R(z.imag()));
    for (Eigen::Index i = 0; i < v.size(); ++i) x(i + 1) = complex_t<R>(R(v(i).real()), R(v(i).imag()));
    return x;
}

// Normalized moduli Z along z for a product model.
inline SiegelField<double> siegel_field(const FibrationModel& fm, double eps, const CoverPoint<double>& p0) {
    const cplx z0 = p0.z();
    return [=](cplx z) {
        CoverPoint<double> p{p0.log_s + std::log(z / z0) / double(p0.degree), p0.degree};
        auto pd = period_data(fm, eps, p);
        return siegel_normalize(PolarizedFamily(pd.periods, block_polarization(fm.fiber_dim()))).moduli;
    };
}

}  // namespace semiflat
