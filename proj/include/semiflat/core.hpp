#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace semiflat {

template <class R>
using complex_t = std::complex<R>;
using cplx = std::complex<double>;

template <class R>
inline constexpr R pi_v = std::numbers::pi_v<R>;
inline constexpr double pi = std::numbers::pi;

template <class R>
using CMatrix = Eigen::Matrix<complex_t<R>, Eigen::Dynamic, Eigen::Dynamic>;
template <class R>
using CVector = Eigen::Matrix<complex_t<R>, Eigen::Dynamic, 1>;

using CMatrixd = CMatrix<double>;
using CVectord = CVector<double>;

// Failure modes surfaced by the library. Each maps to one kind of invalid
// input or numerical breakdown so callers can report it precisely.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define SEMIFLAT_ERROR(Name)                 \
    struct Name : Error {                    \
        using Error::Error;                  \
    }

SEMIFLAT_ERROR(SingularPolarization);
SEMIFLAT_ERROR(NotPositive);
SEMIFLAT_ERROR(UnsupportedType);
SEMIFLAT_ERROR(UnsupportedPair);
SEMIFLAT_ERROR(Unsupported);
SEMIFLAT_ERROR(DegenerateLattice);
SEMIFLAT_ERROR(SingularPeriods);
SEMIFLAT_ERROR(StepTooSmall);
SEMIFLAT_ERROR(FitRejected);
SEMIFLAT_ERROR(NoConvergence);
SEMIFLAT_ERROR(PolePoint);
SEMIFLAT_ERROR(BranchPoint);
SEMIFLAT_ERROR(NotConvergent);
SEMIFLAT_ERROR(OriginSingular);
SEMIFLAT_ERROR(ConfigError);

#undef SEMIFLAT_ERROR

// exp(2 pi i k / n), with the residue reduced first so that ζ^n is exact-ish
// and small orders (2, 4) come out as exact ±1, ±i.
template <class R = double>
complex_t<R> root_of_unity(int n, long k) {
    long r = ((k % n) + n) % n;
    if (4 * r == n) return {0, 1};
    if (2 * r == n) return {-1, 0};
    if (4 * r == 3 * n) return {0, -1};
    if (r == 0) return {1, 0};
    R t = 2 * pi_v<R> * R(r) / R(n);
    return {std::cos(t), std::sin(t)};
}

// Integer power by repeated squaring; keeps z = s^d an exact power of s.
template <class T>
T ipow(T base, long e) {
    if (e < 0) return T(1) / ipow(base, -e);
    T out(1);
    while (e) {
        if (e & 1) out *= base;
        base *= base;
        e >>= 1;
    }
    return out;
}

// Imaginary part of conj(a) * b: the oriented area spanned by two periods.
template <class R>
R im_pairing(const complex_t<R>& a, const complex_t<R>& b) {
    return a.real() * b.imag() - a.imag() * b.real();
}

template <class Derived>
double max_abs(const Eigen::MatrixBase<Derived>& m) {
    double out = 0;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            out = std::max(out, double(std::abs(m(i, j))));
    return out;
}

}  // namespace semiflat
