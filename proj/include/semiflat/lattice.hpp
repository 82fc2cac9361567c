#pragma once

#include <utility>

#include <Eigen/Eigenvalues>

#include "core.hpp"

namespace semiflat {

using RMatrixd = Eigen::MatrixXd;
using RVectord = Eigen::VectorXd;

// Period matrix (m x 2m, columns are lattice generators in C^m) together with
// a constant antisymmetric polarization on the lattice.
class PolarizedFamily {
public:
    PolarizedFamily(CMatrixd periods, RMatrixd polarization)
        : periods_(std::move(periods)), polarization_(std::move(polarization)) {
        const auto m = periods_.rows();
        if (m < 1 || m > 2 || periods_.cols() != 2 * m)
            throw DegenerateLattice("period matrix must be m x 2m with m in {1,2}");
        if (polarization_.rows() != 2 * m || polarization_.cols() != 2 * m)
            throw SingularPolarization("polarization must be 2m x 2m");
        if ((polarization_ + polarization_.transpose()).cwiseAbs().maxCoeff() != 0.0)
            throw SingularPolarization("polarization is not antisymmetric");
        if (std::abs(polarization_.determinant()) < 1e-12)
            throw SingularPolarization("polarization is not invertible");
        Eigen::FullPivLU<CMatrixd> lu(stacked());
        if (!lu.isInvertible() || lu.rcond() < 1e-12)
            throw DegenerateLattice("lattice generators do not span the fiber over R");
    }

    int dim() const { return int(periods_.rows()); }
    const CMatrixd& periods() const { return periods_; }
    const RMatrixd& polarization() const { return polarization_; }

    // (T; conj T), the 2m x 2m matrix whose inverse reads off real lattice
    // coordinates of a fiber vector.
    CMatrixd stacked() const {
        const auto m = periods_.rows();
        CMatrixd s(2 * m, 2 * m);
        s.topRows(m) = periods_;
        s.bottomRows(m) = periods_.conjugate();
        return s;
    }

    CMatrixd stacked_inverse() const { return stacked().inverse(); }

private:
    CMatrixd periods_;
    RMatrixd polarization_;
};

struct SiegelData {
    RMatrixd basis_change;  // S with S^t Q S = [[0, I], [-I, 0]]
    CMatrixd scale;         // R
    CMatrixd moduli;        // Z, in the Siegel upper half space
};

inline RMatrixd standard_symplectic(int m) {
    RMatrixd j = RMatrixd::Zero(2 * m, 2 * m);
    j.topRightCorner(m, m) = RMatrixd::Identity(m, m);
    j.bottomLeftCorner(m, m) = -RMatrixd::Identity(m, m);
    return j;
}

inline double min_eigenvalue_symmetric(const RMatrixd& a) {
    Eigen::SelfAdjointEigenSolver<RMatrixd> es(a, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

// Symplectic Gram-Schmidt on the standard basis of Z^{2m}. The pivot is the
// pair with the largest |Q(v_i, v_j)|, ties going to the lowest indices, so S
// is a deterministic function of Q.
inline SiegelData siegel_normalize(const PolarizedFamily& fam) {
    const int m = fam.dim();
    const RMatrixd& q = fam.polarization();
    auto form = [&](const RVectord& x, const RVectord& y) { return x.dot(q * y); };

    std::vector<RVectord> pool;
    for (int i = 0; i < 2 * m; ++i) pool.push_back(RVectord::Unit(2 * m, i));

    RMatrixd s(2 * m, 2 * m);
    for (int step = 0; step < m; ++step) {
        std::size_t bi = 0, bj = 1;
        double best = -1;
        for (std::size_t i = 0; i < pool.size(); ++i)
            for (std::size_t j = i + 1; j < pool.size(); ++j) {
                double w = std::abs(form(pool[i], pool[j]));
                if (w > best) {
                    best = w;
                    bi = i;
                    bj = j;
                }
            }
        if (best < 1e-14) throw SingularPolarization("no symplectic pivot");
        RVectord e = pool[bi];
        RVectord f = pool[bj] / form(pool[bi], pool[bj]);
        s.col(step) = e;
        s.col(m + step) = f;
        std::vector<RVectord> rest;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            if (i == bi || i == bj) continue;
            const RVectord& v = pool[i];
            rest.push_back(v - form(v, f) * e + form(v, e) * f);
        }
        pool = std::move(rest);
    }

    CMatrixd ts = fam.periods() * s.cast<cplx>();
    CMatrixd r = ts.leftCols(m);
    CMatrixd z = r.inverse() * ts.rightCols(m);
    z = (0.5 * (z + z.transpose())).eval();
    RMatrixd im = z.imag();
    if (min_eigenvalue_symmetric(0.5 * (im + im.transpose())) <= 0)
        throw NotPositive("Im Z is not positive definite");
    return {s, r, z};
}

struct HermitianForm {
    CMatrixd matrix;
};

inline CMatrixd hermitian_part(const CMatrixd& a) { return 0.5 * (a + a.adjoint()); }

inline double min_eigenvalue(const CMatrixd& h) {
    // Realified form [[A, -B], [B, A]] has the eigenvalues of A + iB, doubled.
    const auto n = h.rows();
    RMatrixd big(2 * n, 2 * n);
    RMatrixd a = h.real(), b = h.imag();
    big << a, -b, b, a;
    return min_eigenvalue_symmetric(0.5 * (big + big.transpose()));
}

// H^{-1} from the Siegel data, 2 conj(R) Im(Z) R^t.
inline CMatrixd inverse_hermitian_siegel(const SiegelData& sd) {
    return 2.0 * sd.scale.conjugate() * sd.moduli.imag().cast<cplx>() * sd.scale.transpose();
}

// H^{-1} directly from the periods, i conj(T) Q^{-1} T^t.
inline CMatrixd inverse_hermitian_direct(const PolarizedFamily& fam) {
    CMatrixd qinv = fam.polarization().inverse().cast<cplx>();
    return cplx(0, 1) * fam.periods().conjugate() * qinv * fam.periods().transpose();
}

inline HermitianForm hermitian_form(const PolarizedFamily& fam) {
    CMatrixd hinv = hermitian_part(inverse_hermitian_direct(fam));
    if (min_eigenvalue(hinv) <= 0) throw NotPositive("polarization is not Kaehler for these periods");
    return {hermitian_part(hinv.inverse())};
}

// H scaled so that the fiber has the requested volume.
inline HermitianForm scaled_hermitian(const HermitianForm& h, const RMatrixd& q, double fiber_area, int m) {
    if (fiber_area <= 0) throw ConfigError("fiber area must be positive");
    double detq = q.determinant();
    if (detq <= 0) throw SingularPolarization("det Q must be positive");
    return {std::pow(fiber_area / std::sqrt(detq), 1.0 / m) * h.matrix};
}

// Real lattice coordinates of v, i.e. the x with v = T x.
inline RVectord lattice_coordinates(const CVectord& v, const PolarizedFamily& fam) {
    const auto m = fam.dim();
    CVectord vv(2 * m);
    vv << v, v.conjugate();
    return (fam.stacked_inverse() * vv).real();
}

inline CVectord reduce_mod_lattice(const CVectord& v, const PolarizedFamily& fam) {
    RVectord x = lattice_coordinates(v, fam);
    for (auto& c : x) {
        double r = std::round(c);
        if (std::abs(c - r) < 1e-12) c = r;
        c -= std::floor(c);
    }
    return fam.periods() * x.cast<cplx>();
}

}  // namespace semiflat
