#include <catch_amalgamated.hpp>

#include <semiflat/lattice.hpp>
#include <semiflat/rng.hpp>

using namespace semiflat;
using Catch::Matchers::WithinAbs;

namespace {

const cplx I(0, 1);

RMatrixd J1() { return standard_symplectic(1); }

RMatrixd block_J() {
    RMatrixd q = RMatrixd::Zero(4, 4);
    q(0, 1) = 1;
    q(1, 0) = -1;
    q(2, 3) = 1;
    q(3, 2) = -1;
    return q;
}

// T = R (I, Z) with Z in the Siegel half space, polarization the standard J.
PolarizedFamily random_family(SplitMix64& rng) {
    Eigen::Matrix2d l;
    l << rng.uniform(0.5, 1.5), 0, rng.uniform(-0.5, 0.5), rng.uniform(0.5, 1.5);
    Eigen::Matrix2d y = l * l.transpose() + 0.2 * Eigen::Matrix2d::Identity();
    Eigen::Matrix2d x;
    double off = rng.uniform(-1, 1);
    x << rng.uniform(-1, 1), off, off, rng.uniform(-1, 1);
    CMatrixd z = x.cast<cplx>() + I * y.cast<cplx>();
    CMatrixd r(2, 2);
    r << cplx(rng.uniform(1, 2), rng.uniform(-1, 1)), cplx(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)),
        cplx(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)), cplx(rng.uniform(1, 2), rng.uniform(-1, 1));
    CMatrixd t(2, 4);
    t << r, r * z;
    return {t, standard_symplectic(2)};
}

// Product of elementary integer symplectic matrices.
RMatrixd random_symplectic(SplitMix64& rng) {
    auto pick = [&] { return double(long(rng.uniform() * 5) - 2); };
    RMatrixd a = RMatrixd::Identity(4, 4);
    for (int step = 0; step < 4; ++step) {
        RMatrixd e = RMatrixd::Identity(4, 4);
        Eigen::Matrix2d s;
        double off = pick();
        s << pick(), off, off, pick();
        switch (step % 3) {
            case 0: e.topRightCorner(2, 2) = s; break;
            case 1: e.bottomLeftCorner(2, 2) = s; break;
            default: {
                Eigen::Matrix2d u;
                u << 1, pick(), 0, 1;
                e.topLeftCorner(2, 2) = u;
                e.bottomRightCorner(2, 2) = u.inverse().transpose();
            }
        }
        a = a * e;
    }
    return a;
}

}  // namespace

TEST_CASE("unit square lattice is already normalized", "[lattice]") {
    CMatrixd t(1, 2);
    t << 1, I;
    PolarizedFamily fam(t, J1());
    auto sd = siegel_normalize(fam);
    CHECK(max_abs(sd.basis_change - RMatrixd::Identity(2, 2)) == 0.0);
    CHECK(std::abs(sd.scale(0, 0) - 1.0) < 1e-15);
    CHECK(std::abs(sd.moduli(0, 0) - I) < 1e-15);
    auto h = hermitian_form(fam);
    CHECK_THAT(h.matrix(0, 0).real(), WithinAbs(0.5, 1e-15));
    CHECK_THAT(inverse_hermitian_direct(fam)(0, 0).real(), WithinAbs(2.0, 1e-15));
}

TEST_CASE("product family normalizes by a column permutation", "[lattice]") {
    const cplx t1(0.7, 0.2), t2(-0.3, 1.1), t3(1.2, -0.4), t4(0.5, 0.9);
    CMatrixd t = CMatrixd::Zero(2, 4);
    t(0, 0) = t1;
    t(0, 1) = t2;
    t(1, 2) = t3;
    t(1, 3) = t4;
    PolarizedFamily fam(t, block_J());
    auto sd = siegel_normalize(fam);
    RMatrixd perm = RMatrixd::Zero(4, 4);
    perm(0, 0) = perm(2, 1) = perm(1, 2) = perm(3, 3) = 1;
    CHECK(max_abs(sd.basis_change - perm) == 0.0);
    CHECK(std::abs(sd.scale(0, 0) - t1) < 1e-15);
    CHECK(std::abs(sd.scale(1, 1) - t3) < 1e-15);
    CHECK(std::abs(sd.moduli(0, 0) - t2 / t1) < 1e-14);
    CHECK(std::abs(sd.moduli(1, 1) - t4 / t3) < 1e-14);
    CHECK(std::abs(sd.moduli(0, 1)) < 1e-15);

    CMatrixd hinv = inverse_hermitian_direct(fam);
    CHECK_THAT(hinv(0, 0).real(), WithinAbs(2 * im_pairing(t1, t2), 1e-14));
    CHECK_THAT(hinv(1, 1).real(), WithinAbs(2 * im_pairing(t3, t4), 1e-14));
    CHECK(std::abs(hinv(0, 1)) < 1e-15);
    CHECK(max_abs(inverse_hermitian_siegel(sd) - hinv) < 1e-12);

    // Block inverse of (T; conj T), written out entry by entry.
    const cplx d1 = -2.0 * I * im_pairing(t1, t2), d2 = -2.0 * I * im_pairing(t3, t4);
    CMatrixd expect = CMatrixd::Zero(4, 4);
    expect(0, 0) = std::conj(t2) / d1;
    expect(0, 2) = -t2 / d1;
    expect(1, 0) = -std::conj(t1) / d1;
    expect(1, 2) = t1 / d1;
    expect(2, 1) = std::conj(t4) / d2;
    expect(2, 3) = -t4 / d2;
    expect(3, 1) = -std::conj(t3) / d2;
    expect(3, 3) = t3 / d2;
    CHECK(max_abs(fam.stacked_inverse() - expect) < 1e-10);
}

TEST_CASE("random families normalize into the Siegel half space", "[lattice]") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        SplitMix64 rng(seed);
        for (int n = 0; n < 10; ++n) {
            auto fam = random_family(rng);
            auto sd = siegel_normalize(fam);
            const RMatrixd sqs = sd.basis_change.transpose() * fam.polarization() * sd.basis_change;
            CHECK(max_abs(sqs - standard_symplectic(2)) < 1e-12);
            CMatrixd recon(2, 4);
            recon << sd.scale, sd.scale * sd.moduli;
            CHECK(max_abs(fam.periods() * sd.basis_change.cast<cplx>() - recon) < 1e-12);
            CHECK(min_eigenvalue_symmetric(sd.moduli.imag()) > 0);
            CHECK(max_abs(inverse_hermitian_siegel(sd) - inverse_hermitian_direct(fam)) < 1e-12);
        }
    }
}

TEST_CASE("H is invariant under symplectic change of lattice basis", "[lattice]") {
    for (std::uint64_t seed : {11u, 12u, 13u}) {
        SplitMix64 rng(seed);
        for (int n = 0; n < 10; ++n) {
            auto fam = random_family(rng);
            RMatrixd a = random_symplectic(rng);
            REQUIRE(max_abs(a.transpose() * fam.polarization() * a - fam.polarization()) == 0.0);
            PolarizedFamily moved(fam.periods() * a.cast<cplx>(), fam.polarization());
            CHECK(max_abs(hermitian_form(fam).matrix - hermitian_form(moved).matrix) < 1e-10);
        }
    }
}

TEST_CASE("holomorphic fiber coordinates give a (1,1) form", "[lattice]") {
    SplitMix64 rng(21);
    for (int n = 0; n < 10; ++n) {
        auto fam = random_family(rng);
        CMatrixd inv = fam.stacked_inverse();
        CMatrixd pi_block = inv.leftCols(2);
        CHECK(max_abs(pi_block.transpose() * fam.polarization().cast<cplx>() * pi_block) < 1e-12);
        CHECK(max_abs(inv.rightCols(2) - pi_block.conjugate()) < 1e-12);
    }
}

TEST_CASE("scaled H", "[lattice]") {
    HermitianForm h{CMatrixd::Constant(1, 1, 0.5)};
    CHECK_THAT(scaled_hermitian(h, J1(), 2.0, 1).matrix(0, 0).real(), WithinAbs(1.0, 1e-15));
    RMatrixd q = 3.0 * J1();
    CHECK_THAT(scaled_hermitian(h, q, 3.0, 1).matrix(0, 0).real(), WithinAbs(0.5, 1e-15));

    // Hexagonal factors (s, zeta3 s) and (s^4, zeta3 s^4) over z = s^6, each
    // carrying half the fiber area.
    const cplx w = root_of_unity(3, 1);
    const double eps = 0.8;
    const cplx s = std::polar(0.7, 0.3);
    const double az = std::pow(std::abs(s), 6);
    for (int power : {1, 4}) {
        CMatrixd t(1, 2);
        t << ipow(s, power), w * ipow(s, power);
        auto hs = scaled_hermitian(hermitian_form(PolarizedFamily(t, J1())), J1(), eps / 2, 1);
        const double expect = eps / (2 * std::sqrt(3.0)) * std::pow(az, -power / 3.0);
        CHECK_THAT(hs.matrix(0, 0).real(), WithinAbs(expect, 1e-13 * expect));
    }
}

TEST_CASE("reduction modulo the lattice", "[lattice]") {
    const cplx t1(1.0, 0.1), t2(0.3, 1.2);
    CMatrixd t(1, 2);
    t << t1, t2;
    PolarizedFamily fam(t, J1());
    auto red = [&](cplx v) { return reduce_mod_lattice(CVectord::Constant(1, v), fam)(0); };
    CHECK(std::abs(red(t1)) < 1e-14);
    CHECK(std::abs(red(0.5 * t1 + 0.5 * t2) - (0.5 * t1 + 0.5 * t2)) < 1e-14);
    CHECK(std::abs(red(1.25 * t1 - 0.75 * t2) - (0.25 * t1 + 0.25 * t2)) < 1e-14);
}

TEST_CASE("invalid families are rejected", "[lattice]") {
    CMatrixd t(1, 2);
    t << 1, I;
    CHECK_THROWS_AS(PolarizedFamily(t, RMatrixd::Zero(2, 2)), SingularPolarization);
    RMatrixd sym(2, 2);
    sym << 0, 1, 1, 0;
    CHECK_THROWS_AS(PolarizedFamily(t, sym), SingularPolarization);
    CMatrixd flat(1, 2);
    flat << 1, 2;
    CHECK_THROWS_AS(PolarizedFamily(flat, J1()), DegenerateLattice);
    CMatrixd wrong(1, 2);
    wrong << 1, -I;
    CHECK_THROWS_AS(siegel_normalize(PolarizedFamily(wrong, J1())), NotPositive);
    CHECK_THROWS_AS(hermitian_form(PolarizedFamily(wrong, J1())), NotPositive);
}

TEST_CASE("positivity of Hermitian matrices", "[lattice]") {
    CHECK_THAT(min_eigenvalue(CMatrixd::Identity(3, 3)), WithinAbs(1.0, 1e-15));
    CMatrixd d = CMatrixd::Zero(3, 3);
    d(0, 0) = 2;
    d(1, 1) = 1;
    d(2, 2) = 1e-9;
    CHECK_THAT(min_eigenvalue(d), WithinAbs(1e-9, 1e-20));
}
