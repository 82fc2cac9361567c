#include <catch_amalgamated.hpp>

#include <semiflat/gluing.hpp>

using namespace semiflat;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Least-squares slope of log y against log x.
double log_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = double(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

CVectord sample_point() {
    CVectord z(3);
    z << cplx(0.3, -0.2), cplx(0.5, 0.1), cplx(-0.4, 0.35);
    return z;
}

}  // namespace

TEST_CASE("potential limits", "[gluing]") {
    for (double u : {0.3, 1.0, 2.5}) CHECK(std::abs(eh_potential(1e-6, u) - u) < 1e-5);
    CHECK(eh_potential(0.0, 0.7) == 0.7);
    // Far field: (a^3 + u^3)^{1/3} contributes a^3/(3u^2), the logs -a^3/(2u^2).
    std::vector<double> us, gaps;
    for (double u = 10; u <= 1e3; u *= 1.5) {
        us.push_back(u);
        gaps.push_back(std::abs(eh_potential(0.5, u) - u));
    }
    CHECK_THAT(log_slope(us, gaps), WithinAbs(-2.0, 0.1));
    CHECK_THAT(eh_potential(0.5, 100.0) - 100.0, WithinRel(-0.125 / (6 * 1e4), 1e-3));
    CHECK_THROWS_AS(eh_potential(0.5, 0.0), OriginSingular);
}

TEST_CASE("closed-form metric against the potential", "[gluing]") {
    const double a = 0.7;
    std::function<double(const CVectord&)> phi = [&](const CVectord& z) { return eh_potential(a, z.squaredNorm()); };
    SplitMix64 rng(4);
    for (int n = 0; n < 20; ++n) {
        const CVectord z = shell_point(rng, 0.5, 2.0);
        const CMatrixd g = eh_metric(a, z);
        CHECK(max_abs(complex_hessian(phi, z, FDScheme{3e-3, 2, true}) - g) < 1e-8);
        CHECK_THAT(g.determinant().real(), WithinAbs(1.0, 1e-12));
        CHECK(min_eigenvalue(g) > 0);
    }
    CHECK(max_abs(eh_metric(0.0, sample_point()) - CMatrixd::Identity(3, 3)) == 0.0);
    CHECK_THROWS_AS(eh_metric(a, CVectord::Zero(3)), OriginSingular);
}

TEST_CASE("Z3 invariance", "[gluing]") {
    const cplx w = root_of_unity(3, 1);
    const CVectord z = sample_point();
    const CMatrixd g = eh_metric(0.4, z);
    const CMatrixd moved = eh_metric(0.4, (w * z).eval());
    // Pulling back by the diagonal action multiplies by w conj(w) = 1.
    CHECK(max_abs(moved - w * g * std::conj(w)) < 1e-12);
}

TEST_CASE("Ricci flat inside, curved and decaying", "[gluing]") {
    const double a = 0.6;
    MetricField<double> f = [&](const CVectord& z) { return eh_metric(a, z); };
    const CVectord dir = sample_point() / sample_point().norm();
    std::vector<double> norms;
    for (double r : {0.6, 0.9, 1.3}) {
        const CVectord z = r * dir;
        CHECK(ricci_norm(f, z, FDScheme{1e-3, 2, true}) < 1e-6);
        norms.push_back(chern_curvature_norm(f, z, FDScheme{1e-3, 2, true}));
    }
    CHECK(norms[0] > 1e-3);
    CHECK(norms[0] > norms[1]);
    CHECK(norms[1] > norms[2]);
}

TEST_CASE("smooth cutoff", "[gluing]") {
    CHECK(cutoff(0.5, 1.0).value == 1.0);
    CHECK(cutoff(2.5, 1.0).value == 0.0);
    CHECK_THAT(cutoff(1.5, 1.0).value, WithinAbs(0.5, 1e-15));
    // Derivatives against central differences.
    for (double u : {1.2, 1.5, 1.9}) {
        const double h = 1e-5;
        const double d1 = (cutoff(u + h, 1.0).value - cutoff(u - h, 1.0).value) / (2 * h);
        const double d2 = (cutoff(u + h, 1.0).first - cutoff(u - h, 1.0).first) / (2 * h);
        CHECK_THAT(cutoff(u, 1.0).first, WithinAbs(d1, 1e-8));
        CHECK_THAT(cutoff(u, 1.0).second, WithinAbs(d2, 1e-6));
    }
    // Flat to high order at the ends.
    CHECK(std::abs(cutoff(1.01, 1.0).first) < 1e-30);
    CHECK(std::abs(cutoff(1.99, 1.0).second) < 1e-30);
}

TEST_CASE("glued potential", "[gluing]") {
    EHConfig cfg{0.05, 1.0};
    CVectord inner = sample_point() * (0.8 / sample_point().norm());
    CVectord outer = sample_point() * (1.6 / sample_point().norm());
    CHECK(glued_potential(cfg, inner) == eh_potential(cfg.a, inner.squaredNorm()));
    CHECK(glued_potential(cfg, outer) == outer.squaredNorm());
    CHECK(max_abs(glued_metric(cfg, outer) - CMatrixd::Identity(3, 3)) == 0.0);
    CHECK(max_abs(glued_metric(cfg, inner) - eh_metric(cfg.a, inner)) < 1e-15);
}

TEST_CASE("gluing report", "[gluing]") {
    auto rep = gluing_report(EHConfig{0.05, 1.0}, 100, 1);
    CHECK(rep.min_eigenvalue > 0);
    CHECK(rep.det_residual < 1e-10);
    CHECK(rep.hessian_mismatch < 1e-8);
    CHECK(rep.a_max > 0.05);
    CHECK_FALSE(rep.a_max_capped);
    CHECK(transition_min_eigenvalue(EHConfig{rep.a_max * 0.999, 1.0}) > 0);
    CHECK(transition_min_eigenvalue(EHConfig{rep.a_max * 1.01, 1.0}) < 0);
    // Narrower shells tolerate less.
    CHECK(max_positive_scale(0.25) < max_positive_scale(1.0));

    // Deviation from the flat metric on the shell grows like a^3.
    std::vector<double> as{0.02, 0.04, 0.08}, devs;
    for (double a : as) devs.push_back(gluing_report(EHConfig{a, 1.0}, 100, 1).max_deviation);
    CHECK_THAT(log_slope(as, devs), WithinAbs(3.0, 0.02));
    CHECK_THROWS_AS(gluing_report(EHConfig{0.0, 1.0}, 10, 1), ConfigError);
    CHECK_THROWS_AS(gluing_report(EHConfig{0.1, 1.5}, 10, 1), ConfigError);
}
