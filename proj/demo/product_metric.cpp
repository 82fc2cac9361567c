// Semi-flat metric on the II* x III* product fibration: one metric sample,
// the chart at infinity and the fitted decay towards the flat model.
#include <cstdio>

#include <semiflat/semiflat.hpp>

using namespace semiflat;

int main() {
    const auto fm = fiber_product(parse_fiber("II*"), parse_fiber("III*"));
    const double eps = 0.5;
    const VolumeForm vf{cplx(1, 0), {}};

    SplitMix64 rng(7);
    auto [point, v] = draw_sample(fm, eps, rng);
    const auto ms = metric_at<double>(fm, eps, vf, point, v);
    std::printf("%s: cover degree %d, z = %.4f%+.4fi\n", fm.name.c_str(), fm.cover_degree, point.z().real(),
                point.z().imag());
    std::printf("  min eigenvalue %.6g, Monge-Ampere residual %.2e\n", min_eigenvalue(ms.h), ma_residual(ms));
    std::printf("  canonical coefficient %ld/%ld\n", canonical_coefficient(fm).numerator(),
                canonical_coefficient(fm).denominator());

    const auto ch = to_chart(fm, eps, vf);
    std::printf("  %s end, sector angle %ld/%ld pi, alpha0 = %.6f\n", to_string(ch.kind).c_str(),
                ch.angle_over_pi().numerator(), ch.angle_over_pi().denominator(), ch.alpha0);
    std::printf("  limit metric diag(%.6f, %.6f, %.6f)\n", ch.limit_metric(0, 0), ch.limit_metric(1, 1),
                ch.limit_metric(2, 2));

    const auto fit = error_decay_fit(fm, eps, vf, {}, threads_from_env(1));
    std::printf("  |h - limit| ~ |alpha|^%.4f over [%g, %g] (fit residual %.1e)\n", fit.slope, fit.window_lo,
                fit.window_hi, fit.residual);
    for (std::size_t i = 0; i < fit.radii.size(); i += 5)
        std::printf("    |alpha| = %-10.4g deviation %.6e\n", fit.radii[i], fit.values[i]);
}
