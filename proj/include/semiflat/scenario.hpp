#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>

#include <json.hpp>

#include "asymptotics.hpp"
#include "gluing.hpp"
#include "weierstrass.hpp"

namespace semiflat {

using json = nlohmann::json;

// Where an expected value comes from: a published constant, an independent
// derivation, or a value that holds by construction.
enum class Provenance { Published, Derived, Trivial };

inline std::string to_string(Provenance p) {
    switch (p) {
        case Provenance::Published: return "published";
        case Provenance::Derived: return "derived";
        case Provenance::Trivial: return "trivial";
    }
    return "?";
}

// Near: |measured - expected| <= tol. AtMost: measured <= expected + tol.
// AtLeast: measured >= expected - tol, strictly when tol is zero.
enum class Relation { Near, AtMost, AtLeast };

inline std::string to_string(Relation r) {
    switch (r) {
        case Relation::Near: return "near";
        case Relation::AtMost: return "at_most";
        case Relation::AtLeast: return "at_least";
    }
    return "?";
}

struct Expectation {
    std::string quantity;
    double measured = 0;
    double expected = 0;
    double tolerance = 0;
    Relation relation = Relation::Near;
    Provenance provenance = Provenance::Trivial;

    bool holds(double scale = 1) const {
        const double tol = tolerance * scale;
        if (!std::isfinite(measured)) return false;
        switch (relation) {
            case Relation::Near: return std::abs(measured - expected) <= tol;
            case Relation::AtMost: return measured <= expected + tol;
            case Relation::AtLeast: return tol == 0 ? measured > expected : measured >= expected - tol;
        }
        return false;
    }
};

struct SeriesRow {
    double radius;
    std::string observable;
    double value;
};

struct CheckOutcome {
    std::string name;
    std::vector<Expectation> expectations;
    json details = json::object();
    std::vector<SeriesRow> series;
    std::string error;  // set when the check threw
    double seconds = 0;

    bool passed(double scale = 1) const {
        if (!error.empty() || expectations.empty()) return false;
        return std::all_of(expectations.begin(), expectations.end(), [&](const auto& e) { return e.holds(scale); });
    }
};

// ---- scenario files ----

inline const std::vector<std::string>& known_checks() {
    static const std::vector<std::string> names{
        "canonical", "christoffel", "classify",   "closed",        "cone",  "curvature_decay", "deck",
        "error_decay", "fiber_volume", "flatness", "gluing", "ma", "positivity", "ricci", "sob",
        "volume_growth", "weierstrass"};
    return names;
}

struct Scenario {
    std::string name;
    std::string model = "pair";  // pair | elliptic | isotrivial | none
    std::string left, right;
    int left_multiplicity = 0, right_multiplicity = 0;
    int isotrivial_order = 6;
    double epsilon = 1;
    double k0 = 1, k0_imag = 0;
    Normalization normalization = Normalization::Theorem;
    std::vector<std::string> checks;
    int samples = 100;
    std::uint64_t seed = 1;
    std::optional<double> radius_min, radius_max;
    std::optional<int> radius_count;
    FDScheme fd{1e-3, 2, true};
    std::string report_file, csv_file;
    double eh_a = 0.05, eh_delta = 1.0;

    VolumeForm volume_form() const { return VolumeForm{cplx(k0, k0_imag), {}}; }

    bool has_fibration() const { return model == "pair" || model == "elliptic" || (model == "isotrivial" && isotrivial_order == 6); }

    FibrationModel fibration() const {
        if (model == "pair")
            return fiber_product(parse_fiber(left, left_multiplicity), parse_fiber(right, right_multiplicity));
        if (model == "elliptic") return elliptic_model(parse_fiber(left, left_multiplicity));
        if (model == "isotrivial" && isotrivial_order == 6) return isotrivial_hexagonal();
        throw ConfigError("scenario '" + name + "' has no metric model");
    }
};

namespace detail {

template <class T>
T read_key(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("key '") + key + "' has the wrong type");
    }
}

inline bool needs_fibration(const std::string& check) { return check != "gluing" && check != "weierstrass"; }

}  // namespace detail

inline Scenario parse_scenario(const json& j, std::string name) {
    if (!j.is_object()) throw ConfigError("scenario must be a JSON object");
    static const std::set<std::string> keys{
        "name",        "model",        "left",          "right",      "left_multiplicity", "right_multiplicity",
        "isotrivial_order", "epsilon", "k0",            "k0_imag",    "normalization",     "checks",
        "samples",     "seed",         "radius_min",    "radius_max", "radius_count",      "fd_step",
        "fd_order",    "richardson",   "report_file",   "csv_file",   "eh_a",              "eh_delta"};
    for (const auto& [key, value] : j.items())
        if (!keys.count(key)) throw ConfigError("unknown key '" + key + "'");
    Scenario s;
    s.name = detail::read_key<std::string>(j, "name", std::move(name));
    s.model = detail::read_key<std::string>(j, "model", s.model);
    s.left = detail::read_key<std::string>(j, "left", "");
    s.right = detail::read_key<std::string>(j, "right", "");
    s.left_multiplicity = detail::read_key<int>(j, "left_multiplicity", 0);
    s.right_multiplicity = detail::read_key<int>(j, "right_multiplicity", 0);
    s.isotrivial_order = detail::read_key<int>(j, "isotrivial_order", 6);
    s.epsilon = detail::read_key<double>(j, "epsilon", 1.0);
    s.k0 = detail::read_key<double>(j, "k0", 1.0);
    s.k0_imag = detail::read_key<double>(j, "k0_imag", 0.0);
    const auto norm = detail::read_key<std::string>(j, "normalization", "theorem");
    if (norm == "theorem") s.normalization = Normalization::Theorem;
    else if (norm == "elliptic_half") s.normalization = Normalization::EllipticHalf;
    else throw ConfigError("normalization must be 'theorem' or 'elliptic_half'");
    s.checks = detail::read_key<std::vector<std::string>>(j, "checks", {});
    s.samples = detail::read_key<int>(j, "samples", 100);
    s.seed = detail::read_key<std::uint64_t>(j, "seed", 1);
    if (j.contains("radius_min")) s.radius_min = detail::read_key<double>(j, "radius_min", 0);
    if (j.contains("radius_max")) s.radius_max = detail::read_key<double>(j, "radius_max", 0);
    if (j.contains("radius_count")) s.radius_count = detail::read_key<int>(j, "radius_count", 0);
    s.fd.step = detail::read_key<double>(j, "fd_step", s.fd.step);
    s.fd.order = detail::read_key<int>(j, "fd_order", s.fd.order);
    s.fd.richardson = detail::read_key<bool>(j, "richardson", s.fd.richardson);
    s.report_file = detail::read_key<std::string>(j, "report_file", "");
    s.csv_file = detail::read_key<std::string>(j, "csv_file", "");
    s.eh_a = detail::read_key<double>(j, "eh_a", s.eh_a);
    s.eh_delta = detail::read_key<double>(j, "eh_delta", s.eh_delta);

    if (s.checks.empty()) throw ConfigError("check list is empty");
    std::set<std::string> seen;
    for (const auto& c : s.checks) {
        if (std::find(known_checks().begin(), known_checks().end(), c) == known_checks().end())
            throw ConfigError("unknown check '" + c + "'");
        if (!seen.insert(c).second) throw ConfigError("check '" + c + "' listed twice");
    }
    static const std::set<std::string> models{"pair", "elliptic", "isotrivial", "none"};
    if (!models.count(s.model)) throw ConfigError("model must be pair, elliptic, isotrivial or none");
    if (!(s.epsilon > 0)) throw ConfigError("epsilon must be positive");
    if (s.samples < 1) throw ConfigError("samples must be positive");
    if (s.radius_min.has_value() != s.radius_max.has_value())
        throw ConfigError("radius_min and radius_max go together");
    if (s.radius_count && *s.radius_count < 2) throw ConfigError("radius_count must be at least 2");
    try {
        s.fd.validate();
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    const bool canonical_only = s.model == "isotrivial" && s.isotrivial_order != 6;
    for (const auto& c : s.checks) {
        if (!detail::needs_fibration(c)) continue;
        if (s.model == "none") throw ConfigError("check '" + c + "' needs a fibration model");
        if (canonical_only && c != "canonical")
            throw ConfigError("isotrivial order " + std::to_string(s.isotrivial_order) + " supports only 'canonical'");
    }
    if (std::count(s.checks.begin(), s.checks.end(), "gluing")) EHConfig{s.eh_a, s.eh_delta}.validate();
    if (s.has_fibration()) {
        try {
            s.fibration();
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
    } else if (s.model == "isotrivial") {
        try {
            isotrivial_coefficient(s.isotrivial_order);
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
    }
    return s;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read scenario " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return parse_scenario(j, path.stem().string());
}

// ---- checks ----

struct RunOptions {
    double tolerance_scale = 1;
    int threads = 1;
};

namespace detail {

inline std::string rational_text(Rational r) { return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator()); }

inline double to_double(Rational r) { return double(r.numerator()) / double(r.denominator()); }

struct CheckContext {
    const Scenario& sc;
    RunOptions opt;
    std::optional<FibrationModel> fm;
    VolumeForm vf;
};

// Per-sample streams, so the draws do not depend on how work is split.
inline std::vector<std::pair<CoverPoint<double>, CVectord>> samples(const CheckContext& cx, int count) {
    SplitMix64 root(cx.sc.seed);
    std::vector<std::pair<CoverPoint<double>, CVectord>> out;
    for (int i = 0; i < count; ++i) {
        auto rng = root.fork(std::uint64_t(i));
        out.push_back(draw_sample(*cx.fm, cx.sc.epsilon, rng));
    }
    return out;
}

inline void check_ma(const CheckContext& cx, CheckOutcome& out) {
    auto pts = samples(cx, cx.sc.samples);
    auto res = parallel_map(pts.size(), cx.opt.threads, [&](std::size_t i) {
        return ma_residual(metric_at<double>(*cx.fm, cx.sc.epsilon, cx.vf, pts[i].first, pts[i].second),
                           cx.sc.normalization);
    });
    out.expectations.push_back({"max_residual", *std::max_element(res.begin(), res.end()), 0, 1e-10, Relation::AtMost,
                                Provenance::Published});
    out.details["samples"] = pts.size();
}

inline void check_positivity(const CheckContext& cx, CheckOutcome& out) {
    auto pts = samples(cx, cx.sc.samples);
    auto eig = parallel_map(pts.size(), cx.opt.threads, [&](std::size_t i) {
        return min_eigenvalue(metric_at<double>(*cx.fm, cx.sc.epsilon, cx.vf, pts[i].first, pts[i].second).h);
    });
    out.expectations.push_back({"min_eigenvalue", *std::min_element(eig.begin(), eig.end()), 0, 0, Relation::AtLeast,
                                Provenance::Trivial});
}

// Difference quotients at three points; the order comes from three steps.
inline void check_closed(const CheckContext& cx, CheckOutcome& out) {
    SplitMix64 root(cx.sc.seed);
    const int count = std::min(cx.sc.samples, 3);
    const FDScheme scheme{cx.sc.fd.step, cx.sc.fd.order, false};
    auto rows = parallel_map(std::size_t(count), cx.opt.threads, [&](std::size_t i) {
        auto rng = root.fork(i);
        auto [p, v] = draw_sample(*cx.fm, cx.sc.epsilon, rng, {0.2, 0.4});
        auto field = semiflat_field<double>(*cx.fm, cx.sc.epsilon, cx.vf, p);
        auto x = field_point<double>(p, v);
        std::vector<double> scales(std::size_t(x.size()), 1.0);
        scales[0] = std::abs(x(0));
        return closedness_residual(field, x, scheme, scales);
    });
    double worst = 0, order = 1e300;
    bool noise_floor = true;
    for (const auto& r : rows) {
        worst = std::max(worst, r.residual);
        if (!std::isnan(r.order)) {
            order = std::min(order, r.order);
            noise_floor = false;
        }
    }
    out.expectations.push_back({"max_residual", worst, 0, 1e-5, Relation::AtMost, Provenance::Published});
    if (!noise_floor)
        out.expectations.push_back(
            {"min_order", order, double(cx.sc.fd.order), 0.1, Relation::AtLeast, Provenance::Derived});
    out.details["points"] = count;
    out.details["at_noise_floor"] = noise_floor;
}

inline void check_christoffel(const CheckContext& cx, CheckOutcome& out) {
    auto pts = samples(cx, cx.sc.samples);
    auto dev = parallel_map(pts.size(), cx.opt.threads, [&](std::size_t i) {
        const auto& [p, v] = pts[i];
        auto pd = period_data(*cx.fm, cx.sc.epsilon, p);
        auto closed = christoffel_closed(*cx.fm, cx.sc.epsilon, p, v);
        auto general = christoffel_general(pd.periods, pd.derivative, v);
        return max_abs(closed - general) / (1 + max_abs(closed));
    });
    out.expectations.push_back({"max_relative_gap", *std::max_element(dev.begin(), dev.end()), 0, 1e-12,
                                Relation::AtMost, Provenance::Derived});
}

inline void check_deck(const CheckContext& cx, CheckOutcome& out) {
    SplitMix64 rng(cx.sc.seed);
    double worst = 0;
    int tested = 0;
    for (const auto& f : cx.fm->factors) {
        const auto* t = std::get_if<FiberType>(&f.shape);
        if (!t) continue;
        const int d = cover_degree(*t);
        for (int n = 0; n < std::max(8, cx.sc.samples / 10); ++n) {
            worst = std::max(worst, deck_defect(*t, rng.polar(0.05, 0.9, 0.01, 2 * pi / d - 0.01)));
            ++tested;
        }
    }
    if (tested == 0) throw Unsupported("deck check needs a Kodaira factor");
    out.expectations.push_back({"max_defect", worst, 0, 1e-12, Relation::AtMost, Provenance::Published});
    out.details["points"] = tested;
}

inline void check_fiber_volume(const CheckContext& cx, CheckOutcome& out) {
    auto pts = samples(cx, std::min(cx.sc.samples, 20));
    double worst = 0;
    for (const auto& [p, v] : pts) {
        auto ms = metric_at<double>(*cx.fm, cx.sc.epsilon, cx.vf, p, v);
        for (int i = 0; i < cx.fm->fiber_dim(); ++i) {
            const double target = cx.sc.epsilon * cx.fm->factors[std::size_t(i)].area_scale;
            worst = std::max(worst, std::abs(fiber_area(ms, *cx.fm, cx.sc.epsilon, i) / target - 1));
        }
    }
    out.expectations.push_back({"max_relative_error", worst, 0, 1e-8, Relation::AtMost, Provenance::Published});
}

inline void check_ricci(const CheckContext& cx, CheckOutcome& out) {
    SplitMix64 root(cx.sc.seed);
    const int count = std::min(cx.sc.samples, 3);
    auto norms = parallel_map(std::size_t(count), cx.opt.threads, [&](std::size_t i) {
        auto rng = root.fork(i);
        auto [p, v] = draw_sample(*cx.fm, cx.sc.epsilon, rng, {0.2, 0.4});
        auto x = field_point<double>(p, v);
        std::vector<double> scales(std::size_t(x.size()), 1.0);
        scales[0] = std::abs(x(0));
        return ricci_norm(semiflat_field<double>(*cx.fm, cx.sc.epsilon, cx.vf, p), x, cx.sc.fd, scales);
    });
    out.expectations.push_back(
        {"max_norm", *std::max_element(norms.begin(), norms.end()), 0, 1e-6, Relation::AtMost, Provenance::Published});
}

inline void check_canonical(const CheckContext& cx, CheckOutcome& out) {
    const auto& sc = cx.sc;
    if (sc.model == "isotrivial") {
        const Rational c = isotrivial_coefficient(sc.isotrivial_order);
        out.expectations.push_back({"coefficient", to_double(c), -2.0 / sc.isotrivial_order, 0, Relation::Near,
                                    Provenance::Published});
        if (cx.fm) {
            const Rational pc = canonical_coefficient(*cx.fm);
            out.expectations.push_back({"power_count", to_double(pc), to_double(c), 0, Relation::Near,
                                        Provenance::Derived});
        }
        out.details["coefficient"] = rational_text(c);
        return;
    }
    if (sc.model != "pair") throw ConfigError("canonical coefficients are defined for product models");
    const auto& fm = *cx.fm;
    const Rational c = canonical_coefficient(fm);
    out.details["coefficient"] = rational_text(c);
    const auto& l = std::get<FiberType>(fm.factors[0].shape);
    const auto& r = std::get<FiberType>(fm.factors[1].shape);
    const bool ls = l.kind == FiberKind::Istar, rs = r.kind == FiberKind::Istar;
    if (ls || rs) {
        const FiberKind other = ls ? r.kind : l.kind;
        const Rational table = (ls && rs) || other != FiberKind::IVstar ? Rational(-1, 2) : Rational(-1, 3);
        out.expectations.push_back({"coefficient", to_double(c), to_double(table), 0, Relation::Near,
                                    Provenance::Published});
        return;
    }
    const int k = fm.cover_degree;
    const Rational cross(k - fm.deck_exponents[0] - fm.deck_exponents[1] - 1, k);
    out.expectations.push_back({"coefficient", to_double(c), to_double(cross), 0, Relation::Near, Provenance::Derived});
}

inline void check_classify(const CheckContext& cx, CheckOutcome& out) {
    const auto& fm = *cx.fm;
    const auto cls = classify_asymptotics(fm);
    out.details["kind"] = to_string(cls.kind);
    out.details["angle_over_pi"] = rational_text(cls.angle_over_pi);
    out.details["volume_exponent"] = rational_text(cls.volume_exponent);
    // Independent recount from cover degree and coordinate powers.
    const int excess = fm.cover_degree - fm.coordinate_powers[0] - fm.coordinate_powers[1];
    if (cls.kind == AsymptoticKind::ALG || cls.kind == AsymptoticKind::ALH) {
        const Rational angle = excess > 0 ? Rational(2 * excess, fm.cover_degree) : Rational(0);
        out.expectations.push_back({"angle_over_pi", to_double(cls.angle_over_pi), to_double(angle), 0,
                                    Relation::Near, Provenance::Published});
        out.expectations.push_back({"volume_exponent", to_double(cls.volume_exponent), excess > 0 ? 2.0 : 1.0, 0,
                                    Relation::Near, Provenance::Published});
    } else {
        const double expected = cls.kind == AsymptoticKind::RayLike ? 1.5 : 2.0;
        out.expectations.push_back({"volume_exponent", to_double(cls.volume_exponent), expected, 0, Relation::Near,
                                    Provenance::Published});
    }
}

inline std::vector<double> scenario_radii(const Scenario& sc, std::vector<double> fallback, bool geometric) {
    if (!sc.radius_min) return fallback;
    const int n = sc.radius_count.value_or(int(fallback.size()));
    return geometric ? geometric_radii(*sc.radius_min, *sc.radius_max, n) : linear_radii(*sc.radius_min, *sc.radius_max, n);
}

inline bool is_pair(const FibrationModel& fm, FiberKind a, FiberKind b) {
    if (fm.fiber_dim() != 2) return false;
    const auto* l = std::get_if<FiberType>(&fm.factors[0].shape);
    const auto* r = std::get_if<FiberType>(&fm.factors[1].shape);
    return l && r && ((l->kind == a && r->kind == b) || (l->kind == b && r->kind == a));
}

inline void add_series(CheckOutcome& out, const DecayFit& fit, const std::string& observable) {
    for (std::size_t i = 0; i < fit.radii.size(); ++i) out.series.push_back({fit.radii[i], observable, fit.values[i]});
}

inline void fit_details(CheckOutcome& out, const DecayFit& fit) {
    out.details["flat"] = fit.flat;
    out.details["window"] = {fit.window_lo, fit.window_hi};
    if (!fit.flat) {
        out.details["slope"] = fit.slope;
        out.details["residual"] = fit.residual;
        out.details["upper_half_slope"] = upper_half_slope(fit);
    }
}

inline void check_flatness(const CheckContext& cx, CheckOutcome& out) {
    const auto ch = to_chart(*cx.fm, cx.sc.epsilon, cx.vf);
    const auto radii = scenario_radii(cx.sc, ch.kind == AsymptoticKind::ALG ? geometric_radii(1e2, 1e4, 5)
                                                                            : linear_radii(5 / ch.rate, 25 / ch.rate, 5),
                                      ch.kind == AsymptoticKind::ALG);
    check_chart_radii(ch, radii);
    auto rows = parallel_map(radii.size(), cx.opt.threads, [&](std::size_t i) {
        return std::pair{chart_deviation(ch, *cx.fm, cx.sc.epsilon, cx.vf, radii[i]),
                         chart_curvature(ch, *cx.fm, cx.sc.epsilon, cx.vf, radii[i], {1e-3, 2, true})};
    });
    double dev = 0, curv = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        dev = std::max(dev, rows[i].first);
        curv = std::max(curv, rows[i].second);
        out.series.push_back({radii[i], "deviation", rows[i].first});
        out.series.push_back({radii[i], "curvature", rows[i].second});
    }
    out.expectations.push_back({"max_deviation", dev, 0, 1e-12, Relation::AtMost, Provenance::Published});
    out.expectations.push_back({"max_curvature", curv, 0, 1e-6, Relation::AtMost, Provenance::Published});
}

inline void check_error_decay(const CheckContext& cx, CheckOutcome& out) {
    const auto& fm = *cx.fm;
    const auto ch = to_chart(fm, cx.sc.epsilon, cx.vf);
    const bool alg = ch.kind == AsymptoticKind::ALG;
    const auto fit = error_decay_fit(fm, cx.sc.epsilon, cx.vf, scenario_radii(cx.sc, default_chart_radii(ch), alg),
                                     cx.opt.threads);
    fit_details(out, fit);
    add_series(out, fit, "deviation");
    if (fit.flat) {
        out.expectations.push_back({"max_deviation", *std::max_element(fit.values.begin(), fit.values.end()), 0,
                                    flat_threshold, Relation::AtMost, Provenance::Trivial});
        return;
    }
    if (alg) {
        if (is_pair(fm, FiberKind::IIstar, FiberKind::IIIstar))
            out.expectations.push_back({"exponent", fit.slope, -12.0 / 7, 0.05, Relation::Near, Provenance::Published});
        else
            out.expectations.push_back({"exponent", fit.slope, 0, 0, Relation::AtMost, Provenance::Trivial});
    } else {
        const double rate = -fit.slope;
        out.details["rate_over_predicted"] = rate / ch.rate;
        out.expectations.push_back({"rate", rate, ch.rate, 0.05 * ch.rate, Relation::Near,
                                    is_pair(fm, FiberKind::III, FiberKind::IIIstar) ? Provenance::Published
                                                                                    : Provenance::Derived});
    }
}

inline void check_curvature_decay(const CheckContext& cx, CheckOutcome& out) {
    const auto& fm = *cx.fm;
    const auto ch = to_chart(fm, cx.sc.epsilon, cx.vf);
    const bool alg = ch.kind == AsymptoticKind::ALG;
    const auto fit = curvature_decay_fit(fm, cx.sc.epsilon, cx.vf,
                                         scenario_radii(cx.sc, default_chart_radii(ch, true), alg), cx.opt.threads,
                                         {cx.sc.fd.step, cx.sc.fd.order, cx.sc.fd.richardson});
    fit_details(out, fit);
    add_series(out, fit, "curvature");
    if (fit.flat) {
        out.expectations.push_back({"max_curvature", *std::max_element(fit.values.begin(), fit.values.end()), 0, 1e-6,
                                    Relation::AtMost, Provenance::Trivial});
        return;
    }
    if (alg && is_pair(fm, FiberKind::IIstar, FiberKind::IIIstar)) {
        out.expectations.push_back({"exponent", fit.slope, -31.0 / 12, 0.1, Relation::Near, Provenance::Published});
        out.details["bound_holds"] = fit.slope <= -31.0 / 12;
    } else {
        out.expectations.push_back({"exponent", fit.slope, 0, 0, Relation::AtMost, Provenance::Trivial});
    }
}

inline double expected_volume_exponent(const FibrationModel& fm) {
    return classify_asymptotics(fm).kind == AsymptoticKind::RayLike ? 1.5 : 2.0;
}

inline void check_volume_growth(const CheckContext& cx, CheckOutcome& out) {
    const auto profile = star_profile(*cx.fm, cx.sc.epsilon, cx.vf);
    const auto fit = volume_growth_fit(profile, scenario_radii(cx.sc, geometric_radii(1e2, 1e6, 13), true),
                                       cx.opt.threads);
    fit_details(out, fit);
    add_series(out, fit, "volume");
    out.expectations.push_back(
        {"exponent", fit.slope, expected_volume_exponent(*cx.fm), 0.05, Relation::Near, Provenance::Published});
}

inline void check_sob(const CheckContext& cx, CheckOutcome& out) {
    const auto profile = star_profile(*cx.fm, cx.sc.epsilon, cx.vf);
    const auto rep = sob_check(profile, scenario_radii(cx.sc, geometric_radii(1e2, 1e6, 13), true), cx.opt.threads);
    out.details["upper_constant"] = {rep.upper_min, rep.upper_max};
    out.details["lower_constant"] = {rep.lower_min, rep.lower_max};
    out.details["connected"] = rep.connected;
    for (std::size_t i = 0; i < rep.radii.size(); ++i) {
        out.series.push_back({rep.radii[i], "upper_constant", rep.upper[i]});
        out.series.push_back({rep.radii[i], "lower_constant", rep.lower[i]});
    }
    out.expectations.push_back(
        {"exponent", rep.beta, expected_volume_exponent(*cx.fm), 0.05, Relation::Near, Provenance::Published});
    out.expectations.push_back({"lower_constant_min", rep.lower_min, 0, 0, Relation::AtLeast, Provenance::Trivial});
    out.expectations.push_back(
        {"upper_constant_spread", rep.upper_max / rep.upper_min, 1, 1, Relation::AtMost, Provenance::Trivial});
}

inline void check_cone(const CheckContext& cx, CheckOutcome& out) {
    const auto& fm = *cx.fm;
    const auto cone = tangent_cone(fm, cx.sc.epsilon, cx.vf);
    out.details["kind"] = to_string(cone.kind);
    out.details["angle_over_pi"] = rational_text(cone.angle_over_pi);
    if (cone.kind == AsymptoticKind::ALG) {
        const int k = fm.cover_degree;
        const Rational angle(2 * (fm.deck_exponents[0] + fm.deck_exponents[1] - k), k);
        out.expectations.push_back({"angle_over_pi", to_double(cone.angle_over_pi), to_double(angle), 0,
                                    Relation::Near, Provenance::Published});
        return;
    }
    if (cone.kind == AsymptoticKind::ALH) {
        out.expectations.push_back(
            {"angle_over_pi", to_double(cone.angle_over_pi), 0, 0, Relation::Near, Provenance::Published});
        return;
    }
    for (std::size_t i = 0; i < cone.lambdas.size(); ++i)
        out.series.push_back({cone.lambdas[i], "rescaled_coefficient", cone.coefficients[i]});
    out.details["limit"] = cone.limit;
    if (cone.kind == AsymptoticKind::ConeLike) {
        const int p = fm.cover_degree - fm.coordinate_powers[0] - fm.coordinate_powers[1];
        out.expectations.push_back({"angle_over_pi", to_double(cone.angle_over_pi),
                                    to_double(Rational(2 * p, fm.cover_degree)), 0, Relation::Near,
                                    Provenance::Published});
    }
    if (std::isfinite(cone.published)) {
        out.details["published"] = cone.published;
        out.details["limit_over_published"] = cone.limit / cone.published;
        out.expectations.push_back(
            {"limit", cone.limit, cone.published, 0.01 * cone.published, Relation::Near, Provenance::Published});
    }
}

inline void check_weierstrass(const CheckContext& cx, CheckOutcome& out) {
    int b = 1;
    if (!cx.sc.left.empty()) {
        const auto t = parse_fiber(cx.sc.left);
        if (t.kind != FiberKind::I) throw ConfigError("the Weierstrass check models I_b fibers");
        b = t.b;
    }
    const double offsets[] = {0.17, 0.31, 0.43, 0.62, 0.79};
    const cplx zs[] = {cplx(0.05, 0), cplx(0.1, 0.1), cplx(-0.2, 0.15), cplx(0.3, -0.2), cplx(0.5, 0)};
    double residual = 0, ratio = 0;
    int skipped = 0;
    for (cplx z : zs) {
        EllipticData ed{b, z};
        const cplx tau = ed.tau();
        for (int i = 0; i < 5; ++i) {
            const cplx v = offsets[i] + offsets[(i + 2) % 5] * tau;
            residual = std::max(residual, cubic_residual(ed, v));
            if (std::abs(wp_prime(ed, v)) > 1e-2 * std::max(1.0, std::abs(wp(ed, v))))
                ratio = std::max(ratio, std::abs(volume_pullback_ratio(ed, v) - 1.0));
            else
                ++skipped;
        }
    }
    out.details["b"] = b;
    out.details["ill_conditioned_skipped"] = skipped;
    out.expectations.push_back({"max_cubic_residual", residual, 0, 1e-8, Relation::AtMost, Provenance::Published});
    out.expectations.push_back({"max_ratio_error", ratio, 0, 1e-8, Relation::AtMost, Provenance::Published});
}

inline void check_gluing(const CheckContext& cx, CheckOutcome& out) {
    const EHConfig cfg{cx.sc.eh_a, cx.sc.eh_delta};
    const auto rep = gluing_report(cfg, cx.sc.samples, cx.sc.seed);
    out.details["a_max"] = rep.a_max;
    out.details["a_max_capped"] = rep.a_max_capped;
    out.details["hessian_mismatch"] = rep.hessian_mismatch;
    out.details["max_deviation"] = rep.max_deviation;
    out.expectations.push_back({"det_residual", rep.det_residual, 0, 1e-10, Relation::AtMost, Provenance::Published});
    out.expectations.push_back({"min_eigenvalue", rep.min_eigenvalue, 0, 0, Relation::AtLeast, Provenance::Trivial});
    out.expectations.push_back({"a_max", rep.a_max, 0, 0, Relation::AtLeast, Provenance::Published});
    // |g - I| / a^2 across a doubling ladder; the spread should stay within 20%.
    std::vector<double> scaled;
    for (double a : {cfg.a, 2 * cfg.a, 4 * cfg.a}) {
        const auto r = gluing_report(EHConfig{a, cfg.delta}, cx.sc.samples, cx.sc.seed);
        scaled.push_back(r.max_deviation / (a * a));
        out.series.push_back({a, "deviation", r.max_deviation});
    }
    const auto [lo, hi] = std::minmax_element(scaled.begin(), scaled.end());
    out.details["deviation_over_a2"] = scaled;
    out.expectations.push_back({"a2_scaling_spread", *hi / *lo - 1, 0, 0.2, Relation::AtMost, Provenance::Published});
}

using CheckFn = void (*)(const CheckContext&, CheckOutcome&);

inline const std::map<std::string, CheckFn>& check_table() {
    static const std::map<std::string, CheckFn> table{
        {"canonical", check_canonical},       {"christoffel", check_christoffel},
        {"classify", check_classify},         {"closed", check_closed},
        {"cone", check_cone},                 {"curvature_decay", check_curvature_decay},
        {"deck", check_deck},                 {"error_decay", check_error_decay},
        {"fiber_volume", check_fiber_volume}, {"flatness", check_flatness},
        {"gluing", check_gluing},             {"ma", check_ma},
        {"positivity", check_positivity},     {"ricci", check_ricci},
        {"sob", check_sob},                   {"volume_growth", check_volume_growth},
        {"weierstrass", check_weierstrass}};
    return table;
}

}  // namespace detail

struct Report {
    std::string scenario;
    RunOptions options;
    std::vector<CheckOutcome> checks;  // sorted by name
    std::string config_error;

    bool passed() const {
        return config_error.empty() && !checks.empty() &&
               std::all_of(checks.begin(), checks.end(), [&](const auto& c) { return c.passed(options.tolerance_scale); });
    }
    int exit_code() const { return !config_error.empty() ? 2 : passed() ? 0 : 1; }
};

// Checks run in name order: none depends on another's output, so the order
// only fixes the report layout. `progress` is told about each finished check.
inline Report run_scenario(const Scenario& sc, RunOptions opt = {},
                           const std::function<void(const CheckOutcome&)>& progress = {}) {
    Report rep{sc.name, opt, {}, {}};
    detail::CheckContext cx{sc, opt, std::nullopt, sc.volume_form()};
    if (sc.has_fibration()) cx.fm = sc.fibration();
    std::vector<std::string> names = sc.checks;
    std::sort(names.begin(), names.end());
    for (const auto& name : names) {
        CheckOutcome out;
        out.name = name;
        const auto start = std::chrono::steady_clock::now();
        try {
            detail::check_table().at(name)(cx, out);
        } catch (const std::exception& e) {
            out.error = e.what();
        }
        out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (progress) progress(out);
        rep.checks.push_back(std::move(out));
    }
    return rep;
}

// Wall times stay out of the file so that reruns compare byte for byte.
inline json report_json(const Report& rep) {
    json j;
    j["scenario"] = rep.scenario;
    j["tolerance_scale"] = rep.options.tolerance_scale;
    j["status"] = rep.config_error.empty() ? (rep.passed() ? "pass" : "fail") : "config_error";
    if (!rep.config_error.empty()) j["error"] = rep.config_error;
    json checks = json::object();
    for (const auto& c : rep.checks) {
        json cj;
        cj["status"] = c.passed(rep.options.tolerance_scale) ? "pass" : "fail";
        if (!c.error.empty()) cj["error"] = c.error;
        json ex = json::object();
        for (const auto& e : c.expectations)
            ex[e.quantity] = {{"measured", e.measured},
                              {"expected", e.expected},
                              {"tolerance", e.tolerance * rep.options.tolerance_scale},
                              {"relation", to_string(e.relation)},
                              {"provenance", to_string(e.provenance)},
                              {"holds", e.holds(rep.options.tolerance_scale)}};
        cj["expectations"] = ex;
        cj["details"] = c.details;
        checks[c.name] = cj;
    }
    j["checks"] = checks;
    return j;
}

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string series_csv(const Report& rep) {
    std::string out = "radius,observable,value\n";
    for (const auto& c : rep.checks)
        for (const auto& row : c.series)
            out += format_double(row.radius) + "," + c.name + "." + row.observable + "," + format_double(row.value) + "\n";
    return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw std::runtime_error(path.parent_path().string() + ": " + ec.message());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
    out << text;
    if (!out) throw std::runtime_error(path.string() + ": write failed");
}

struct OutputPaths {
    std::filesystem::path report, csv;
};

inline OutputPaths output_paths(const std::filesystem::path& dir, const std::string& name, const Scenario* sc) {
    OutputPaths p{dir / (name + ".report.json"), dir / (name + ".csv")};
    if (sc && !sc->report_file.empty()) p.report = dir / sc->report_file;
    if (sc && !sc->csv_file.empty()) p.csv = dir / sc->csv_file;
    return p;
}

inline void write_outputs(const Report& rep, const OutputPaths& paths) {
    write_text(paths.report, report_json(rep).dump(2) + "\n");
    write_text(paths.csv, series_csv(rep));
}

}  // namespace semiflat
