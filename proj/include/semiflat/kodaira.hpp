#pragma once

#include <array>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include <boost/rational.hpp>

#include "core.hpp"
#include "rng.hpp"

namespace semiflat {

using Rational = boost::rational<long>;

enum class FiberKind { I, Istar, I0star, II, IIstar, III, IIIstar, IV, IVstar };

// Kodaira fiber symbol. `b` is meaningful for I and I*, `multiplicity` for the
// six finite types whose periods carry a j-invariant zero of that order.
struct FiberType {
    FiberKind kind = FiberKind::I0star;
    int b = 1;
    int multiplicity = 1;

    friend bool operator==(const FiberType&, const FiberType&) = default;
};

inline bool is_finite(FiberKind k) { return k != FiberKind::I && k != FiberKind::Istar; }

inline int default_multiplicity(FiberKind k) {
    switch (k) {
        case FiberKind::IIstar: return 2;
        case FiberKind::IV: return 2;
        default: return 1;
    }
}

inline void validate(const FiberType& t) {
    if (t.b < 1) throw UnsupportedType("b must be positive");
    const int m = t.multiplicity;
    if (m < 1) throw UnsupportedType("multiplicity must be positive");
    switch (t.kind) {
        case FiberKind::II:
        case FiberKind::IVstar:
            if (m % 3 != 1) throw UnsupportedType("multiplicity must be 1 mod 3 for II and IV*");
            break;
        case FiberKind::IIstar:
        case FiberKind::IV:
            if (m % 3 != 2) throw UnsupportedType("multiplicity must be 2 mod 3 for II* and IV");
            break;
        case FiberKind::III:
        case FiberKind::IIIstar:
            if (m % 2 != 1) throw UnsupportedType("multiplicity must be odd for III and III*");
            break;
        default: break;
    }
}

inline FiberType make_fiber(FiberKind kind, int b = 1, int multiplicity = 0) {
    FiberType t{kind, b, multiplicity ? multiplicity : default_multiplicity(kind)};
    if (!is_finite(kind) || kind == FiberKind::I0star) t.multiplicity = 1;
    if (is_finite(kind)) t.b = 1;
    validate(t);
    return t;
}

// Accepts "II", "II*", "III*", "IV*", "I0*", "I<b>", "I<b>*".
inline FiberType parse_fiber(std::string_view text, int multiplicity = 0) {
    static const std::pair<std::string_view, FiberKind> fixed[] = {
        {"II", FiberKind::II},   {"II*", FiberKind::IIstar},   {"III", FiberKind::III},
        {"III*", FiberKind::IIIstar}, {"IV", FiberKind::IV}, {"IV*", FiberKind::IVstar},
        {"I0*", FiberKind::I0star}};
    for (auto [name, kind] : fixed)
        if (text == name) return make_fiber(kind, 1, multiplicity);
    if (text.size() >= 2 && text[0] == 'I') {
        bool star = text.back() == '*';
        std::string digits(text.substr(1, text.size() - 1 - (star ? 1 : 0)));
        if (!digits.empty() && digits.find_first_not_of("0123456789") == std::string::npos) {
            int b = std::stoi(digits);
            if (b >= 1) return make_fiber(star ? FiberKind::Istar : FiberKind::I, b);
        }
    }
    throw UnsupportedType("unknown fiber type '" + std::string(text) + "'");
}

inline std::string fiber_name(const FiberType& t) {
    switch (t.kind) {
        case FiberKind::I: return "I" + std::to_string(t.b);
        case FiberKind::Istar: return "I" + std::to_string(t.b) + "*";
        case FiberKind::I0star: return "I0*";
        case FiberKind::II: return "II";
        case FiberKind::IIstar: return "II*";
        case FiberKind::III: return "III";
        case FiberKind::IIIstar: return "III*";
        case FiberKind::IV: return "IV";
        case FiberKind::IVstar: return "IV*";
    }
    return "?";
}

using IntMatrix2 = std::array<std::array<long, 2>, 2>;

inline IntMatrix2 operator*(const IntMatrix2& a, const IntMatrix2& b) {
    IntMatrix2 c{};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
    return c;
}

inline constexpr IntMatrix2 identity2{{{1, 0}, {0, 1}}};

inline IntMatrix2 monodromy(const FiberType& t) {
    const long b = t.b;
    switch (t.kind) {
        case FiberKind::I: return {{{1, b}, {0, 1}}};
        case FiberKind::Istar: return {{{-1, -b}, {0, -1}}};
        case FiberKind::I0star: return {{{-1, 0}, {0, -1}}};
        case FiberKind::II: return {{{0, 1}, {-1, 1}}};
        case FiberKind::IIstar: return {{{1, -1}, {1, 0}}};
        case FiberKind::III: return {{{0, 1}, {-1, 0}}};
        case FiberKind::IIIstar: return {{{0, -1}, {1, 0}}};
        case FiberKind::IV: return {{{-1, 1}, {-1, 0}}};
        case FiberKind::IVstar: return {{{0, -1}, {1, -1}}};
    }
    return identity2;
}

struct MonodromyOrder {
    std::optional<int> order;  // empty means infinite
    bool quasi_order_two = false;  // -A is unipotent (I_b*)
};

inline MonodromyOrder monodromy_order(const FiberType& t) {
    const IntMatrix2 a = monodromy(t);
    IntMatrix2 p = a;
    for (int n = 1; n <= 12; ++n) {
        if (p == identity2) return {n, false};
        p = p * a;
    }
    IntMatrix2 sq = a * a;
    IntMatrix2 neg{{{-a[0][0], -a[0][1]}, {-a[1][0], -a[1][1]}}};
    bool unipotent_neg = neg[0][0] == 1 && neg[1][1] == 1 && neg[1][0] == 0;
    return {std::nullopt, unipotent_neg && sq != identity2};
}

// Degree d of the cover z = q^d on which the periods become single valued.
inline int cover_degree(const FiberType& t) {
    switch (t.kind) {
        case FiberKind::I: return 1;
        case FiberKind::Istar:
        case FiberKind::I0star: return 2;
        case FiberKind::II:
        case FiberKind::IIstar: return 6;
        case FiberKind::III:
        case FiberKind::IIIstar: return 4;
        case FiberKind::IV:
        case FiberKind::IVstar: return 3;
    }
    return 1;
}

// Power a in tau = q^a * (bounded unit factor).
inline int leading_power(const FiberType& t) {
    switch (t.kind) {
        case FiberKind::I: return 0;
        case FiberKind::II: return 5;
        case FiberKind::III: return 3;
        case FiberKind::IV: return 2;
        default: return 1;
    }
}

// Exponent e of the deck multiplier zeta_d^e on w; it undoes q^a.
inline int deck_exponent(const FiberType& t) {
    const int d = cover_degree(t);
    return ((-leading_power(t)) % d + d) % d;
}

// Exponent n of x = q^n in the unit factors (1 - x), (1 - zeta3 x), (1 + x).
inline int unit_exponent(const FiberType& t) {
    switch (t.kind) {
        case FiberKind::II:
        case FiberKind::IIstar:
        case FiberKind::III:
        case FiberKind::IIIstar: return 2 * t.multiplicity;
        case FiberKind::IV:
        case FiberKind::IVstar: return t.multiplicity;
        default: return 0;
    }
}

// Isotrivial factor: periods q^power * (1, ratio) with a constant ratio.
struct ConstantShape {
    cplx ratio{0, 1};
    int power = 1;
};

using FactorShape = std::variant<FiberType, ConstantShape>;

// Periods written as tau_j = q^power * t_j with t_j bounded near q = 0, plus
// d t_j / d log q. Keeping the power separate lets callers work with log|q|
// far below the double range.
template <class R>
struct StrippedPeriods {
    int power = 0;
    std::array<complex_t<R>, 2> t{};
    std::array<complex_t<R>, 2> dt{};
};

template <class R>
StrippedPeriods<R> stripped_periods(const FactorShape& shape, complex_t<R> q, complex_t<R> log_q) {
    using C = complex_t<R>;
    StrippedPeriods<R> out;
    if (const auto* cs = std::get_if<ConstantShape>(&shape)) {
        out.power = cs->power;
        out.t = {C(1), C(R(cs->ratio.real()), R(cs->ratio.imag()))};
        out.dt = {C(0), C(0)};
        return out;
    }
    const auto& ft = std::get<FiberType>(shape);
    out.power = leading_power(ft);
    const C i(0, 1);
    const C w = root_of_unity<R>(3, 1);
    const int n = unit_exponent(ft);
    switch (ft.kind) {
        case FiberKind::II:
        case FiberKind::IIstar:
        case FiberKind::IV:
        case FiberKind::IVstar: {
            C x = ipow(q, n);
            out.t = {C(1) - x, w * (C(1) - w * x)};
            out.dt = {-R(n) * x, -w * w * R(n) * x};
            break;
        }
        case FiberKind::III:
        case FiberKind::IIIstar: {
            C x = ipow(q, n);
            out.t = {C(1) - x, i * (C(1) + x)};
            out.dt = {-R(n) * x, i * R(n) * x};
            break;
        }
        case FiberKind::I0star:
            out.t = {C(1), i};
            out.dt = {C(0), C(0)};
            break;
        case FiberKind::I: {
            C c = R(ft.b) / (2 * pi_v<R> * i);
            out.t = {C(1), c * log_q};
            out.dt = {C(0), c};
            break;
        }
        case FiberKind::Istar: {
            C c = R(ft.b) / (pi_v<R> * i);
            out.t = {C(1), c * log_q};
            out.dt = {C(0), c};
            break;
        }
    }
    return out;
}

// Second generator of the w-lattice (the first is 1), written directly rather
// than as a quotient of the periods above.
inline cplx w_lattice_ratio(const FactorShape& shape, cplx q, cplx log_q) {
    if (const auto* cs = std::get_if<ConstantShape>(&shape)) return cs->ratio;
    const auto& ft = std::get<FiberType>(shape);
    const cplx i(0, 1);
    const cplx w = root_of_unity(3, 1);
    const cplx x = ipow(q, unit_exponent(ft));
    switch (ft.kind) {
        case FiberKind::II:
        case FiberKind::IIstar:
        case FiberKind::IV:
        case FiberKind::IVstar: return w * (1.0 - w * x) / (1.0 - x);
        case FiberKind::III:
        case FiberKind::IIIstar: return i * (1.0 + x) / (1.0 - x);
        case FiberKind::I0star: return i;
        case FiberKind::I: return double(ft.b) / (2 * pi * i) * log_q;
        case FiberKind::Istar: return double(ft.b) / (pi * i) * log_q;
    }
    return i;
}

template <class R>
struct FullPeriods {
    std::array<complex_t<R>, 2> tau{};
    std::array<complex_t<R>, 2> dtau_dlog{};  // d tau / d log q
};

template <class R>
FullPeriods<R> full_periods(const FactorShape& shape, complex_t<R> q, complex_t<R> log_q) {
    auto sp = stripped_periods<R>(shape, q, log_q);
    complex_t<R> qa = ipow(q, sp.power);
    FullPeriods<R> out;
    for (int j = 0; j < 2; ++j) {
        out.tau[j] = qa * sp.t[j];
        out.dtau_dlog[j] = qa * (R(sp.power) * sp.t[j] + sp.dt[j]);
    }
    return out;
}

inline int shape_power(const FactorShape& shape) {
    if (const auto* cs = std::get_if<ConstantShape>(&shape)) return cs->power;
    return leading_power(std::get<FiberType>(shape));
}

inline std::string shape_name(const FactorShape& shape) {
    if (const auto* cs = std::get_if<ConstantShape>(&shape)) return "const^" + std::to_string(cs->power);
    return fiber_name(std::get<FiberType>(shape));
}

// Table data for a single fiber type.
struct LocalModel {
    FiberType type;
    int degree;
    IntMatrix2 monodromy;
    int deck_exponent;
    int coordinate_power;
};

// tau(deck q) - tau(q) A at one point, with deck: q -> zeta_d q, log q -> log q + 2 pi i / d.
inline double deck_defect(const FiberType& t, cplx q) {
    const int d = cover_degree(t);
    const cplx lq = std::log(q);
    const cplx q2 = q * root_of_unity(d, 1);
    const cplx lq2 = lq + cplx(0, 2 * pi / d);
    auto a = full_periods<double>(t, q, lq).tau;
    auto b = full_periods<double>(t, q2, lq2).tau;
    const IntMatrix2 m = monodromy(t);
    double err = 0;
    for (int j = 0; j < 2; ++j) {
        cplx img = a[0] * double(m[0][j]) + a[1] * double(m[1][j]);
        err = std::max(err, std::abs(b[j] - img));
    }
    return err;
}

inline LocalModel local_model(const FiberType& t) {
    validate(t);
    LocalModel lm{t, cover_degree(t), monodromy(t), deck_exponent(t), leading_power(t)};
    const IntMatrix2& a = lm.monodromy;
    if (a[0][0] * a[1][1] - a[0][1] * a[1][0] != 1) throw UnsupportedType("monodromy must have det 1");
    // Deck consistency on fixed sample points; arguments avoid the log slit.
    SplitMix64 rng(0x5EED0000ULL + std::uint64_t(t.kind) * 131 + std::uint64_t(t.b));
    for (int i = 0; i < 8; ++i) {
        cplx q = rng.polar(0.1, 0.8, 0.05, 2 * pi / lm.degree - 0.05);
        double scale = std::abs(full_periods<double>(t, q, std::log(q)).tau[0]) + 1;
        if (deck_defect(t, q) > 1e-12 * scale) throw UnsupportedType("deck consistency failed for " + fiber_name(t));
    }
    return lm;
}

// A semi-flat model: one (elliptic) or two (abelian surface) factors whose
// periods live on the common cover z = s^k, factor i using q_i = s^{step_i}.
struct Factor {
    FactorShape shape;
    int step = 1;
    double area_scale = 1.0;  // fiber area of this factor in units of epsilon
};

struct FibrationModel {
    std::vector<Factor> factors;
    int cover_degree = 1;
    std::vector<int> deck_exponents;      // exponent of zeta_k on each w_i
    std::vector<int> coordinate_powers;   // v_i ~ s^{a_i} w_i
    bool isotrivial = false;
    std::string name;

    int fiber_dim() const { return int(factors.size()); }
};

inline FibrationModel elliptic_model(const FiberType& t) {
    LocalModel lm = local_model(t);
    FibrationModel fm;
    fm.factors = {Factor{t, 1, 1.0}};
    fm.cover_degree = lm.degree;
    fm.deck_exponents = {lm.deck_exponent};
    fm.coordinate_powers = {lm.coordinate_power};
    fm.name = fiber_name(t);
    return fm;
}

inline bool is_star_with_positive_b(const FiberType& t) { return t.kind == FiberKind::Istar; }

inline bool supported_pair(const FiberType& l, const FiberType& r) {
    if (l.kind == FiberKind::I || r.kind == FiberKind::I) return false;
    const bool ls = is_star_with_positive_b(l), rs = is_star_with_positive_b(r);
    if (!ls && !rs) return true;
    if (ls && rs) return true;
    const FiberKind other = ls ? r.kind : l.kind;
    return other == FiberKind::IIstar || other == FiberKind::IIIstar || other == FiberKind::IVstar;
}

inline FibrationModel fiber_product(const FiberType& left, const FiberType& right) {
    local_model(left);
    local_model(right);
    if (!supported_pair(left, right))
        throw UnsupportedPair("unsupported fiber pair " + fiber_name(left) + " x " + fiber_name(right));
    const int d1 = cover_degree(left), d2 = cover_degree(right);
    const int k = std::lcm(d1, d2);
    FibrationModel fm;
    fm.cover_degree = k;
    fm.factors = {Factor{left, k / d1, 1.0}, Factor{right, k / d2, 1.0}};
    for (const auto& f : fm.factors) {
        const auto& t = std::get<FiberType>(f.shape);
        fm.deck_exponents.push_back((deck_exponent(t) * f.step) % k);
        fm.coordinate_powers.push_back(leading_power(t) * f.step);
    }
    fm.name = fiber_name(left) + "x" + fiber_name(right);
    return fm;
}

// Isotrivial abelian fibration with hexagonal factors on a degree 6 cover,
// periods (s, zeta3 s) and (s^4, zeta3 s^4). The descended lattice has index
// four over the product of the two factor lattices, so each factor carries
// half the nominal area.
inline FibrationModel isotrivial_hexagonal() {
    const cplx w = root_of_unity(3, 1);
    FibrationModel fm;
    fm.cover_degree = 6;
    fm.factors = {Factor{ConstantShape{w, 1}, 1, 0.5}, Factor{ConstantShape{w, 4}, 1, 0.5}};
    fm.deck_exponents = {5, 2};
    fm.coordinate_powers = {1, 4};
    fm.isotrivial = true;
    fm.name = "isotrivial-k6";
    return fm;
}

// Every model the library evaluates metrics on: the nine elliptic local
// models (I_b and I_b* with b = 1, 2), every unordered finite x finite pair,
// the star pairs, and the hexagonal isotrivial model.
inline std::vector<FibrationModel> catalogued_models() {
    static const FiberKind finite[] = {FiberKind::I0star, FiberKind::II,    FiberKind::IIstar, FiberKind::III,
                                       FiberKind::IIIstar, FiberKind::IV, FiberKind::IVstar};
    std::vector<FibrationModel> out;
    for (auto k : finite) out.push_back(elliptic_model(make_fiber(k)));
    for (int b : {1, 2}) {
        out.push_back(elliptic_model(make_fiber(FiberKind::I, b)));
        out.push_back(elliptic_model(make_fiber(FiberKind::Istar, b)));
    }
    for (std::size_t i = 0; i < std::size(finite); ++i)
        for (std::size_t j = i; j < std::size(finite); ++j)
            out.push_back(fiber_product(make_fiber(finite[i]), make_fiber(finite[j])));
    out.push_back(fiber_product(make_fiber(FiberKind::Istar, 1), make_fiber(FiberKind::Istar, 2)));
    for (auto k : {FiberKind::IIstar, FiberKind::IIIstar, FiberKind::IVstar})
        out.push_back(fiber_product(make_fiber(FiberKind::Istar, 1), make_fiber(k)));
    out.push_back(isotrivial_hexagonal());
    return out;
}

// Order of the s-pole of Omega = g dz ^ dv_1 ^ dv_2 after z = s^k, v_i = s^{a_i} w_i,
// divided by k: the coefficient of the fiber class in the canonical divisor.
inline Rational power_count(int k, int a1, int a2) {
    return Rational((k - 1) + a1 + a2 - 2 * k, k);
}

inline Rational canonical_coefficient(const FibrationModel& fm) {
    if (fm.fiber_dim() != 2) throw Unsupported("canonical coefficient needs a product model");
    return power_count(fm.cover_degree, fm.coordinate_powers[0], fm.coordinate_powers[1]);
}

// Eigenweights of the quotient chart at infinity for each isotrivial order k.
// Admissible weights satisfy a1 + a2 = k - 1 in the s-weight -1 chart.
inline std::pair<int, int> isotrivial_weights(int k) {
    switch (k) {
        case 2: return {1, 0};
        case 3: return {1, 1};
        case 4: return {1, 2};
        case 5: return {1, 3};
        case 6: return {1, 4};
        case 12: return {2, 9};
        default: throw UnsupportedType("isotrivial order must be one of 2, 3, 4, 5, 6, 12");
    }
}

inline Rational isotrivial_coefficient(int k) {
    auto [a1, a2] = isotrivial_weights(k);
    return power_count(k, a1, a2);
}

enum class AsymptoticKind { ALG, ALH, RayLike, ConeLike };

inline std::string to_string(AsymptoticKind k) {
    switch (k) {
        case AsymptoticKind::ALG: return "ALG";
        case AsymptoticKind::ALH: return "ALH";
        case AsymptoticKind::RayLike: return "ray";
        case AsymptoticKind::ConeLike: return "cone";
    }
    return "?";
}

struct Classification {
    AsymptoticKind kind;
    Rational angle_over_pi{0};       // cone angle / pi (0 for rays)
    Rational volume_exponent{0};
};

inline Classification classify_asymptotics(const FibrationModel& fm) {
    if (fm.fiber_dim() != 2) throw Unsupported("classification needs a product model");
    const auto* l = std::get_if<FiberType>(&fm.factors[0].shape);
    const auto* r = std::get_if<FiberType>(&fm.factors[1].shape);
    const int k = fm.cover_degree;
    const int sum = fm.deck_exponents[0] + fm.deck_exponents[1];
    const bool ls = l && l->kind == FiberKind::Istar, rs = r && r->kind == FiberKind::Istar;
    if (ls && rs) return {AsymptoticKind::RayLike, Rational(0), Rational(3, 2)};
    if (ls || rs) {
        const FiberKind other = ls ? r->kind : l->kind;
        Rational angle = other == FiberKind::IIstar ? Rational(2, 3)
                         : other == FiberKind::IIIstar ? Rational(1, 2)
                                                       : Rational(1, 3);
        return {AsymptoticKind::ConeLike, angle, Rational(2)};
    }
    if (sum > k) return {AsymptoticKind::ALG, Rational(2 * (sum - k), k), Rational(2)};
    if (sum == k) return {AsymptoticKind::ALH, Rational(0), Rational(1)};
    throw Unsupported("deck exponents sum below the cover degree");
}

}  // namespace semiflat
