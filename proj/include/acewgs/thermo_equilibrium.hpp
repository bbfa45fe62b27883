#pragma once

#include "acewgs/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace acewgs {

struct Kelvin {
    double value = 0.0;
};

struct Celsius {
    double value = 0.0;
};

inline constexpr double kCelsiusOffset = 273.15;

constexpr Kelvin to_kelvin(Celsius c) noexcept { return Kelvin{c.value + kCelsiusOffset}; }
constexpr Celsius to_celsius(Kelvin k) noexcept { return Celsius{k.value - kCelsiusOffset}; }

/// Inlet mole fractions.
struct FeedComposition {
    double y_co = 0.0;
    double y_h2o = 0.0;
    double y_co2 = 0.0;
    double y_h2 = 0.0;
    double y_n2 = 0.0;

    double sum() const noexcept { return y_co + y_h2o + y_co2 + y_h2 + y_n2; }

    void validate() const {
        for (double y : {y_co, y_h2o, y_co2, y_h2, y_n2}) {
            if (!(y >= 0.0 && y <= 1.0)) {
                throw Error(Errc::InvalidFeed, "mole fractions must lie in [0, 1]");
            }
        }
        if (std::abs(sum() - 1.0) > 1e-6) {
            throw Error(Errc::InvalidFeed, "mole fractions must sum to 1 (got " + std::to_string(sum()) + ")");
        }
    }

    bool operator==(const FeedComposition&) const = default;
};

// WGS equilibrium constant correlation, K = exp(4577.8 / T - 4.33).
inline constexpr double kKeqEnthalpyTerm = 4577.8;
inline constexpr double kKeqEntropyTerm = 4.33;
inline constexpr double kKeqMinTemperature = 300.0;
inline constexpr double kKeqMaxTemperature = 1500.0;

inline double equilibrium_constant(Kelvin t) {
    if (!(t.value >= kKeqMinTemperature && t.value <= kKeqMaxTemperature)) {
        throw Error(Errc::OutOfRange, "temperature " + std::to_string(t.value) + " K outside [300, 1500] K");
    }
    return std::exp(kKeqEnthalpyTerm / t.value - kKeqEntropyTerm);
}

enum class EquilibriumRegime {
    /// A forward root exists in (0, x_max); x_eq solves K = Q(x_eq).
    Forward,
    /// No water in the feed: nothing can react.
    NoWater,
    /// Inlet products already exceed equilibrium (Q(0) >= K); the net
    /// forward conversion is 0.
    ReverseFavoured,
};

struct EquilibriumResult {
    double k_eq = 0.0;
    /// CO conversion as a fraction in [0, 1].
    double x_eq = 0.0;
    /// K - Q at the solved point. Only meaningful for the Forward regime.
    double residual = 0.0;
    /// Conversion at which the limiting reactant runs out.
    double x_max = 0.0;
    /// x_max - x_eq as solved. x_eq itself is this difference rounded, so
    /// Q(x_max - slack) is the exact point the residual refers to.
    double slack = 0.0;
    EquilibriumRegime regime = EquilibriumRegime::Forward;
};

/// Reaction quotient after converting a fraction x of the inlet CO.
/// Equimolar reaction, so the total mole count cancels.
inline double reaction_quotient(const FeedComposition& f, double x) {
    const double num = (f.y_co2 + x * f.y_co) * (f.y_h2 + x * f.y_co);
    const double den = (f.y_co * (1.0 - x)) * (f.y_h2o - x * f.y_co);
    return num / den;
}

inline double max_conversion(const FeedComposition& f) {
    return std::min(1.0, f.y_h2o / f.y_co);
}

/// Product mole fractions at conversion x.
inline FeedComposition outlet_composition(const FeedComposition& f, double x) {
    const double reacted = x * f.y_co;
    return {f.y_co - reacted, f.y_h2o - reacted, f.y_co2 + reacted, f.y_h2 + reacted, f.y_n2};
}

namespace thermo_detail {

/// Q as a function of d = x_max - x. One of the two limiting reactants hits
/// zero at d = 0; writing that factor as (gap + d) with gap exactly 0 keeps
/// full relative precision where Q blows up.
struct QuotientNearCeiling {
    const FeedComposition& f;
    double x_max;
    double co_gap;  // 1 - x_max
    double h2o_gap; // y_h2o - x_max * y_co

    double operator()(double d) const {
        const double x = x_max - d;
        const double num = (f.y_co2 + x * f.y_co) * (f.y_h2 + x * f.y_co);
        const double den = (f.y_co * (co_gap + d)) * (h2o_gap + d * f.y_co);
        return num / den;
    }
};

} // namespace thermo_detail

/// Solves K(T) = Q(x) for the CO conversion by bisection.
inline EquilibriumResult equilibrium_conversion(const FeedComposition& feed, Kelvin t) {
    feed.validate();
    if (!(feed.y_co > 0.0)) {
        throw Error(Errc::InvalidFeed, "feed must contain CO");
    }
    EquilibriumResult result;
    result.k_eq = equilibrium_constant(t);
    if (feed.y_h2o == 0.0) {
        result.regime = EquilibriumRegime::NoWater;
        return result;
    }

    const bool water_limited = feed.y_h2o < feed.y_co;
    const double x_max = water_limited ? feed.y_h2o / feed.y_co : 1.0;
    result.x_max = x_max;
    thermo_detail::QuotientNearCeiling q{feed, x_max, water_limited ? 1.0 - x_max : 0.0,
                                         water_limited ? 0.0 : feed.y_h2o - feed.y_co};

    // Q decreases in d; g(d) = K - Q(d) rises from -inf at d = 0.
    const double q_at_inlet = q(x_max);
    if (q_at_inlet >= result.k_eq) {
        result.regime = EquilibriumRegime::ReverseFavoured;
        result.residual = result.k_eq - q_at_inlet;
        return result;
    }
    double lo = 0.0; // g < 0
    double hi = x_max; // g > 0
    while (true) {
        const double mid = lo + 0.5 * (hi - lo);
        if (mid <= lo || mid >= hi) {
            break;
        }
        const double g = result.k_eq - q(mid);
        if (std::isnan(g)) {
            throw Error(Errc::NonConvergence, "quotient evaluation produced NaN");
        }
        if (g < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // lo and hi are adjacent doubles; keep whichever balances better.
    const double g_lo = lo > 0.0 ? result.k_eq - q(lo) : -std::numeric_limits<double>::infinity();
    const double g_hi = result.k_eq - q(hi);
    const double d = std::abs(g_lo) < std::abs(g_hi) ? lo : hi;
    result.slack = d;
    result.x_eq = x_max - d;
    result.residual = std::abs(g_lo) < std::abs(g_hi) ? g_lo : g_hi;
    if (!(result.x_eq >= 0.0 && result.x_eq <= 1.0)) {
        throw Error(Errc::NonConvergence, "conversion left [0, 1]");
    }
    return result;
}

inline EquilibriumResult equilibrium_conversion(const FeedComposition& feed, Celsius t) {
    return equilibrium_conversion(feed, to_kelvin(t));
}

} // namespace acewgs
