#pragma once

#include "acewgs/error.hpp"
#include "acewgs/surrogate_model.hpp"
#include "acewgs/thermo_equilibrium.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace acewgs {

struct Bounds {
    double lo = 0.0;
    double hi = 0.0;

    double width() const noexcept { return hi - lo; }
    bool operator==(const Bounds&) const = default;
};

struct PsoConfig {
    std::size_t swarm_size = 40;
    /// Upper limit on swarm evaluation rounds, the initial one included.
    std::size_t max_iters = 300;
    double inertia = 0.729;
    double cognitive = 1.49445;
    double social = 1.49445;
    std::uint64_t seed = 42;
    /// Stop after this many consecutive rounds improving gbest by < tolerance.
    std::size_t stagnation_window = 50;
    double stagnation_tolerance = 1e-9;
    /// Per-dimension speed limit as a fraction of the bound width.
    double velocity_clamp = 0.5;
    /// Threads used to evaluate one round; results do not depend on it.
    std::size_t threads = 1;

    void validate() const {
        if (swarm_size < 1 || max_iters < 1) {
            throw Error(Errc::InvalidParams, "swarm_size and max_iters must be at least 1");
        }
        if (!(inertia > 0.0 && cognitive > 0.0 && social > 0.0)) {
            throw Error(Errc::InvalidParams, "inertia, cognitive and social coefficients must be positive");
        }
        if (!(velocity_clamp > 0.0)) {
            throw Error(Errc::InvalidParams, "velocity_clamp must be positive");
        }
    }
};

struct PsoProgress {
    std::size_t iteration = 0;
    std::size_t max_iters = 0;
    double best = 0.0;
};

struct PsoResult {
    std::vector<double> best_position;
    double best_value = -std::numeric_limits<double>::infinity();
    std::size_t iterations_used = 0;
    std::size_t evaluations = 0;
    /// gbest value after each round.
    std::vector<double> trace;
};

namespace pso_detail {

/// Uniform [0, 1) from the top 53 bits; unlike std::uniform_real_distribution
/// this is the same on every standard library.
inline double unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

} // namespace pso_detail

/// Maximizes `objective` over the box `bounds` with canonical inertia PSO.
///
/// `repair` maps a clamped position to a feasible one and runs after every
/// move, including initialization. Objective exceptions and NaN results
/// score -inf. gbest is updated in particle-index order, so the result is
/// bit-identical for a fixed seed whatever `cfg.threads` is.
template <typename Objective, typename Repair>
PsoResult particle_swarm_maximize(std::span<const Bounds> bounds, Objective&& objective, const PsoConfig& cfg,
                                  Repair&& repair,
                                  const std::function<void(const PsoProgress&)>& on_progress = {}) {
    cfg.validate();
    const std::size_t dims = bounds.size();
    for (const auto& b : bounds) {
        if (!(b.lo <= b.hi) || !std::isfinite(b.lo) || !std::isfinite(b.hi)) {
            throw Error(Errc::InfeasibleSpace, "every dimension needs finite bounds with lo <= hi");
        }
    }
    const std::size_t n = cfg.swarm_size;
    constexpr double kNegInf = -std::numeric_limits<double>::infinity();

    std::mt19937_64 rng(cfg.seed);
    std::vector<double> vmax(dims);
    for (std::size_t d = 0; d < dims; ++d) {
        vmax[d] = cfg.velocity_clamp * bounds[d].width();
    }

    std::vector<std::vector<double>> pos(n, std::vector<double>(dims));
    std::vector<std::vector<double>> vel(n, std::vector<double>(dims));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t d = 0; d < dims; ++d) {
            pos[i][d] = bounds[d].lo + pso_detail::unit(rng) * bounds[d].width();
            vel[i][d] = (2.0 * pso_detail::unit(rng) - 1.0) * vmax[d];
        }
        pos[i] = repair(std::move(pos[i]));
    }

    std::vector<double> fitness(n, kNegInf);
    auto evaluate_one = [&](std::size_t i) {
        double f = kNegInf;
        try {
            f = objective(std::span<const double>(pos[i]));
        } catch (...) {
            f = kNegInf;
        }
        fitness[i] = std::isnan(f) ? kNegInf : f;
    };
    auto evaluate_all = [&] {
        const std::size_t workers = std::min(cfg.threads, n);
        if (workers <= 1) {
            for (std::size_t i = 0; i < n; ++i) {
                evaluate_one(i);
            }
            return;
        }
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < n; i += workers) {
                    evaluate_one(i);
                }
            });
        }
    };

    PsoResult result;
    std::vector<std::vector<double>> pbest = pos;
    std::vector<double> pbest_value(n, kNegInf);
    std::vector<double> gbest = pos.front();
    double gbest_value = kNegInf;

    auto absorb_round = [&] {
        for (std::size_t i = 0; i < n; ++i) {
            if (fitness[i] > pbest_value[i]) {
                pbest_value[i] = fitness[i];
                pbest[i] = pos[i];
            }
            if (fitness[i] > gbest_value) {
                gbest_value = fitness[i];
                gbest = pos[i];
            }
        }
        result.evaluations += n;
        ++result.iterations_used;
        result.trace.push_back(gbest_value);
        if (on_progress) {
            on_progress({result.iterations_used, cfg.max_iters, gbest_value});
        }
    };

    evaluate_all();
    absorb_round();

    std::size_t stalled = 0;
    while (result.iterations_used < cfg.max_iters) {
        const double before = gbest_value;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t d = 0; d < dims; ++d) {
                const double r1 = pso_detail::unit(rng);
                const double r2 = pso_detail::unit(rng);
                double v = cfg.inertia * vel[i][d] + cfg.cognitive * r1 * (pbest[i][d] - pos[i][d]) +
                           cfg.social * r2 * (gbest[d] - pos[i][d]);
                v = std::clamp(v, -vmax[d], vmax[d]);
                double x = pos[i][d] + v;
                if (x < bounds[d].lo) {
                    x = bounds[d].lo;
                    v = 0.0;
                } else if (x > bounds[d].hi) {
                    x = bounds[d].hi;
                    v = 0.0;
                }
                vel[i][d] = v;
                pos[i][d] = x;
            }
            pos[i] = repair(std::move(pos[i]));
        }
        evaluate_all();
        absorb_round();

        const double gain = before == kNegInf ? (gbest_value == kNegInf ? 0.0 : std::numeric_limits<double>::infinity())
                                              : gbest_value - before;
        stalled = gain < cfg.stagnation_tolerance ? stalled + 1 : 0;
        if (cfg.stagnation_window > 0 && stalled >= cfg.stagnation_window) {
            break;
        }
    }

    result.best_position = std::move(gbest);
    result.best_value = gbest_value;
    return result;
}

template <typename Objective>
PsoResult particle_swarm_maximize(std::span<const Bounds> bounds, Objective&& objective, const PsoConfig& cfg) {
    return particle_swarm_maximize(bounds, std::forward<Objective>(objective), cfg,
                                   [](std::vector<double> x) { return x; });
}

// ---------------------------------------------------------------------------
// Catalyst design space

/// Continuous search dimensions, in position-vector order.
enum class DesignDim : std::size_t {
    BaseWt,
    PromoterWt,
    TemperatureC,
    YCo,
    YH2o,
    YCo2,
    YH2,
    TimeOnStream,
    WfRatio,
};

inline constexpr std::size_t kDesignDims = 9;

inline constexpr std::array<std::string_view, kDesignDims> kDesignDimNames = {
    "base_wt", "promoter_wt", "temperature", "y_co", "y_h2o", "y_co2", "y_h2", "time_on_stream", "w_f_ratio"};

inline std::optional<DesignDim> design_dim_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kDesignDims; ++i) {
        if (kDesignDimNames[i] == name) {
            return static_cast<DesignDim>(i);
        }
    }
    return std::nullopt;
}

constexpr std::size_t idx(DesignDim d) noexcept { return static_cast<std::size_t>(d); }

/// Lowest temperature the equilibrium correlation accepts, in °C.
inline constexpr double kMinSearchTemperatureC = kKeqMinTemperature - kCelsiusOffset;
inline constexpr double kMaxSearchTemperatureC = kKeqMaxTemperature - kCelsiusOffset;

/// Subtracts the excess over `cap` from values in proportion to each
/// value's distance above its lower bound. With zero lower bounds this is
/// plain rescaling by cap / sum.
inline void project_sum_cap(std::span<double> values, std::span<const double> lows, double cap) {
    double sum = 0.0;
    double slack = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        sum += values[i];
        slack += values[i] - lows[i];
    }
    if (sum <= cap || !(slack > 0.0)) {
        return;
    }
    const double excess = sum - cap;
    for (std::size_t i = 0; i < values.size(); ++i) {
        values[i] = std::max(lows[i], values[i] - excess * (values[i] - lows[i]) / slack);
    }
}

struct DesignSpace {
    std::string base_metal;
    std::optional<std::string> promoter;
    std::string support;
    std::string prep_method;
    std::array<Bounds, kDesignDims> bounds{};

    Bounds& operator[](DesignDim d) { return bounds[idx(d)]; }
    const Bounds& operator[](DesignDim d) const { return bounds[idx(d)]; }

    /// Default search box for a temperature window in °C.
    static std::array<Bounds, kDesignDims> default_bounds(Bounds temperature_c, bool has_promoter) {
        std::array<Bounds, kDesignDims> b{};
        b[idx(DesignDim::BaseWt)] = {0.5, 10.0};
        b[idx(DesignDim::PromoterWt)] = has_promoter ? Bounds{0.0, 10.0} : Bounds{0.0, 0.0};
        b[idx(DesignDim::TemperatureC)] = temperature_c;
        b[idx(DesignDim::YCo)] = {0.001, 0.10};
        b[idx(DesignDim::YH2o)] = {0.01, 0.40};
        b[idx(DesignDim::YCo2)] = {0.0, 0.10};
        b[idx(DesignDim::YH2)] = {0.0, 0.40};
        b[idx(DesignDim::TimeOnStream)] = {1.0, 50.0};
        b[idx(DesignDim::WfRatio)] = {0.1, 10.0};
        return b;
    }

    void validate() const {
        for (std::size_t d = 0; d < kDesignDims; ++d) {
            const auto& b = bounds[d];
            if (!(b.lo <= b.hi) || !std::isfinite(b.lo) || !std::isfinite(b.hi)) {
                throw Error(Errc::InfeasibleSpace, std::string(kDesignDimNames[d]) + " bounds need lo <= hi");
            }
        }
        auto within = [&](DesignDim d, double lo, double hi) {
            const auto& b = (*this)[d];
            if (b.lo < lo || b.hi > hi) {
                throw Error(Errc::InfeasibleSpace, std::string(kDesignDimNames[idx(d)]) + " bounds must lie in [" +
                                                       std::to_string(lo) + ", " + std::to_string(hi) + "]");
            }
        };
        within(DesignDim::BaseWt, 0.0, 100.0);
        within(DesignDim::PromoterWt, 0.0, 100.0);
        within(DesignDim::TemperatureC, kMinSearchTemperatureC, kMaxSearchTemperatureC);
        for (auto d : {DesignDim::YCo, DesignDim::YH2o, DesignDim::YCo2, DesignDim::YH2}) {
            within(d, 0.0, 1.0);
        }
        within(DesignDim::TimeOnStream, 0.0, std::numeric_limits<double>::max());
        within(DesignDim::WfRatio, 0.0, std::numeric_limits<double>::max());
        if (!promoter && (*this)[DesignDim::PromoterWt].hi != 0.0) {
            throw Error(Errc::InfeasibleSpace, "promoter wt% must be pinned to 0 without a promoter");
        }
        if ((*this)[DesignDim::BaseWt].lo + (*this)[DesignDim::PromoterWt].lo > 100.0) {
            throw Error(Errc::InfeasibleSpace, "lower bounds of base and promoter wt% exceed 100");
        }
        if ((*this)[DesignDim::YCo].lo + (*this)[DesignDim::YH2o].lo + (*this)[DesignDim::YCo2].lo +
                (*this)[DesignDim::YH2].lo >
            1.0) {
            throw Error(Errc::InfeasibleSpace, "lower bounds of the feed fractions exceed 1");
        }
        if (!((*this)[DesignDim::YCo].hi > 0.0)) {
            throw Error(Errc::InfeasibleSpace, "feed must be allowed to contain CO");
        }
    }

    /// Composition repair for a position already clamped to the bounds.
    std::vector<double> repair(std::vector<double> x) const {
        std::array<double, 2> wt = {x[idx(DesignDim::BaseWt)], x[idx(DesignDim::PromoterWt)]};
        const std::array<double, 2> wt_lo = {(*this)[DesignDim::BaseWt].lo, (*this)[DesignDim::PromoterWt].lo};
        project_sum_cap(wt, wt_lo, 100.0);
        x[idx(DesignDim::BaseWt)] = wt[0];
        x[idx(DesignDim::PromoterWt)] = wt[1];

        constexpr std::array<DesignDim, 4> gases = {DesignDim::YCo, DesignDim::YH2o, DesignDim::YCo2, DesignDim::YH2};
        std::array<double, 4> y{};
        std::array<double, 4> y_lo{};
        for (std::size_t g = 0; g < gases.size(); ++g) {
            y[g] = x[idx(gases[g])];
            y_lo[g] = (*this)[gases[g]].lo;
        }
        project_sum_cap(y, y_lo, 1.0);
        for (std::size_t g = 0; g < gases.size(); ++g) {
            x[idx(gases[g])] = y[g];
        }
        return x;
    }

    CatalystDesign to_design(std::span<const double> x) const {
        CatalystDesign d;
        d.base = {base_metal, x[idx(DesignDim::BaseWt)]};
        if (promoter) {
            d.promoter = Component{*promoter, x[idx(DesignDim::PromoterWt)]};
        }
        d.support = support;
        d.prep_method = prep_method;
        d.temperature = Celsius{x[idx(DesignDim::TemperatureC)]};
        d.feed.y_co = x[idx(DesignDim::YCo)];
        d.feed.y_h2o = x[idx(DesignDim::YH2o)];
        d.feed.y_co2 = x[idx(DesignDim::YCo2)];
        d.feed.y_h2 = x[idx(DesignDim::YH2)];
        d.feed.y_n2 = std::max(0.0, 1.0 - (d.feed.y_co + d.feed.y_h2o + d.feed.y_co2 + d.feed.y_h2));
        d.time_on_stream_h = x[idx(DesignDim::TimeOnStream)];
        d.w_f_ratio = x[idx(DesignDim::WfRatio)];
        return d;
    }

    /// True when a design sits inside the box and satisfies the
    /// composition identities.
    bool contains(const CatalystDesign& d, double tol = 1e-9) const {
        const double v[kDesignDims] = {d.base.wt_pct,    d.promoter_wt(),   d.temperature.value,
                                       d.feed.y_co,      d.feed.y_h2o,      d.feed.y_co2,
                                       d.feed.y_h2,      d.time_on_stream_h, d.w_f_ratio};
        for (std::size_t k = 0; k < kDesignDims; ++k) {
            if (v[k] < bounds[k].lo - tol || v[k] > bounds[k].hi + tol) {
                return false;
            }
        }
        return d.support_wt() >= -tol && std::abs(d.feed.sum() - 1.0) <= tol;
    }
};

struct Solution {
    CatalystDesign design;
    Prediction prediction;
    std::size_t iterations_used = 0;
    std::size_t evaluations = 0;
    std::vector<double> trace;
};

/// Searches the design space for the highest predicted conversion, minus
/// `risk_lambda` times the ensemble spread.
inline Solution optimize_design(const DesignSpace& space, const ModelBundle& bundle, const PsoConfig& cfg,
                                double risk_lambda = 0.0,
                                const std::function<void(const PsoProgress&)>& on_progress = {}) {
    space.validate();
    auto objective = [&](std::span<const double> x) {
        const auto p = predict(space.to_design(x), bundle);
        return p.conversion - risk_lambda * p.uncertainty;
    };
    auto repair = [&](std::vector<double> x) { return space.repair(std::move(x)); };
    auto run = particle_swarm_maximize(std::span<const Bounds>(space.bounds), objective, cfg, repair, on_progress);

    Solution s;
    s.design = space.to_design(run.best_position);
    s.prediction = predict(s.design, bundle);
    s.iterations_used = run.iterations_used;
    s.evaluations = run.evaluations;
    s.trace = std::move(run.trace);
    return s;
}

} // namespace acewgs
