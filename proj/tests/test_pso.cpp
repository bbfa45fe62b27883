#include "oracles.hpp"

#include <acewgs/pso_optimizer.hpp>

#include <gtest/gtest.h>

using namespace acewgs;

namespace {

const std::filesystem::path kRoot(ACEWGS_SOURCE_DIR);

PsoConfig sphere_config() {
    PsoConfig cfg;
    cfg.swarm_size = 30;
    cfg.max_iters = 200;
    cfg.seed = 42;
    return cfg;
}

PsoResult run_sphere(const PsoConfig& cfg) {
    const std::vector<Bounds> bounds(5, Bounds{-5.0, 5.0});
    return particle_swarm_maximize(
        std::span<const Bounds>(bounds),
        [](std::span<const double> x) {
            double s = 0.0;
            for (double v : x) {
                s += v * v;
            }
            return -s;
        },
        cfg);
}

DesignSpace coarse_space() {
    DesignSpace s;
    s.base_metal = "Pt";
    s.promoter = "Au";
    s.support = "alpha-MoC";
    s.prep_method = "iwi";
    s.bounds = DesignSpace::default_bounds({150.0, 350.0}, true);
    s[DesignDim::PromoterWt] = {3.0, 3.0};
    s[DesignDim::YCo] = {0.001, 0.001};
    s[DesignDim::YH2o] = {0.0618, 0.0618};
    s[DesignDim::YCo2] = {0.05, 0.05};
    s[DesignDim::YH2] = {0.0015, 0.0015};
    s[DesignDim::TimeOnStream] = {1.0, 1.0};
    return s;
}

} // namespace

TEST(Pso, SphereBenchmark) {
    const auto r = run_sphere(sphere_config());
    EXPECT_LE(-r.best_value, 1e-6);
    EXPECT_LE(r.iterations_used, 200u);
    EXPECT_EQ(r.trace.size(), r.iterations_used);
    for (std::size_t i = 1; i < r.trace.size(); ++i) {
        EXPECT_GE(r.trace[i], r.trace[i - 1]);
    }
}

TEST(Pso, DeterministicAcrossRunsAndThreads) {
    auto cfg = sphere_config();
    const auto a = run_sphere(cfg);
    const auto b = run_sphere(cfg);
    cfg.threads = 4;
    const auto c = run_sphere(cfg);
    for (const auto* other : {&b, &c}) {
        EXPECT_EQ(std::bit_cast<std::uint64_t>(a.best_value), std::bit_cast<std::uint64_t>(other->best_value));
        ASSERT_EQ(a.best_position.size(), other->best_position.size());
        for (std::size_t d = 0; d < a.best_position.size(); ++d) {
            EXPECT_EQ(std::bit_cast<std::uint64_t>(a.best_position[d]),
                      std::bit_cast<std::uint64_t>(other->best_position[d]));
        }
        EXPECT_EQ(a.trace, other->trace);
    }
}

TEST(Pso, ObjectiveFailuresScoreNegativeInfinity) {
    const std::vector<Bounds> bounds = {{-1.0, 1.0}};
    PsoConfig cfg;
    cfg.swarm_size = 5;
    cfg.max_iters = 20;
    const auto r = particle_swarm_maximize(
        std::span<const Bounds>(bounds),
        [](std::span<const double> x) -> double {
            if (x[0] < 0.0) {
                throw std::runtime_error("left half undefined");
            }
            return x[0];
        },
        cfg);
    EXPECT_GE(r.best_position[0], 0.0);
}

TEST(Pso, InvalidConfigAndBounds) {
    PsoConfig cfg;
    cfg.swarm_size = 0;
    const std::vector<Bounds> bounds = {{0.0, 1.0}};
    auto f = [](std::span<const double>) { return 0.0; };
    EXPECT_THROW(particle_swarm_maximize(std::span<const Bounds>(bounds), f, cfg), Error);
    const std::vector<Bounds> inverted = {{1.0, 0.0}};
    EXPECT_THROW(particle_swarm_maximize(std::span<const Bounds>(inverted), f, PsoConfig{}), Error);
}

TEST(DesignSpace, RepairKeepsCompositionsFeasible) {
    DesignSpace s;
    s.base_metal = "Pt";
    s.promoter = "Au";
    s.support = "CeO2";
    s.prep_method = "iwi";
    s.bounds = DesignSpace::default_bounds({150.0, 350.0}, true);
    s[DesignDim::BaseWt] = {0.0, 80.0};
    s[DesignDim::PromoterWt] = {0.0, 80.0};
    s[DesignDim::YCo] = {0.0, 0.8};
    s[DesignDim::YH2o] = {0.0, 0.8};
    s.validate();
    std::mt19937_64 rng(4);
    for (int i = 0; i < 1000; ++i) {
        std::vector<double> x(kDesignDims);
        for (std::size_t d = 0; d < kDesignDims; ++d) {
            x[d] = s.bounds[d].lo + pso_detail::unit(rng) * s.bounds[d].width();
        }
        const auto design = s.to_design(s.repair(x));
        ASSERT_TRUE(s.contains(design, 1e-9));
        ASSERT_NEAR(design.support_wt() + design.base.wt_pct + design.promoter_wt(), 100.0, 1e-6);
    }
}

TEST(DesignSpace, ValidationRejectsInfeasibleBoxes) {
    DesignSpace s;
    s.base_metal = "Pt";
    s.support = "CeO2";
    s.prep_method = "iwi";
    s.bounds = DesignSpace::default_bounds({150.0, 350.0}, false);
    EXPECT_NO_THROW(s.validate());
    s[DesignDim::PromoterWt] = {0.0, 1.0};
    EXPECT_THROW(s.validate(), Error);
    s[DesignDim::PromoterWt] = {0.0, 0.0};
    s[DesignDim::TemperatureC] = {0.0, 350.0};
    EXPECT_THROW(s.validate(), Error);
    s[DesignDim::TemperatureC] = {150.0, 350.0};
    s[DesignDim::YCo] = {0.5, 0.6};
    s[DesignDim::YH2o] = {0.6, 0.7};
    EXPECT_THROW(s.validate(), Error);
}

TEST(DesignSpace, CoarsenedSurrogateBeatsGrid) {
    const auto bundle = load_bundle(kRoot / "models" / "reference.bundle.json");
    const auto space = coarse_space();
    const auto solution = optimize_design(space, bundle, PsoConfig{});
    constexpr int n = 50;
    double grid_best = -1.0;
    std::vector<double> x(kDesignDims);
    for (std::size_t d = 0; d < kDesignDims; ++d) {
        x[d] = space.bounds[d].lo;
    }
    const auto at = [&](DesignDim d, int i) { return space[d].lo + space[d].width() * i / (n - 1); };
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
            for (int c = 0; c < n; ++c) {
                x[idx(DesignDim::BaseWt)] = at(DesignDim::BaseWt, a);
                x[idx(DesignDim::TemperatureC)] = at(DesignDim::TemperatureC, b);
                x[idx(DesignDim::WfRatio)] = at(DesignDim::WfRatio, c);
                grid_best = std::max(grid_best, predict(space.to_design(x), bundle).conversion);
            }
        }
    }
    EXPECT_GE(solution.prediction.conversion, grid_best - 1e-3);
    EXPECT_LE(solution.prediction.conversion, solution.prediction.x_eq);
}
