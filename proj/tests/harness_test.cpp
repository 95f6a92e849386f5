#include <gtest/gtest.h>

#include <cmath>

#include "jseit/harness.hpp"

using namespace jseit;

TEST(Metrics, RelativeErrorExamples) {
    const Eigen::Vector2d t(1.0, 0.0);
    EXPECT_DOUBLE_EQ(relative_error(t, t), 0.0);
    EXPECT_DOUBLE_EQ(relative_error(t, Eigen::Vector2d::Zero()), 1.0);
    EXPECT_DOUBLE_EQ(relative_error(t, Eigen::Vector2d(0.0, 1.0)), 2.0);
    EXPECT_THROW(relative_error(Eigen::Vector2d::Zero(), t), std::domain_error);
    EXPECT_THROW(relative_error(t, Eigen::Vector3d::Zero()), std::invalid_argument);
}

TEST(Metrics, RecoverabilityBound) {
    EXPECT_EQ(recoverability_bound(100, 2), 51.0);
    EXPECT_EQ(recoverability_bound(32, 2), 17.0);
    EXPECT_EQ(recoverability_bound(16, 2), 9.0);
    EXPECT_THROW(recoverability_bound(0, 2), std::invalid_argument);
}

TEST(Metrics, Summarize) {
    const Stats s = summarize({1.0, 2.0, 3.0, 4.0});
    EXPECT_DOUBLE_EQ(s.mean, 2.5);
    EXPECT_NEAR(s.stddev, std::sqrt(5.0 / 3.0), 1e-15);
    EXPECT_EQ(summarize({7.0}).stddev, 0.0);
    EXPECT_TRUE(std::isnan(summarize({}).mean));
}

TEST(Config, MethodsAndOverrides) {
    EXPECT_EQ(parse_method("proposed"), Method::jsr);
    EXPECT_EQ(parse_method(to_string(Method::linearized)), Method::linearized);
    EXPECT_THROW(parse_method("born"), std::invalid_argument);
    RunConfig c;
    c.c_tau = 2.0;
    c.refine_steps = 0;
    const MethodParams p = resolve_params(c);
    EXPECT_EQ(p.csalsa.c_tau, 2.0);
    EXPECT_EQ(p.refine_steps, 0);
    EXPECT_EQ(default_params("sparseA", Method::linearized, Geometry::m100).csalsa.mu, 1.001);
    EXPECT_TRUE(default_params("kite", Method::jsr, Geometry::m100).precondition);
    EXPECT_EQ(default_params("kite", Method::jsr, Geometry::m16p).csalsa.c_eps, 0.2);
    EXPECT_THROW(default_params("ring", Method::jsr, Geometry::m100), std::invalid_argument);
    c.excitations = 5;
    EXPECT_THROW(c.excitation_list(), std::invalid_argument);
}

class SmallRun : public ::testing::Test {
protected:
    static RunConfig config(Method m) {
        RunConfig c;
        c.method = m;
        c.seeds = {1, 2};
        c.forward_nodes = 512;
        c.potential_nodes = 512;
        c.neumann_nodes = 256;
        return c;
    }
    Workspace ws;
};

TEST_F(SmallRun, DeterministicAndConsistentReport) {
    const RunReport a = ws.run(config(Method::jsr));
    const RunReport b = ws.run(config(Method::jsr));
    ASSERT_EQ(a.errors.size(), 2u);
    EXPECT_EQ(a.errors, b.errors);
    const Stats s = summarize(a.errors);
    EXPECT_EQ(s.mean, a.error.mean);
    EXPECT_EQ(s.stddev, a.error.stddev);
    EXPECT_EQ(a.bound, 51.0);
    EXPECT_EQ(a.failures(), 0u);
    for (const auto& r : a.seeds) {
        EXPECT_FALSE(r.support.empty());
        EXPECT_EQ(r.field.size(), static_cast<Eigen::Index>(ws.setup(config(Method::jsr)).grid.size()));
        EXPECT_GT(r.times.total, 0.0);
    }
}

TEST_F(SmallRun, NoiselessOracleSupportBeatsNoisyRun) {
    RunConfig c = config(Method::jsr);
    const RunReport noisy = ws.run(c);
    c.snr_db = std::numeric_limits<double>::infinity();
    c.oracle_support = true;
    // Constants grid-searched for the exact support on seeds 101-110.
    c.c_tau = 0.125;
    c.c_eps = 0.1;
    c.seeds = {1};
    const RunReport oracle = ws.run(c);
    EXPECT_LT(oracle.error.mean, noisy.error.mean);
}

TEST_F(SmallRun, MusicAndLinearizedProduceFields) {
    const RunReport lin = ws.run(config(Method::linearized));
    EXPECT_EQ(lin.failures(), 0u);
    EXPECT_GT(lin.error.mean, 0.0);
    RunConfig c = config(Method::music);
    c.excitations = 4;
    const RunReport mu = ws.run(c);
    ASSERT_EQ(mu.failures(), 0u);
    EXPECT_DOUBLE_EQ(mu.seeds[0].field.maxCoeff(), 1.0);
    EXPECT_GE(mu.seeds[0].signal_dim, 1);
}
