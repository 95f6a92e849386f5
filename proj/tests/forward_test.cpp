#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "jseit/forward.hpp"
#include "jseit/scenarios.hpp"

using namespace jseit;

namespace {

// Separation of variables for a centred disk of radius rho and conductivity
// sigma inside a disk of radius R with flux cos(theta).
struct ConcentricOracle {
    double R, rho, sigma, A, B, C;
    ConcentricOracle(double R_, double rho_, double s_) : R(R_), rho(rho_), sigma(s_) {
        A = 2.0 / ((1.0 + sigma) - (1.0 - sigma) * rho * rho / (R * R));
        B = A * (1.0 + sigma) / 2.0;
        C = A * rho * rho * (1.0 - sigma) / 2.0;
    }
    double u(const Vec2& x) const {
        const double r = x.norm(), c = x.x() / r;
        return r < rho ? A * r * c : (B * r + C / r) * c;
    }
};

TransmissionOptions small_opts(std::size_t n) {
    TransmissionOptions o;
    o.anomaly_nodes = n;
    return o;
}

}  // namespace

TEST(Excitation, CurrentsAndPotentials) {
    const Vec2 x(2.0, -3.0);
    EXPECT_DOUBLE_EQ(background_potential(3, x), -5.0);
    EXPECT_DOUBLE_EQ(background_potential(4, x), -6.0);
    EXPECT_TRUE(background_gradient(4, x).isApprox(Vec2(-3.0, 2.0)));
    EXPECT_THROW(background_potential(0, x), std::invalid_argument);
    EXPECT_THROW(background_gradient(5, x), std::invalid_argument);
    // Every excitation carries zero net current.
    const BoundaryMesh m = make_ellipse(10.0, 7.0, 400);
    const Eigen::Map<const Eigen::VectorXd> w(m.weights.data(), static_cast<Eigen::Index>(m.size()));
    for (int k = 1; k <= 4; ++k) EXPECT_NEAR(boundary_current(k, m).dot(w), 0.0, 1e-10);
}

TEST(Transmission, NoAnomalyGivesBackground) {
    const BoundaryMesh dom = make_ellipse(10.0, 7.0, 256);
    const TransmissionSolver solver(dom, {});
    for (int k = 1; k <= 4; ++k) {
        const TransmissionField f = solver.solve(k);
        EXPECT_LT(f.perturbation_on_boundary(dom.params).cwiseAbs().maxCoeff(), 1e-10) << k;
        EXPECT_NEAR(f.potential({1.0, 2.0}) + background_mean(k, dom), background_potential(k, {1.0, 2.0}), 1e-9);
    }
}

TEST(Transmission, UnitContrastGivesBackground) {
    const BoundaryMesh dom = make_ellipse(10.0, 7.0, 256);
    const TransmissionSolver solver(dom, {{AnomalyShape::disk({1.0, 1.0}, 1.0), 1.0}}, small_opts(128));
    const TransmissionField f = solver.solve(3);
    EXPECT_LT(f.perturbation_on_boundary(dom.params).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Transmission, ConcentricDiskOracle) {
    for (double sigma : {0.2, 2.0, 5.0}) {
        const ConcentricOracle o(3.0, 1.0, sigma);
        const BoundaryMesh dom = make_ellipse(3.0, 3.0, 256);
        const TransmissionSolver solver(dom, {{AnomalyShape::disk({0.0, 0.0}, 1.0), sigma}}, small_opts(256));
        const TransmissionField f = solver.solve(1);
        EXPECT_LT(f.diagnostics().relative_residual, 1e-10);
        const std::vector<double> t = {0.0, 0.4, 1.3, 2.9, 4.1, 5.5};
        const Eigen::VectorXd w = f.perturbation_on_boundary(t);
        for (std::size_t i = 0; i < t.size(); ++i) {
            const Vec2 x = 3.0 * Vec2(std::cos(t[i]), std::sin(t[i]));
            EXPECT_NEAR(w[static_cast<Eigen::Index>(i)], o.u(x) - x.x(), 1e-8) << sigma << " " << t[i];
        }
        for (const Vec2& x : {Vec2(0.3, 0.2), Vec2(-0.5, 0.4), Vec2(2.0, -1.0), Vec2(-1.5, 1.7)}) {
            EXPECT_NEAR(f.potential(x), o.u(x), 1e-7) << sigma << " " << x.transpose();
            const double hstep = 1e-5;
            const double fd = (o.u(x + Vec2(hstep, 0)) - o.u(x - Vec2(hstep, 0))) / (2 * hstep);
            EXPECT_NEAR(f.gradient(x).x(), fd, 1e-6);
        }
    }
}

TEST(Transmission, BoundaryMeanIsZero) {
    const Scenario s = sparse_target_b();
    const BoundaryMesh dom = make_ellipse(s.a, s.b, 256);
    const TransmissionSolver solver(dom, s.anomalies, small_opts(256));
    for (int k = 1; k <= 2; ++k) {
        const Eigen::VectorXd u = solver.solve(k).trace_at_nodes();
        const Eigen::Map<const Eigen::VectorXd> w(dom.weights.data(), static_cast<Eigen::Index>(dom.size()));
        EXPECT_NEAR(u.dot(w), 0.0, 1e-9);
    }
}

TEST(Transmission, SmallContrastIsLinear) {
    // The perturbation scales like (sigma - 1) to first order.
    const BoundaryMesh dom = make_ellipse(10.0, 7.0, 256);
    const BoundaryMesh pts = measurement_points(Geometry::m32, dom);
    auto pert = [&](double sigma) {
        const TransmissionSolver s(dom, {{AnomalyShape::disk({2.0, 1.0}, 1.0), sigma}}, small_opts(128));
        return Eigen::VectorXd(s.solve(2).perturbation_on_boundary(pts.params));
    };
    const Eigen::VectorXd a = pert(1.0 + 1e-3), b = pert(1.0 + 2e-3);
    EXPECT_LT((b - 2.0 * a).norm() / b.norm(), 2e-3);
}

TEST(Transmission, RefinementConverges) {
    const Scenario s = sparse_target_a();
    const BoundaryMesh pts = measurement_points(Geometry::m32, make_ellipse(s.a, s.b, 256));
    auto run = [&](std::size_t n) {
        Scenario t = s;
        const TransmissionSolver solver(make_ellipse(t.a, t.b, n), t.anomalies, small_opts(n));
        return Eigen::VectorXd(solver.solve(1).perturbation_on_boundary(pts.params));
    };
    const Eigen::VectorXd c = run(128), f = run(256), r = run(512);
    EXPECT_LT((f - r).norm(), 0.5 * (c - r).norm() + 1e-12);
    EXPECT_LT((f - r).norm() / r.norm(), 1e-6);
}

TEST(Transmission, GmresMatchesDirect) {
    const BoundaryMesh dom = make_ellipse(10.0, 7.0, 200);
    const std::vector<Anomaly> an = {{AnomalyShape::disk({-1.5, 0.0}, 1.0), 2.0},
                                     {AnomalyShape::kite({4.0, 1.0}, 1.0), 0.5}};
    TransmissionOptions o = small_opts(200);
    const TransmissionSolver direct(dom, an, o);
    o.direct_limit = 0;
    const TransmissionSolver iter(dom, an, o);
    const TransmissionField a = direct.solve(4), b = iter.solve(4);
    EXPECT_FALSE(b.diagnostics().direct);
    EXPECT_LT((a.trace_at_nodes() - b.trace_at_nodes()).norm() / a.trace_at_nodes().norm(), 1e-10);
}

TEST(Transmission, RejectsBadInput) {
    const BoundaryMesh dom = make_ellipse(10.0, 7.0, 64);
    EXPECT_THROW(TransmissionSolver(dom, {{AnomalyShape::disk({0, 0}, 1.0), -1.0}}), std::invalid_argument);
    EXPECT_THROW(TransmissionSolver(make_ellipse(10.0, 7.0, 65), {}), std::invalid_argument);
}

TEST(Measure, ExactSnrAndReproducibleNoise) {
    const Scenario s = sparse_target_a();
    const BoundaryMesh dom = make_ellipse(s.a, s.b, 256);
    const TransmissionSolver solver(dom, s.anomalies, small_opts(128));
    const std::vector<TransmissionField> fields = {solver.solve(1), solver.solve(2)};
    const BoundaryMesh pts = measurement_points(Geometry::m32, dom);
    const MeasurementSet a = measure(fields, pts, Geometry::m32, 40.0, 11);
    const MeasurementSet b = measure(fields, pts, Geometry::m32, 40.0, 11);
    const MeasurementSet c = measure(fields, pts, Geometry::m32, 40.0, 12);
    ASSERT_EQ(a.m(), 32);
    ASSERT_EQ(a.count(), 2);
    for (Eigen::Index k = 0; k < 2; ++k) EXPECT_NEAR(realized_snr(a, k), 40.0, 1e-9);
    EXPECT_EQ(a.data, b.data);
    EXPECT_NE(a.data, c.data);
    const MeasurementSet clean = measure(fields, pts, Geometry::m32, std::numeric_limits<double>::infinity(), 11);
    EXPECT_EQ(clean.data, clean.clean);
}

TEST(Measure, NoAnomalyNoiselessIsZero) {
    const BoundaryMesh dom = make_ellipse(10.0, 7.0, 256);
    const TransmissionSolver solver(dom, {});
    const BoundaryMesh pts = measurement_points(Geometry::m100, dom);
    const MeasurementSet ms = measure({solver.solve(1), solver.solve(2)}, pts, Geometry::m100,
                                      std::numeric_limits<double>::infinity(), 0);
    EXPECT_LT(ms.data.cwiseAbs().maxCoeff(), 1e-10);
}
