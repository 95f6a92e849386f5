#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "jseit/forward.hpp"
#include "jseit/jsr.hpp"
#include "jseit/recover.hpp"
#include "jseit/scenarios.hpp"
#include "jseit/sensing.hpp"

using namespace jseit;

namespace {

// Minimiser of a convex function on [lo, hi] given its right derivative:
// bisection for the first point where the right derivative is non-negative.
template <class D>
double convex_argmin(D right_derivative, double lo, double hi) {
    if (right_derivative(lo) >= 0.0) return lo;
    if (right_derivative(hi) < 0.0) return hi;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (right_derivative(mid) >= 0.0) hi = mid;
        else lo = mid;
    }
    return 0.5 * (lo + hi);
}

// Solution of min |x|_1 s.t. |x - y| <= eps for A = I: soft threshold at the
// level whose residual equals eps, found by bisection.
Eigen::VectorXd identity_oracle(const Eigen::VectorXd& y, double eps) {
    double lo = 0.0, hi = y.cwiseAbs().maxCoeff();
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if ((soft_threshold(y, mid) - y).norm() < eps) lo = mid;
        else hi = mid;
    }
    return soft_threshold(y, 0.5 * (lo + hi));
}

}  // namespace

TEST(Prox, Examples) {
    const Eigen::VectorXd s = soft_threshold(Eigen::Vector2d(2.0, -0.5), 1.0);
    EXPECT_DOUBLE_EQ(s[0], 1.0);
    EXPECT_DOUBLE_EQ(s[1], 0.0);
    const Eigen::VectorXd y = Eigen::Vector2d(1.0, 1.0);
    const Eigen::VectorXd inside = Eigen::Vector2d(1.2, 0.9);
    EXPECT_EQ(project_ball(inside, y, 1.0), inside);
    const Eigen::VectorXd p = project_ball(Eigen::Vector2d(3.0, 1.0), y, 1.0);
    EXPECT_NEAR(p[0], 2.0, 1e-15);
    EXPECT_NEAR(p[1], 1.0, 1e-15);
}

TEST(Prox, MatchesBruteForceScalarMinimisation) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-5.0, 5.0), pos(0.01, 3.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const double s = u(rng), tau = pos(rng);
        // 0.5 (v - s)^2 + tau |v|
        const double ref = convex_argmin([&](double v) { return (v - s) + (v >= 0.0 ? tau : -tau); }, -6.0, 6.0);
        EXPECT_NEAR(soft_threshold(Eigen::VectorXd::Constant(1, s), tau)[0], ref, 1e-10);

        const double c = u(rng), eps = pos(rng);
        // Projection onto the interval [c - eps, c + eps].
        const double pr = convex_argmin([&](double v) { return 2.0 * (v - s); }, c - eps, c + eps);
        EXPECT_NEAR(project_ball(Eigen::VectorXd::Constant(1, s), Eigen::VectorXd::Constant(1, c), eps)[0], pr, 1e-10);
    }
}

TEST(Csalsa, IdentityInstanceMatchesOracle) {
    const Eigen::Vector4d y(3.0, 0.0, 0.0, 0.01);
    CsalsaParams p;
    p.c_eps = 0.05;
    const CsalsaResult r = csalsa(Eigen::MatrixXd::Identity(4, 4), y, p);
    EXPECT_TRUE(r.converged);
    EXPECT_LE((r.x - y).norm(), r.eps * (1.0 + 1e-6));
    EXPECT_LT(r.x.lpNorm<1>(), y.lpNorm<1>());
    EXPECT_NEAR((r.x - identity_oracle(y, r.eps)).norm(), 0.0, 1e-4);
}

TEST(Csalsa, ZeroDataAndValidation) {
    const Eigen::MatrixXd a = Eigen::MatrixXd::Random(6, 4);
    const CsalsaResult r = csalsa(a, Eigen::VectorXd::Zero(6), {});
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.x, Eigen::VectorXd::Zero(4));
    CsalsaParams bad;
    bad.mu = 1.0;
    EXPECT_THROW(csalsa(a, Eigen::VectorXd::Ones(6), bad), std::invalid_argument);
    bad = {};
    bad.c_eps = 0.0;
    EXPECT_THROW(csalsa(a, Eigen::VectorXd::Ones(6), bad), std::invalid_argument);
    EXPECT_THROW(csalsa(a, Eigen::VectorXd::Ones(5), {}), std::invalid_argument);
}

TEST(Csalsa, FeasibleAndNoWorseThanLeastSquares) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::MatrixXd a(30, 12);
        for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = nd(rng);
        Eigen::VectorXd x0 = Eigen::VectorXd::Zero(12);
        x0[trial % 12] = 2.0;
        x0[(trial + 5) % 12] = -1.0;
        Eigen::VectorXd y = a * x0;
        for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += 0.01 * nd(rng);
        CsalsaParams p;
        p.c_eps = 0.05;
        const CsalsaResult r = csalsa(a, y, p);
        ASSERT_TRUE(r.converged);
        EXPECT_LE((a * r.x - y).norm(), r.eps * (1.0 + 1e-6));
        // Least-squares solution pulled towards zero until it touches the ball.
        const Eigen::VectorXd ls = a.colPivHouseholderQr().solve(y);
        double lo = 0.0, hi = 1.0;
        for (int it = 0; it < 100; ++it) {
            const double mid = 0.5 * (lo + hi);
            if ((a * (mid * ls) - y).norm() <= r.eps) hi = mid;
            else lo = mid;
        }
        EXPECT_LE(r.x.lpNorm<1>(), hi * ls.lpNorm<1>() * (1.0 + 1e-6));
    }
}

TEST(Csalsa, ScaleEquivariantInData) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd a(20, 8);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = nd(rng);
    Eigen::VectorXd y(20);
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = nd(rng);
    const CsalsaResult r1 = csalsa(a, y, {});
    const CsalsaResult r2 = csalsa(a, 4.0 * y, {});
    EXPECT_LT((r2.x - 4.0 * r1.x).norm(), 1e-8 * r2.x.norm());
}

class ConcentricSystem : public ::testing::Test {
protected:
    static constexpr double R = 3.0, rho = 1.0;
    void build(double sigma) {
        scen.a = scen.b = R;
        scen.h = 0.25;
        scen.anomalies = {{AnomalyShape::disk({0.0, 0.0}, rho), sigma}};
        grid = build_grid(scen);
        const BoundaryMesh dom = make_ellipse(R, R, 512);
        const TransmissionSolver solver(dom, scen.anomalies, {512});
        pts = measurement_points(Geometry::m100, dom);
        MeasurementSet ms;
        ms.points = pts;
        ms.excitations = {1, 2};
        ms.data.resize(static_cast<Eigen::Index>(pts.size()), 2);
        for (int k = 1; k <= 2; ++k) ms.data.col(k - 1) = solver.solve(k).perturbation_on_boundary(pts.params);
        y = assemble_Y(ms, KernelTag::calderon);
        kernel = assemble_A(grid, pts, KernelTag::calderon);
        support.clear();
        for (std::size_t j = 0; j < grid.size(); ++j)
            if (grid.sigma[j] != 1.0) support.push_back(j);
        // Exact interior field of the concentric problem: amp * grad H_k.
        amp = 2.0 / ((1.0 + sigma) - (1.0 - sigma) * rho * rho / (R * R));
        const auto ns = static_cast<Eigen::Index>(support.size());
        grads = {Eigen::MatrixXd::Zero(ns, 2), Eigen::MatrixXd::Zero(ns, 2)};
        grads[0].col(0).setConstant(amp);
        grads[1].col(1).setConstant(amp);
    }
    Eigen::VectorXd least_squares(const ConductivitySystem& sys) const {
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
        cod.setThreshold(1e-10);
        cod.compute(sys.A);
        const Eigen::VectorXd xn = cod.solve(sys.y);
        Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.size()));
        for (std::size_t c = 0; c < sys.cells.size(); ++c)
            x[static_cast<Eigen::Index>(sys.cells[c])] = xn[static_cast<Eigen::Index>(c)] / sys.column_norms[static_cast<Eigen::Index>(c)];
        return x;
    }
    Scenario scen;
    Grid grid;
    BoundaryMesh pts;
    Eigen::MatrixXd y, kernel;
    std::vector<std::size_t> support;
    std::vector<Eigen::MatrixXd> grads;
    double amp = 0.0;
};

TEST_F(ConcentricSystem, OracleGradientsReproduceContrast) {
    build(3.0);
    const ConductivitySystem sys = build_conductivity_system(restrict_columns(kernel, support), y, support, grads);
    EXPECT_EQ(sys.A.cols(), static_cast<Eigen::Index>(support.size()));
    EXPECT_EQ(sys.A.rows(), 2 * static_cast<Eigen::Index>(pts.size()));
    const Eigen::VectorXd x = least_squares(sys);
    double mean = 0.0;
    for (std::size_t c : support) mean += x[static_cast<Eigen::Index>(c)];
    mean /= static_cast<double>(support.size());
    EXPECT_NEAR(mean, 2.0, 0.2);
}

TEST_F(ConcentricSystem, BornRegimeAgreesWithLinearized) {
    const double sigma = 1.05;
    build(sigma);
    // Internal gradients estimated from the exact currents (1 - sigma) amp grad H_k.
    const auto ns = static_cast<Eigen::Index>(support.size());
    Eigen::MatrixXd cur = Eigen::MatrixXd::Zero(2 * ns, 2);
    cur.col(0).head(ns).setConstant((1.0 - sigma) * amp);
    cur.col(1).tail(ns).setConstant((1.0 - sigma) * amp);
    const BoundaryMesh dom = make_ellipse(R, R, 512);
    const TransmissionSolver solver(dom, scen.anomalies, {512});
    Eigen::MatrixXd traces(static_cast<Eigen::Index>(pts.size()), 2);
    for (int k = 1; k <= 2; ++k) traces.col(k - 1) = solver.solve(k).perturbation_on_boundary(pts.params);
    const InternalPotential ip = estimate_internal_potential(grid, support, cur, dom, pts, traces, {1, 2});
    const ConductivitySystem prop = assemble_conductivity_system(kernel, y, ip);
    std::vector<Eigen::MatrixXd> lin(2, Eigen::MatrixXd::Zero(ns, 2));
    lin[0].col(0).setOnes();
    lin[1].col(1).setOnes();
    const ConductivitySystem born = build_conductivity_system(restrict_columns(kernel, support), y, support, lin);
    const Eigen::VectorXd a = recover_conductivity(prop, {}, grid.size()).values;
    const Eigen::VectorXd b = recover_conductivity(born, {}, grid.size()).values;
    ASSERT_GT(a.norm(), 0.0);
    EXPECT_LT((a - b).norm() / a.norm(), 0.15);
}

TEST(ConductivitySystem, LinearizedColumnsAndZeroData) {
    const Scenario s = sparse_target_a();
    const Grid g = build_grid(s);
    const BoundaryMesh dom = make_ellipse(s.a, s.b, 512);
    const BoundaryMesh pts = measurement_points(Geometry::m100, dom);
    const Eigen::MatrixXd kernel = assemble_A(g, pts, KernelTag::calderon);
    const Eigen::MatrixXd y = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(pts.size()), 2);
    const ConductivitySystem lin = assemble_linearized_system(kernel, y, g, {1, 2});
    EXPECT_EQ(lin.A.cols(), static_cast<Eigen::Index>(g.size()));
    // k = 1 block: every column is -[grad Gamma]_1 area, normalised.
    const auto n = static_cast<Eigen::Index>(g.size());
    const auto m = static_cast<Eigen::Index>(pts.size());
    for (Eigen::Index j = 0; j < n; j += 97) {
        const Eigen::VectorXd col = -kernel.col(j);
        EXPECT_NEAR((lin.A.col(j).head(m) * lin.column_norms[j] - col).norm(), 0.0, 1e-12);
    }
    std::vector<std::size_t> sup;
    for (std::size_t j = 0; j < g.size(); ++j)
        if (g.sigma[j] != 1.0) sup.push_back(j);
    std::vector<Eigen::MatrixXd> grads(2, Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(sup.size()), 2));
    const ConductivitySystem prop = build_conductivity_system(restrict_columns(kernel, sup), y, sup, grads);
    EXPECT_GT(lin.A.cols(), prop.A.cols());
    const ReconField rf = recover_conductivity(prop, {}, g.size());
    EXPECT_EQ(rf.values, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.size())));
}

TEST(ConductivitySystem, DropsVanishingColumns) {
    const Eigen::MatrixXd kernel = Eigen::MatrixXd::Random(5, 6);
    const Eigen::MatrixXd y = Eigen::MatrixXd::Random(5, 1);
    Eigen::MatrixXd g = Eigen::MatrixXd::Ones(3, 2);
    g.row(1).setZero();
    const ConductivitySystem sys = build_conductivity_system(kernel, y, {4, 7, 9}, {g});
    EXPECT_EQ(sys.cells, (std::vector<std::size_t>{4, 9}));
    EXPECT_EQ(sys.dropped, (std::vector<std::size_t>{7}));
    EXPECT_THROW(build_conductivity_system(kernel, y, {4, 7}, {g}), std::invalid_argument);
}
