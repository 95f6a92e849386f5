#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "jseit/layerpot.hpp"
#include "jseit/music.hpp"
#include "jseit/scenarios.hpp"

using namespace jseit;

namespace {

Eigen::MatrixXd gaussian(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd a(r, c);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = nd(rng);
    return a;
}

}  // namespace

TEST(NoiseProjector, ProjectorProperties) {
    const Eigen::MatrixXd y = gaussian(20, 2, 1) * gaussian(2, 4, 2);
    const Eigen::MatrixXd p = noise_projector(y, 2);
    EXPECT_LT((p * y).norm(), 1e-10 * y.norm());
    EXPECT_LT((p * p - p).norm(), 1e-12);
    EXPECT_LT((p - p.transpose()).norm(), 1e-12);
    EXPECT_EQ(signal_dimension(y + 1e-9 * gaussian(20, 4, 3)), 2);
    EXPECT_THROW(noise_projector(y, 0), std::invalid_argument);
    EXPECT_THROW(noise_projector(y, 20), std::invalid_argument);
    EXPECT_THROW(noise_projector(y, 5), std::invalid_argument);
}

class MusicSteering : public ::testing::Test {
protected:
    void SetUp() override {
        const Scenario s = sparse_target_a();
        grid = build_grid(s);
        const NeumannFunction nf(make_ellipse(s.a, s.b, 256));
        const BoundaryMesh pts = measurement_points(Geometry::m100, nf.mesh());
        const NeumannFunction::GradientTable t = nf.gradient_table_on_boundary(pts.params, grid.centers);
        n1 = t.n1;
        n2 = t.n2;
    }
    Grid grid;
    Eigen::MatrixXd n1, n2;
};

TEST_F(MusicSteering, IdentityProjectorGivesFlatSpectrum) {
    const MusicSpectrum ms = music_spectrum(n1, n2, Eigen::MatrixXd::Identity(n1.rows(), n1.rows()));
    EXPECT_TRUE(ms.rank1.empty());
    for (Eigen::Index j = 0; j < ms.values.size(); ++j) EXPECT_NEAR(ms.values[j], 1.0, 1e-10);
}

TEST_F(MusicSteering, DipoleDataPeaksAtSource) {
    const Eigen::Index js = static_cast<Eigen::Index>(grid.size() / 3);
    Eigen::MatrixXd pair(n1.rows(), 2);
    pair << n1.col(js), n2.col(js);
    const Eigen::MatrixXd y = pair * gaussian(2, 4, 5);
    const MusicSpectrum ms = music_spectrum(n1, n2, noise_projector(y, 2));
    EXPECT_DOUBLE_EQ(ms.values[js], 1.0);
    const Vec2 c = grid.centers[static_cast<std::size_t>(js)];
    for (std::size_t j = 0; j < grid.size(); ++j) {
        EXPECT_GE(ms.values[static_cast<Eigen::Index>(j)], 0.0);
        if ((grid.centers[j] - c).norm() > 2.0 * grid.h) {
            EXPECT_LT(ms.values[static_cast<Eigen::Index>(j)], 1.0);
        }
    }
}

TEST_F(MusicSteering, InvariantUnderRebasing) {
    const Eigen::MatrixXd y = gaussian(n1.rows(), 3, 9);
    const Eigen::MatrixXd p = noise_projector(y, 3);
    const double c = std::cos(0.7), s = std::sin(0.7);
    const Eigen::MatrixXd r1 = c * n1 + s * n2, r2 = -s * n1 + c * n2;
    const MusicSpectrum a = music_spectrum(n1, n2, p), b = music_spectrum(r1, r2, p);
    EXPECT_LT((a.values - b.values).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(MusicSpectrum, CollinearSteeringUsesRankOne) {
    Eigen::MatrixXd n1 = gaussian(10, 3, 1), n2 = n1;
    n2.col(0) = gaussian(10, 1, 2);
    const MusicSpectrum ms = music_spectrum(n1, n2, noise_projector(gaussian(10, 2, 3), 1));
    EXPECT_EQ(ms.rank1, (std::vector<std::size_t>{1, 2}));
    EXPECT_THROW(music_spectrum(n1, n2, Eigen::MatrixXd::Identity(9, 9)), std::invalid_argument);
}
