// Eigenvalue-based MUSIC localisation with Neumann-function steering vectors.

#ifndef JSEIT_MUSIC_HPP
#define JSEIT_MUSIC_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace jseit {

// Signal dimension by the largest ratio s_i / s_{i+1} among the leading
// min(m, M) singular values.
inline int signal_dimension(const Eigen::MatrixXd& y) {
    const Eigen::VectorXd s = Eigen::BDCSVD<Eigen::MatrixXd>(y).singularValues();
    const auto r = std::min<Eigen::Index>(s.size(), y.cols());
    if (r <= 1 || s[0] == 0.0) return 1;
    int best = 1;
    double best_ratio = 0.0;
    for (Eigen::Index i = 0; i + 1 < r; ++i) {
        const double ratio = s[i + 1] > 0.0 ? s[i] / s[i + 1] : std::numeric_limits<double>::infinity();
        if (ratio > best_ratio) {
            best_ratio = ratio;
            best = static_cast<int>(i + 1);
        }
        if (s[i + 1] == 0.0) break;
    }
    return best;
}

// P = I - U_s U_s' onto the complement of the s dominant left singular vectors.
inline Eigen::MatrixXd noise_projector(const Eigen::MatrixXd& y, int s) {
    const Eigen::Index m = y.rows();
    if (s < 1 || s >= m) throw std::invalid_argument("noise_projector: signal dimension must lie in [1, m)");
    if (s > y.cols()) throw std::invalid_argument("noise_projector: signal dimension exceeds the number of measurements");
    const Eigen::BDCSVD<Eigen::MatrixXd> svd(y, Eigen::ComputeThinU);
    const Eigen::MatrixXd us = svd.matrixU().leftCols(s);
    return Eigen::MatrixXd::Identity(m, m) - us * us.transpose();
}

inline Eigen::MatrixXd noise_projector(const Eigen::MatrixXd& y) { return noise_projector(y, signal_dimension(y)); }

struct MusicSpectrum {
    Eigen::VectorXd values;          // normalised to max 1
    std::vector<std::size_t> rank1;  // cells with collinear steering vectors
};

// Spectrum 1 / lambda_min(U_j' P U_j) with U_j an orthonormal basis of the
// steering pair [n1(:, j), n2(:, j)].
inline MusicSpectrum music_spectrum(const Eigen::MatrixXd& n1, const Eigen::MatrixXd& n2, const Eigen::MatrixXd& p) {
    if (n1.rows() != p.rows() || n2.rows() != p.rows() || n1.cols() != n2.cols())
        throw std::invalid_argument("music_spectrum: steering and projector sizes differ");
    MusicSpectrum ms;
    ms.values.resize(n1.cols());
    Eigen::MatrixXd pair(n1.rows(), 2);
    for (Eigen::Index j = 0; j < n1.cols(); ++j) {
        pair.col(0) = n1.col(j);
        pair.col(1) = n2.col(j);
        const Eigen::JacobiSVD<Eigen::MatrixXd> svd(pair, Eigen::ComputeThinU);
        const Eigen::Vector2d sv = svd.singularValues();
        if (!(sv[0] > 0.0)) throw std::domain_error("music_spectrum: zero steering vector");
        double lmin;
        if (sv[1] <= 1e-10 * sv[0]) {
            ms.rank1.push_back(static_cast<std::size_t>(j));
            const Eigen::VectorXd u = svd.matrixU().col(0);
            lmin = u.dot(p * u);
        } else {
            const Eigen::MatrixXd u = svd.matrixU();
            const Eigen::Matrix2d g = u.transpose() * p * u;
            lmin = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(g).eigenvalues()(0);
        }
        ms.values[j] = 1.0 / std::max(lmin, std::numeric_limits<double>::min());
    }
    ms.values /= ms.values.maxCoeff();
    return ms;
}

}  // namespace jseit

#endif  // JSEIT_MUSIC_HPP
