// Joint-sparsity linear system Y = A X for the induced currents on the
// reconstruction grid, and its regularised preconditioning.

#ifndef JSEIT_SENSING_HPP
#define JSEIT_SENSING_HPP

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "jseit/forward.hpp"
#include "jseit/geometry.hpp"
#include "jseit/layerpot.hpp"

namespace jseit {

// calderon: data preconditioned by (-1/2 I + K), free-space kernel Gamma.
// neumann_partial: raw traces against the Neumann function (partial boundary).
enum class KernelTag { calderon, neumann_partial };

inline std::string to_string(KernelTag t) { return t == KernelTag::calderon ? "calderon" : "neumann-partial"; }

inline KernelTag kernel_for(Geometry g) { return is_partial(g) ? KernelTag::neumann_partial : KernelTag::calderon; }

struct JointSystem {
    Eigen::MatrixXd A;             // m x 2n, [A1 A2]
    Eigen::MatrixXd Y;             // m x M
    Eigen::VectorXd column_norms;  // norms removed by normalize_columns (ones if never normalised)
    KernelTag tag = KernelTag::calderon;

    Eigen::Index cells() const { return A.cols() / 2; }
};

inline void check_tag(Geometry g, KernelTag tag) {
    if (is_partial(g) && tag != KernelTag::neumann_partial)
        throw std::invalid_argument("partial-boundary measurements require the neumann-partial kernel");
}

// Columns of Y: (-1/2 I + K)[u_k - U_k] at the measurement points, or the raw
// traces for the neumann-partial kernel.
inline Eigen::MatrixXd assemble_Y(const MeasurementSet& ms, KernelTag tag) {
    check_tag(ms.geometry, tag);
    if (tag == KernelTag::neumann_partial) return ms.data;
    Eigen::MatrixXd y(ms.data.rows(), ms.data.cols());
    for (Eigen::Index k = 0; k < ms.data.cols(); ++k) y.col(k) = apply_half_minus_K(ms.points, ms.data.col(k));
    return y;
}

inline void check_clearance(const BoundaryMesh& points, std::span<const Vec2> centers, double h) {
    // A measurement point closer than h/2 would sit inside the cell itself.
    for (const auto& c : centers)
        if (points.distance_to(c) < 0.5 * h)
            throw std::domain_error("assemble_A: grid centre within half a cell of a measurement point");
}

// Midpoint rule for the piecewise-constant current basis:
//   (A_d)_{ij} = [grad_y K(x_i, y_j)]_d * area,
// with K = Gamma(x - y) or the Neumann function N(x, y).
inline Eigen::MatrixXd assemble_A(std::span<const Vec2> centers, double h, const BoundaryMesh& points, KernelTag tag,
                                  const NeumannFunction* nf = nullptr) {
    check_clearance(points, centers, h);
    const double area = h * h;
    const auto m = static_cast<Eigen::Index>(points.size());
    const auto n = static_cast<Eigen::Index>(centers.size());
    Eigen::MatrixXd a(m, 2 * n);
    if (tag == KernelTag::calderon) {
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index i = 0; i < m; ++i) {
                const Vec2 g = -grad_gamma(points.nodes[static_cast<std::size_t>(i)] - centers[static_cast<std::size_t>(j)]);
                a(i, j) = g.x() * area;
                a(i, n + j) = g.y() * area;
            }
        return a;
    }
    if (nf == nullptr) throw std::invalid_argument("assemble_A: the neumann-partial kernel needs a Neumann function");
    const NeumannFunction::GradientTable t = nf->gradient_table_on_boundary(points.params, centers);
    a.leftCols(n) = t.n1 * area;
    a.rightCols(n) = t.n2 * area;
    return a;
}

inline Eigen::MatrixXd assemble_A(const Grid& grid, const BoundaryMesh& points, KernelTag tag,
                                  const NeumannFunction* nf = nullptr) {
    return assemble_A(grid.centers, grid.h, points, tag, nf);
}

// Scales every column to unit l2 norm in place and returns the removed norms.
inline Eigen::VectorXd normalize_columns(Eigen::MatrixXd& a) {
    Eigen::VectorXd norms = a.colwise().norm().transpose();
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        if (!(norms[j] > 0.0)) throw std::domain_error("normalize_columns: zero column " + std::to_string(j));
        a.col(j) /= norms[j];
    }
    return norms;
}

inline JointSystem make_joint_system(Eigen::MatrixXd a, Eigen::MatrixXd y, KernelTag tag, bool normalize = true) {
    if (a.rows() != y.rows()) throw std::invalid_argument("make_joint_system: A and Y row counts differ");
    if (a.cols() % 2 != 0) throw std::invalid_argument("make_joint_system: A must have 2n columns");
    JointSystem js;
    js.tag = tag;
    js.column_norms = normalize ? normalize_columns(a) : Eigen::VectorXd::Ones(a.cols());
    js.A = std::move(a);
    js.Y = std::move(y);
    return js;
}

inline double sigma_max(const Eigen::MatrixXd& a) {
    if (a.size() == 0) return 0.0;
    return Eigen::BDCSVD<Eigen::MatrixXd>(a).singularValues()(0);
}

// (P A, P Y) with P = (S^2 + lambda I)^(-1/2) U' from the thin SVD A = U S V'.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> precondition(const Eigen::MatrixXd& a, const Eigen::MatrixXd& y,
                                                                double lambda) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("precondition: lambda must be non-negative");
    if (a.rows() != y.rows()) throw std::invalid_argument("precondition: A and Y row counts differ");
    const Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU);
    const Eigen::VectorXd s = svd.singularValues();
    Eigen::VectorXd scale(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        const double d = s[i] * s[i] + lambda;
        if (!(d > 0.0)) throw std::domain_error("precondition: zero singular value with lambda = 0");
        scale[i] = 1.0 / std::sqrt(d);
    }
    const Eigen::MatrixXd p = scale.asDiagonal() * svd.matrixU().transpose();
    return {p * a, p * y};
}

inline double default_precondition_lambda(const Eigen::MatrixXd& a) {
    const double s = sigma_max(a);
    return 1e-3 * s * s;
}

}  // namespace jseit

#endif  // JSEIT_SENSING_HPP
