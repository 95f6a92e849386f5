// Conductivity recovery: the reduced system on the estimated support, the
// full-grid linearized baseline, and C-SALSA for
//   min |x|_1  subject to  |A x - y|_2 <= eps.

#ifndef JSEIT_RECOVER_HPP
#define JSEIT_RECOVER_HPP

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "jseit/forward.hpp"
#include "jseit/geometry.hpp"
#include "jseit/jsr.hpp"
#include "jseit/sensing.hpp"

namespace jseit {

// ---------------------------------------------------------------------------
// Proximal maps
// ---------------------------------------------------------------------------

inline Eigen::VectorXd soft_threshold(const Eigen::VectorXd& s, double tau) {
    if (!(tau >= 0.0)) throw std::invalid_argument("soft_threshold: tau must be non-negative");
    return s.unaryExpr([tau](double v) { return std::copysign(std::max(std::abs(v) - tau, 0.0), v); });
}

// Euclidean projection onto the ball of radius eps centred at y.
inline Eigen::VectorXd project_ball(const Eigen::VectorXd& s, const Eigen::VectorXd& y, double eps) {
    if (!(eps >= 0.0)) throw std::invalid_argument("project_ball: radius must be non-negative");
    const Eigen::VectorXd r = s - y;
    const double n = r.norm();
    if (n <= eps) return s;
    return y + r * (eps / n);
}

// ---------------------------------------------------------------------------
// C-SALSA
// ---------------------------------------------------------------------------

struct CsalsaParams {
    double c_tau = 1.0;    // tau_0 = c_tau * mean |(A'A + I)^{-1} A'y|
    double mu = 1.01;      // tau <- tau / mu every iteration
    double c_eps = 0.04;   // eps = c_eps * |y|_2
    double tol = 1e-8;     // relative change of |x|_1
    int max_iter = 5000;
};

struct CsalsaResult {
    Eigen::VectorXd x;
    int iterations = 0;
    bool converged = false;
    double eps = 0.0;
    double tau0 = 0.0;
    double residual = 0.0;  // |A x - y|_2
};

// Solves (I + A'A) u = r, through the smaller of the two Gram matrices.
class IdentityPlusGram {
public:
    explicit IdentityPlusGram(const Eigen::MatrixXd& a) : a_(a), wide_(a.rows() < a.cols()) {
        if (wide_) {
            Eigen::MatrixXd g = a * a.transpose();
            g.diagonal().array() += 1.0;
            llt_.compute(g);
        } else {
            Eigen::MatrixXd g = a.transpose() * a;
            g.diagonal().array() += 1.0;
            llt_.compute(g);
        }
        if (llt_.info() != Eigen::Success) throw std::runtime_error("C-SALSA: factorisation failed");
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& r) const {
        if (!wide_) return llt_.solve(r);
        // (I + A'A)^{-1} = I - A'(I + AA')^{-1} A
        return r - a_.transpose() * llt_.solve(a_ * r);
    }

private:
    const Eigen::MatrixXd& a_;
    bool wide_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
};

inline CsalsaResult csalsa(const Eigen::MatrixXd& a, const Eigen::VectorXd& y, const CsalsaParams& p) {
    if (a.rows() != y.size()) throw std::invalid_argument("csalsa: A and y sizes differ");
    if (!(p.mu > 1.0)) throw std::invalid_argument("csalsa: continuation factor must exceed 1");
    if (!(p.c_eps > 0.0)) throw std::invalid_argument("csalsa: ball radius factor must be positive");
    if (!(p.c_tau > 0.0)) throw std::invalid_argument("csalsa: tau factor must be positive");
    CsalsaResult res;
    res.x = Eigen::VectorXd::Zero(a.cols());
    const double ynorm = y.norm();
    if (ynorm == 0.0) {
        res.converged = true;
        return res;
    }
    res.eps = p.c_eps * ynorm;
    const IdentityPlusGram solver(a);
    const Eigen::VectorXd aty = a.transpose() * y;
    double tau = p.c_tau * solver.solve(aty).cwiseAbs().mean();
    res.tau0 = tau;

    Eigen::VectorXd v1 = Eigen::VectorXd::Zero(a.cols()), d1 = v1;
    Eigen::VectorXd v2 = y, d2 = Eigen::VectorXd::Zero(a.rows());
    const double feasible = res.eps * (1.0 + 1e-6);
    double last_cost = std::numeric_limits<double>::quiet_NaN();
    double best_cost = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best, u;
    for (int k = 1; k <= p.max_iter; ++k) {
        u = solver.solve(v1 + d1 + a.transpose() * (v2 + d2));
        const Eigen::VectorXd au = a * u;
        v1 = soft_threshold(u - d1, tau);
        d1 += v1 - u;
        v2 = project_ball(au - d2, y, res.eps);
        d2 += v2 - au;
        tau /= p.mu;

        const double cost = u.lpNorm<1>();
        const double resid = (au - y).norm();
        res.iterations = k;
        if (resid <= feasible) {
            if (cost < best_cost) {
                best_cost = cost;
                best = u;
            }
            if (cost > 0.0 && std::abs(cost - last_cost) / cost < p.tol) {
                res.x = u;
                res.converged = true;
                res.residual = resid;
                return res;
            }
        }
        last_cost = cost;
    }
    res.x = best.size() ? best : u;
    res.residual = (a * res.x - y).norm();
    return res;
}

// ---------------------------------------------------------------------------
// Conductivity systems
// ---------------------------------------------------------------------------

struct ConductivitySystem {
    Eigen::MatrixXd A;                // (m M) x q, columns normalised
    Eigen::VectorXd y;                // stacked data, excitation blocks in order
    Eigen::VectorXd column_norms;     // removed norms
    std::vector<std::size_t> cells;   // grid index of every column
    std::vector<std::size_t> dropped; // grid cells whose column vanished
};

// Stacks Y column-wise into y.
inline Eigen::VectorXd stack_columns(const Eigen::MatrixXd& y) {
    return Eigen::Map<const Eigen::VectorXd>(y.data(), y.size());
}

// Blocks A_k = -(A1 diag(g_k,1) + A2 diag(g_k,2)) where [A1 A2] is the
// unnormalised kernel system restricted to `cells` and g_k are the potential
// gradients at those cells.
inline ConductivitySystem build_conductivity_system(const Eigen::MatrixXd& kernel, const Eigen::MatrixXd& y,
                                                    const std::vector<std::size_t>& cells,
                                                    const std::vector<Eigen::MatrixXd>& gradients) {
    const auto q = static_cast<Eigen::Index>(cells.size());
    const Eigen::Index m = kernel.rows();
    const auto mexc = static_cast<Eigen::Index>(gradients.size());
    if (kernel.cols() != 2 * q) throw std::invalid_argument("conductivity system: kernel/cell count mismatch");
    if (y.rows() != m || y.cols() != mexc) throw std::invalid_argument("conductivity system: data shape mismatch");
    Eigen::MatrixXd a(m * mexc, q);
    for (Eigen::Index k = 0; k < mexc; ++k) {
        const Eigen::MatrixXd& g = gradients[static_cast<std::size_t>(k)];
        if (g.rows() != q || g.cols() != 2) throw std::invalid_argument("conductivity system: gradient shape mismatch");
        a.middleRows(k * m, m) = -(kernel.leftCols(q) * g.col(0).asDiagonal() + kernel.rightCols(q) * g.col(1).asDiagonal());
    }
    ConductivitySystem cs;
    cs.y = stack_columns(y);
    const Eigen::VectorXd norms = a.colwise().norm().transpose();
    std::vector<Eigen::Index> keep;
    for (Eigen::Index j = 0; j < q; ++j) {
        if (norms[j] > 0.0) keep.push_back(j);
        else cs.dropped.push_back(cells[static_cast<std::size_t>(j)]);
    }
    cs.A.resize(a.rows(), static_cast<Eigen::Index>(keep.size()));
    cs.column_norms.resize(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t c = 0; c < keep.size(); ++c) {
        const auto j = keep[c];
        const auto cc = static_cast<Eigen::Index>(c);
        cs.column_norms[cc] = norms[j];
        cs.A.col(cc) = a.col(j) / norms[j];
        cs.cells.push_back(cells[static_cast<std::size_t>(j)]);
    }
    if (cs.cells.empty()) throw std::domain_error("conductivity system: every column vanished");
    return cs;
}

// Proposed method: `kernel_full` is the unnormalised [A1 A2] sensing matrix
// over the whole grid, `y` the (transformed) data matrix.
inline ConductivitySystem assemble_conductivity_system(const Eigen::MatrixXd& kernel_full, const Eigen::MatrixXd& y,
                                                       const InternalPotential& ip) {
    return build_conductivity_system(restrict_columns(kernel_full, ip.cells), y, ip.cells, ip.gradient);
}

// Linearized baseline: grad U_k = grad H_k at every grid cell.
inline ConductivitySystem assemble_linearized_system(const Eigen::MatrixXd& kernel_full, const Eigen::MatrixXd& y,
                                                     const Grid& grid, const std::vector<int>& excitations) {
    std::vector<std::size_t> cells(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) cells[j] = j;
    std::vector<Eigen::MatrixXd> grads;
    for (int k : excitations) {
        Eigen::MatrixXd g(static_cast<Eigen::Index>(grid.size()), 2);
        for (std::size_t j = 0; j < grid.size(); ++j) g.row(static_cast<Eigen::Index>(j)) = background_gradient(k, grid.centers[j]).transpose();
        grads.push_back(std::move(g));
    }
    return build_conductivity_system(kernel_full, y, cells, grads);
}

// ---------------------------------------------------------------------------
// Reconstructed field
// ---------------------------------------------------------------------------

struct ReconField {
    Eigen::VectorXd values;          // sigma - 1 on every grid cell
    std::vector<std::size_t> cells;  // cells that carried an unknown
    CsalsaResult solve;
};

inline ReconField recover_conductivity(const ConductivitySystem& sys, const CsalsaParams& p, std::size_t grid_size) {
    ReconField f;
    f.solve = csalsa(sys.A, sys.y, p);
    f.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid_size));
    f.cells = sys.cells;
    for (std::size_t c = 0; c < sys.cells.size(); ++c) {
        if (sys.cells[c] >= grid_size) throw std::invalid_argument("recover_conductivity: cell outside the grid");
        const auto cc = static_cast<Eigen::Index>(c);
        f.values[static_cast<Eigen::Index>(sys.cells[c])] = f.solve.x[cc] / sys.column_norms[cc];
    }
    return f;
}

}  // namespace jseit

#endif  // JSEIT_RECOVER_HPP
