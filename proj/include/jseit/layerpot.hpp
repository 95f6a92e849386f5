// Laplace layer potentials on smooth closed curves: fundamental solution,
// Neumann-Poincare operator and its adjoint (Nystrom), double layer
// potential, single layer potential on the curve (Kress log-quadrature) and
// the Neumann function of the interior domain.

#ifndef JSEIT_LAYERPOT_HPP
#define JSEIT_LAYERPOT_HPP

#include <cmath>
#include <complex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "jseit/geometry.hpp"

namespace jseit {

// Gamma(x) = ln|x| / (2 pi)
inline double gamma(const Vec2& x) {
    const double r2 = x.squaredNorm();
    if (r2 == 0.0) throw std::domain_error("gamma: singular at the origin");
    return std::log(r2) / (4.0 * kPi);
}

inline Vec2 grad_gamma(const Vec2& x) {
    const double r2 = x.squaredNorm();
    if (r2 == 0.0) throw std::domain_error("grad_gamma: singular at the origin");
    return x / (kTwoPi * r2);
}

enum class OperatorTag { np, np_adjoint };

struct OperatorMatrix {
    Eigen::MatrixXd matrix;
    OperatorTag tag = OperatorTag::np;
};

namespace detail {

inline void check_distinct(const Vec2& x, const Vec2& y) {
    if ((x - y).squaredNorm() == 0.0)
        throw std::invalid_argument("layer potential: coincident off-diagonal quadrature points");
}

}  // namespace detail

// Nystrom discretisation of K[phi](x) = 1/(2 pi) int <y - x, nu_y>/|x - y|^2 phi(y) ds(y)
// on the mesh nodes. The diagonal uses the smooth-curve limit kappa(x)/(4 pi).
inline OperatorMatrix np_operator(const BoundaryMesh& mesh) {
    const auto n = static_cast<Eigen::Index>(mesh.size());
    OperatorMatrix op{Eigen::MatrixXd(n, n), OperatorTag::np};
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vec2& x = mesh.nodes[i];
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j) {
                op.matrix(i, j) = mesh.curvature[i] / (4.0 * kPi) * mesh.weights[i];
                continue;
            }
            const Vec2 d = mesh.nodes[j] - x;
            detail::check_distinct(x, mesh.nodes[j]);
            op.matrix(i, j) = d.dot(mesh.normals[j]) / (kTwoPi * d.squaredNorm()) * mesh.weights[j];
        }
    }
    return op;
}

// Adjoint operator K*[phi](x) = 1/(2 pi) int <x - y, nu_x>/|x - y|^2 phi(y) ds(y).
inline OperatorMatrix np_adjoint_operator(const BoundaryMesh& mesh) {
    const auto n = static_cast<Eigen::Index>(mesh.size());
    OperatorMatrix op{Eigen::MatrixXd(n, n), OperatorTag::np_adjoint};
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vec2& x = mesh.nodes[i];
        const Vec2& nu = mesh.normals[i];
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j) {
                op.matrix(i, j) = mesh.curvature[i] / (4.0 * kPi) * mesh.weights[i];
                continue;
            }
            const Vec2 d = x - mesh.nodes[j];
            detail::check_distinct(x, mesh.nodes[j]);
            op.matrix(i, j) = d.dot(nu) / (kTwoPi * d.squaredNorm()) * mesh.weights[j];
        }
    }
    return op;
}

// (-1/2 I + K) applied to values known only at the measurement points; the
// operator is discretised on those points with their own arc-length weights.
inline Eigen::VectorXd apply_half_minus_K(const BoundaryMesh& points, const Eigen::VectorXd& values) {
    if (points.size() < 4) throw std::invalid_argument("apply_half_minus_K: at least 4 points are required");
    if (static_cast<std::size_t>(values.size()) != points.size())
        throw std::invalid_argument("apply_half_minus_K: value count does not match the point count");
    const OperatorMatrix k = np_operator(points);
    return k.matrix * values - 0.5 * values;
}

// Double layer potential D[phi](x) = int dGamma(x - y)/dnu_y phi(y) ds(y).
// Rows of the returned matrix map nodal densities to values at `targets`.
inline Eigen::MatrixXd double_layer_matrix(const BoundaryMesh& mesh, std::span<const Vec2> targets) {
    const double tol = 2.0 * mesh.max_spacing();
    Eigen::MatrixXd d(static_cast<Eigen::Index>(targets.size()), static_cast<Eigen::Index>(mesh.size()));
    for (std::size_t t = 0; t < targets.size(); ++t) {
        const Vec2& x = targets[t];
        if (mesh.distance_to(x) < tol)
            throw std::domain_error("double_layer: evaluation point within two node spacings of the boundary");
        for (std::size_t j = 0; j < mesh.size(); ++j) {
            const Vec2 r = mesh.nodes[j] - x;
            d(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) =
                r.dot(mesh.normals[j]) / (kTwoPi * r.squaredNorm()) * mesh.weights[j];
        }
    }
    return d;
}

inline double double_layer(const BoundaryMesh& mesh, const Eigen::VectorXd& density, const Vec2& x) {
    if (static_cast<std::size_t>(density.size()) != mesh.size())
        throw std::invalid_argument("double_layer: density length does not match the mesh");
    const Vec2 pts[1] = {x};
    return (double_layer_matrix(mesh, pts) * density)(0);
}

// ---------------------------------------------------------------------------
// Single layer potential S[mu](x) = int Gamma(x - y) mu(y) ds(y)
// ---------------------------------------------------------------------------

// Regular trapezoidal rule, valid for targets away from the curve.
inline Eigen::MatrixXd single_layer_matrix(const BoundaryMesh& mesh, std::span<const Vec2> targets) {
    Eigen::MatrixXd s(static_cast<Eigen::Index>(targets.size()), static_cast<Eigen::Index>(mesh.size()));
    for (std::size_t t = 0; t < targets.size(); ++t)
        for (std::size_t j = 0; j < mesh.size(); ++j)
            s(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) =
                std::log((targets[t] - mesh.nodes[j]).squaredNorm()) / (4.0 * kPi) * mesh.weights[j];
    return s;
}

// Targets on the curve itself, given by curve parameters. Uses the Kress
// product quadrature for the logarithmic singularity; the mesh must be a
// uniform periodic sampling with an even node count.
inline Eigen::MatrixXd single_layer_on_curve(const BoundaryMesh& mesh, std::span<const double> target_params) {
    const std::size_t n2 = mesh.size();
    if (!mesh.periodic || n2 % 2 != 0)
        throw std::invalid_argument("single_layer_on_curve: needs a periodic mesh with an even node count");
    const std::size_t n = n2 / 2;
    const double dt = kPi / static_cast<double>(n);
    Eigen::MatrixXd s(static_cast<Eigen::Index>(target_params.size()), static_cast<Eigen::Index>(n2));
    for (std::size_t r = 0; r < target_params.size(); ++r) {
        const double t = target_params[r];
        const Vec2 xt = curve_point(mesh.curve, t);
        const double speed_t = curve_d1(mesh.curve, t).norm();
        for (std::size_t j = 0; j < n2; ++j) {
            const double theta = t - mesh.params[j];
            // R_j(t) = -(2 pi / n) sum_{m<n} cos(m theta)/m - (pi/n^2) cos(n theta)
            const double c1 = std::cos(theta);
            const double s1 = std::sin(theta);
            double cm = 1.0;
            double sm = 0.0;
            double acc = 0.0;
            for (std::size_t m = 1; m < n; ++m) {
                const double cn = cm * c1 - sm * s1;
                sm = sm * c1 + cm * s1;
                cm = cn;
                acc += cm / static_cast<double>(m);
            }
            const double cnn = cm * c1 - sm * s1;
            const double rw = -(kTwoPi / static_cast<double>(n)) * acc - kPi / static_cast<double>(n * n) * cnn;
            const double half = std::sin(0.5 * theta);
            double logratio;
            if (std::abs(half) < 1e-12) {
                logratio = std::log(speed_t * speed_t);
            } else {
                logratio = std::log((xt - mesh.nodes[j]).squaredNorm() / (4.0 * half * half));
            }
            const double psi = mesh.speed[j];
            s(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) =
                (rw + dt * logratio) * psi / (4.0 * kPi);
        }
    }
    return s;
}

// Kress quadrature with the mesh nodes themselves as targets. The log weights
// depend only on the node offset, so they are tabulated once.
inline Eigen::MatrixXd single_layer_on_nodes(const BoundaryMesh& mesh) {
    const std::size_t n2 = mesh.size();
    if (!mesh.periodic || n2 % 2 != 0)
        throw std::invalid_argument("single_layer_on_nodes: needs a periodic mesh with an even node count");
    const std::size_t n = n2 / 2;
    const double dt = kPi / static_cast<double>(n);
    std::vector<double> rw(n2);
    for (std::size_t k = 0; k < n2; ++k) {
        const double theta = dt * static_cast<double>(k);
        double acc = 0.0;
        for (std::size_t m = 1; m < n; ++m) acc += std::cos(static_cast<double>(m) * theta) / static_cast<double>(m);
        rw[k] = -(kTwoPi / static_cast<double>(n)) * acc -
                kPi / static_cast<double>(n * n) * std::cos(static_cast<double>(n) * theta);
    }
    const auto l = static_cast<Eigen::Index>(n2);
    Eigen::MatrixXd s(l, l);
    for (std::size_t i = 0; i < n2; ++i) {
        for (std::size_t j = 0; j < n2; ++j) {
            double logratio;
            if (i == j) {
                logratio = std::log(mesh.speed[i] * mesh.speed[i]);
            } else {
                const double half = std::sin(0.5 * (mesh.params[i] - mesh.params[j]));
                logratio = std::log((mesh.nodes[i] - mesh.nodes[j]).squaredNorm() / (4.0 * half * half));
            }
            s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                (rw[(i + n2 - j) % n2] + dt * logratio) * mesh.speed[j] / (4.0 * kPi);
        }
    }
    return s;
}

// ---------------------------------------------------------------------------
// Trigonometric interpolation of periodic samples on a uniform layout.
// ---------------------------------------------------------------------------

class TrigInterpolant {
public:
    // Samples f(t0 + 2 pi i / m), i = 0..m-1.
    TrigInterpolant(double t0, const Eigen::VectorXd& samples) : t0_(t0), m_(samples.size()) {
        if (m_ < 3) throw std::invalid_argument("TrigInterpolant: needs at least 3 samples");
        const Eigen::Index kmax = m_ / 2;
        coeffs_.resize(kmax + 1);
        for (Eigen::Index k = 0; k <= kmax; ++k) {
            std::complex<double> c = 0.0;
            for (Eigen::Index i = 0; i < m_; ++i)
                c += samples[i] * std::polar(1.0, -kTwoPi * static_cast<double>(k * i) / static_cast<double>(m_));
            coeffs_[k] = c / static_cast<double>(m_);
        }
    }

    double operator()(double t) const {
        const double s = t - t0_;
        const Eigen::Index kmax = m_ / 2;
        double v = coeffs_[0].real();
        for (Eigen::Index k = 1; k <= kmax; ++k) {
            const double w = (m_ % 2 == 0 && k == kmax) ? 1.0 : 2.0;
            v += w * (coeffs_[k] * std::polar(1.0, static_cast<double>(k) * s)).real();
        }
        return v;
    }

private:
    double t0_;
    Eigen::Index m_;
    std::vector<std::complex<double>> coeffs_;
};

// ---------------------------------------------------------------------------
// Neumann function
// ---------------------------------------------------------------------------

// N(x, y) with -Lap_x N = delta_y in Omega, dN/dnu_x = -1/|dOmega| and zero
// boundary mean. Written as N = -Gamma(x - y) + S[mu_y](x) + c(y), where mu_y
// solves the interior Neumann problem (-1/2 I + K*) mu_y = f_y with
// f_y = -1/|dOmega| + dGamma(x - y)/dnu_x. The system is bordered to pin the
// zero-mean density. f_y is smooth in y, so the y-gradient of mu_y solves the
// same system with the y-derivative of f_y as right-hand side.
class NeumannFunction {
public:
    struct GradientTable {
        Eigen::MatrixXd n1;  // d/dy1 N(x_i, y_j)
        Eigen::MatrixXd n2;  // d/dy2 N(x_i, y_j)
    };

    explicit NeumannFunction(BoundaryMesh mesh) : mesh_(std::move(mesh)) {
        const auto l = static_cast<Eigen::Index>(mesh_.size());
        if (!mesh_.periodic || l % 2 != 0)
            throw std::invalid_argument("NeumannFunction: needs a periodic mesh with an even node count");
        perimeter_ = mesh_.perimeter();
        Eigen::MatrixXd b = Eigen::MatrixXd::Zero(l + 1, l + 1);
        b.topLeftCorner(l, l) = np_adjoint_operator(mesh_).matrix;
        b.topLeftCorner(l, l).diagonal().array() -= 0.5;
        b.block(0, l, l, 1).setOnes();
        for (Eigen::Index j = 0; j < l; ++j) b(l, j) = mesh_.weights[static_cast<std::size_t>(j)];
        lu_.compute(b);
        if (!(lu_.rcond() > 1e-14)) throw std::runtime_error("NeumannFunction: singular corrector system");
        s_one_ = single_layer_on_nodes(mesh_) * Eigen::VectorXd::Ones(l);
        wvec_.resize(l);
        for (Eigen::Index j = 0; j < l; ++j) wvec_[j] = mesh_.weights[static_cast<std::size_t>(j)];
    }

    const BoundaryMesh& mesh() const { return mesh_; }

    // Densities d mu_y / dy_d for every source, columns [y_1 .. y_S | y_1 .. y_S].
    Eigen::MatrixXd density_gradients(std::span<const Vec2> sources) const {
        const auto l = static_cast<Eigen::Index>(mesh_.size());
        const auto ns = static_cast<Eigen::Index>(sources.size());
        Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(l + 1, 2 * ns);
        for (Eigen::Index s = 0; s < ns; ++s) {
            const Vec2& y = sources[static_cast<std::size_t>(s)];
            check_interior(y);
            for (Eigen::Index i = 0; i < l; ++i) {
                const Vec2 r = mesh_.nodes[static_cast<std::size_t>(i)] - y;
                const Vec2& nu = mesh_.normals[static_cast<std::size_t>(i)];
                const double r2 = r.squaredNorm();
                const double rn = r.dot(nu);
                rhs(i, s) = -(nu.x() / r2 - 2.0 * r.x() * rn / (r2 * r2)) / kTwoPi;
                rhs(i, ns + s) = -(nu.y() / r2 - 2.0 * r.y() * rn / (r2 * r2)) / kTwoPi;
            }
        }
        return lu_.solve(rhs).topRows(l);
    }

    // Gradient table for targets on the boundary given by curve parameters.
    GradientTable gradient_table_on_boundary(std::span<const double> target_params,
                                             std::span<const Vec2> sources) const {
        std::vector<Vec2> targets;
        targets.reserve(target_params.size());
        for (double t : target_params) targets.push_back(curve_point(mesh_.curve, t));
        const Eigen::MatrixXd eval = single_layer_on_curve(mesh_, target_params);
        return assemble_table(eval, targets, sources);
    }

    // Gradient table for interior targets.
    GradientTable gradient_table_interior(std::span<const Vec2> targets, std::span<const Vec2> sources) const {
        const Eigen::MatrixXd eval = single_layer_matrix(mesh_, targets);
        return assemble_table(eval, targets, sources);
    }

    Vec2 gradient_on_boundary(double t, const Vec2& y) const {
        const double tp[1] = {t};
        const Vec2 ys[1] = {y};
        const GradientTable g = gradient_table_on_boundary(tp, ys);
        return {g.n1(0, 0), g.n2(0, 0)};
    }

    Vec2 gradient_interior(const Vec2& x, const Vec2& y) const {
        const Vec2 xs[1] = {x};
        const Vec2 ys[1] = {y};
        const GradientTable g = gradient_table_interior(xs, ys);
        return {g.n1(0, 0), g.n2(0, 0)};
    }

    // N(x, y) for a boundary target x = x(t).
    double value_on_boundary(double t, const Vec2& y) const {
        const double tp[1] = {t};
        const Eigen::VectorXd mu = density(y);
        const double s = (single_layer_on_curve(mesh_, tp) * mu)(0);
        return -gamma(curve_point(mesh_.curve, t) - y) + s + mean_constant(y, mu);
    }

    double value_interior(const Vec2& x, const Vec2& y) const {
        const Vec2 xs[1] = {x};
        const Eigen::VectorXd mu = density(y);
        const double s = (single_layer_matrix(mesh_, xs) * mu)(0);
        return -gamma(x - y) + s + mean_constant(y, mu);
    }

    // Curve parameter of a boundary point (nearest node, then Newton).
    double parameter_of(const Vec2& x) const {
        std::size_t best = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < mesh_.size(); ++i) {
            const double d = (mesh_.nodes[i] - x).squaredNorm();
            if (d < bd) {
                bd = d;
                best = i;
            }
        }
        double t = mesh_.params[best];
        for (int it = 0; it < 20; ++it) {
            const Vec2 r = curve_point(mesh_.curve, t) - x;
            const Vec2 d1 = curve_d1(mesh_.curve, t);
            const Vec2 d2 = curve_d2(mesh_.curve, t);
            const double g = r.dot(d1);
            const double hh = d1.squaredNorm() + r.dot(d2);
            if (hh == 0.0) break;
            const double step = g / hh;
            t -= step;
            if (std::abs(step) < 1e-15) break;
        }
        return t;
    }

private:
    void check_interior(const Vec2& y) const {
        if (winding_number(mesh_.nodes, y) == 0) throw std::domain_error("NeumannFunction: source point outside the domain");
    }

    Eigen::VectorXd density(const Vec2& y) const {
        check_interior(y);
        const auto l = static_cast<Eigen::Index>(mesh_.size());
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(l + 1);
        for (Eigen::Index i = 0; i < l; ++i) {
            const Vec2 r = mesh_.nodes[static_cast<std::size_t>(i)] - y;
            rhs(i) = -1.0 / perimeter_ + r.dot(mesh_.normals[static_cast<std::size_t>(i)]) / (kTwoPi * r.squaredNorm());
        }
        return lu_.solve(rhs).head(l);
    }

    // c(y) = -1/|dOmega| int (-Gamma(x - y) + S[mu_y](x)) ds(x)
    double mean_constant(const Vec2& y, const Eigen::VectorXd& mu) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < mesh_.size(); ++i) acc -= gamma(mesh_.nodes[i] - y) * mesh_.weights[i];
        acc += wvec_.dot(mu.cwiseProduct(s_one_));
        return -acc / perimeter_;
    }

    GradientTable assemble_table(const Eigen::MatrixXd& eval, std::span<const Vec2> targets,
                                 std::span<const Vec2> sources) const {
        const auto ns = static_cast<Eigen::Index>(sources.size());
        const auto nt = static_cast<Eigen::Index>(targets.size());
        const Eigen::MatrixXd dmu = density_gradients(sources);
        const Eigen::MatrixXd sdmu = eval * dmu;
        // grad c(y) = -1/|dOmega| ( int (x - y)/(2 pi |x - y|^2) ds(x) + int dmu S[1] ds )
        const Eigen::RowVectorXd cterm = (wvec_.cwiseProduct(s_one_)).transpose() * dmu;
        GradientTable g{Eigen::MatrixXd(nt, ns), Eigen::MatrixXd(nt, ns)};
        for (Eigen::Index s = 0; s < ns; ++s) {
            const Vec2& y = sources[static_cast<std::size_t>(s)];
            Vec2 flux = Vec2::Zero();
            for (std::size_t i = 0; i < mesh_.size(); ++i) {
                const Vec2 r = mesh_.nodes[i] - y;
                flux += r / (kTwoPi * r.squaredNorm()) * mesh_.weights[i];
            }
            const Vec2 gc = -(flux + Vec2(cterm(s), cterm(ns + s))) / perimeter_;
            for (Eigen::Index t = 0; t < nt; ++t) {
                const Vec2 r = targets[static_cast<std::size_t>(t)] - y;
                const Vec2 direct = r / (kTwoPi * r.squaredNorm());  // -grad_y Gamma(x - y)
                g.n1(t, s) = direct.x() + sdmu(t, s) + gc.x();
                g.n2(t, s) = direct.y() + sdmu(t, ns + s) + gc.y();
            }
        }
        return g;
    }

    BoundaryMesh mesh_;
    double perimeter_ = 0.0;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
    Eigen::VectorXd s_one_;
    Eigen::VectorXd wvec_;
};

// grad_y N(x, y) for a boundary point x.
inline Vec2 neumann_gradient(const NeumannFunction& nf, const Vec2& x, const Vec2& y) {
    return nf.gradient_on_boundary(nf.parameter_of(x), y);
}

}  // namespace jseit

#endif  // JSEIT_LAYERPOT_HPP
