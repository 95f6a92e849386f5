// Joint sparse recovery of the induced currents (M-SBL with pairwise shared
// variances), support extraction, internal potential estimation and T-SVD
// current re-estimation on a known support.

#ifndef JSEIT_JSR_HPP
#define JSEIT_JSR_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "jseit/forward.hpp"
#include "jseit/geometry.hpp"
#include "jseit/layerpot.hpp"
#include "jseit/sensing.hpp"

namespace jseit {

// ---------------------------------------------------------------------------
// M-SBL
// ---------------------------------------------------------------------------

struct MsblIteration {
    double lambda = 0.0;     // noise level used in this iteration
    std::size_t active = 0;  // unpruned variance pairs after the update
    Eigen::VectorXd gamma;   // n shared variances after pruning
};

struct MsblState {
    Eigen::MatrixXd X;      // 2n x M
    Eigen::VectorXd gamma;  // n, gamma_i = gamma_{i+n}
    double lambda = 0.0;
    int iterations = 0;
    std::vector<MsblIteration> trace;

    std::size_t active() const { return static_cast<std::size_t>((gamma.array() > 0.0).count()); }
};

inline constexpr double kMsblPruneRatio = 1e-3;

inline MsblState msbl(const Eigen::MatrixXd& a, const Eigen::MatrixXd& y, int iter_max) {
    if (iter_max < 1) throw std::invalid_argument("msbl: iter_max must be at least 1");
    if (a.rows() != y.rows()) throw std::invalid_argument("msbl: A and Y row counts differ");
    if (a.cols() % 2 != 0 || a.cols() == 0) throw std::invalid_argument("msbl: A must have 2n columns");
    const Eigen::Index m = a.rows();
    const Eigen::Index n = a.cols() / 2;
    const auto mm = static_cast<double>(y.cols());
    const double smax = sigma_max(a);
    const double floor = 1e-12 * smax * smax;

    MsblState st;
    st.gamma = Eigen::VectorXd::Ones(n);
    st.lambda = 0.01 * smax * smax;
    for (int it = 1; it <= iter_max; ++it) {
        Eigen::VectorXd g2(2 * n);
        g2 << st.gamma, st.gamma;
        // A G A' + lambda I = L L'; W = L^{-1} A gives A_i' Lambda A_i = |W_i|^2.
        Eigen::MatrixXd sigma_y = a * g2.asDiagonal() * a.transpose();
        sigma_y.diagonal().array() += st.lambda;
        const Eigen::LLT<Eigen::MatrixXd> llt(sigma_y);
        if (llt.info() != Eigen::Success) throw std::runtime_error("msbl: A Gamma A' + lambda I is not positive definite");
        const auto lower = llt.matrixL();
        const Eigen::MatrixXd w = lower.solve(a);
        const Eigen::MatrixXd ly = lower.solve(y);
        const double trace_lambda = lower.solve(Eigen::MatrixXd::Identity(m, m)).squaredNorm();
        st.X = g2.asDiagonal() * (w.transpose() * ly);

        const Eigen::VectorXd xrow = st.X.rowwise().squaredNorm();
        const Eigen::VectorXd wcol = w.colwise().squaredNorm().transpose();
        Eigen::VectorXd next(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (st.gamma[i] == 0.0) {
                next[i] = 0.0;
                continue;
            }
            next[i] = std::sqrt((xrow[i] + xrow[n + i]) / (mm * (wcol[i] + wcol[n + i])));
        }
        const double gmax = next.size() ? next.maxCoeff() : 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            if (!(gmax > 0.0) || next[i] / gmax < kMsblPruneRatio) next[i] = 0.0;

        const double resid = (y - a * st.X).squaredNorm();
        const double used_lambda = st.lambda;
        st.gamma = next;
        st.lambda = std::max(std::sqrt(resid / (mm * trace_lambda)), floor);
        st.iterations = it;
        st.trace.push_back({used_lambda, st.active(), st.gamma});
    }
    return st;
}

// ---------------------------------------------------------------------------
// Spectrum and support
// ---------------------------------------------------------------------------

// p_j = sqrt(sum_d sum_k (X_d)_{jk}^2)
inline Eigen::VectorXd current_spectrum(const Eigen::MatrixXd& x) {
    if (x.rows() % 2 != 0) throw std::invalid_argument("current_spectrum: X must have 2n rows");
    const Eigen::Index n = x.rows() / 2;
    return (x.topRows(n).rowwise().squaredNorm() + x.bottomRows(n).rowwise().squaredNorm()).cwiseSqrt();
}

struct SupportEstimate {
    std::vector<std::size_t> cells;  // ascending grid indices
    Eigen::VectorXd spectrum;
    double threshold = 1e-2;

    std::size_t size() const { return cells.size(); }
};

inline SupportEstimate extract_support(const Eigen::VectorXd& p, double eps = 1e-2) {
    if (!(eps >= 0.0)) throw std::invalid_argument("extract_support: threshold must be non-negative");
    const double pmax = p.size() ? p.maxCoeff() : 0.0;
    if (!(pmax > 0.0)) throw std::domain_error("extract_support: spectrum is identically zero");
    SupportEstimate s;
    s.spectrum = p;
    s.threshold = eps;
    for (Eigen::Index j = 0; j < p.size(); ++j)
        if (p[j] / pmax > eps) s.cells.push_back(static_cast<std::size_t>(j));
    return s;
}

// Columns of a [A1 A2] system restricted to the given cells, still paired.
inline Eigen::MatrixXd restrict_columns(const Eigen::MatrixXd& a, std::span<const std::size_t> cells) {
    const Eigen::Index n = a.cols() / 2;
    const auto k = static_cast<Eigen::Index>(cells.size());
    Eigen::MatrixXd r(a.rows(), 2 * k);
    for (Eigen::Index j = 0; j < k; ++j) {
        const auto c = static_cast<Eigen::Index>(cells[static_cast<std::size_t>(j)]);
        r.col(j) = a.col(c);
        r.col(k + j) = a.col(n + c);
    }
    return r;
}

// Rows of a 2n x M current matrix restricted to the given cells.
inline Eigen::MatrixXd restrict_rows(const Eigen::MatrixXd& x, std::span<const std::size_t> cells) {
    const Eigen::Index n = x.rows() / 2;
    const auto k = static_cast<Eigen::Index>(cells.size());
    Eigen::MatrixXd r(2 * k, x.cols());
    for (Eigen::Index j = 0; j < k; ++j) {
        const auto c = static_cast<Eigen::Index>(cells[static_cast<std::size_t>(j)]);
        r.row(j) = x.row(c);
        r.row(k + j) = x.row(n + c);
    }
    return r;
}

// ---------------------------------------------------------------------------
// T-SVD
// ---------------------------------------------------------------------------

// Least-squares solution of A X = Y keeping singular values >= ratio * s_max.
inline Eigen::MatrixXd tsvd_solve(const Eigen::MatrixXd& a, const Eigen::MatrixXd& y, double ratio = 1e-2) {
    if (!(ratio >= 0.0)) throw std::invalid_argument("tsvd_solve: truncation ratio must be non-negative");
    if (a.rows() != y.rows()) throw std::invalid_argument("tsvd_solve: A and Y row counts differ");
    const Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd s = svd.singularValues();
    const double cut = s.size() ? ratio * s[0] : 0.0;
    Eigen::Index kept = 0;
    while (kept < s.size() && s[kept] > 0.0 && s[kept] >= cut) ++kept;
    if (kept == 0) throw std::domain_error("tsvd_solve: every singular value was truncated");
    const Eigen::MatrixXd uy = svd.matrixU().leftCols(kept).transpose() * y;
    return svd.matrixV().leftCols(kept) * (s.head(kept).cwiseInverse().asDiagonal() * uy);
}

// Currents on the support from (-1/2 I + K)[u - U] = int_D grad Gamma . I,
// solved with T-SVD. `a` is the full [A1 A2] system (any column scaling, the
// result refers to the same scaling).
inline Eigen::MatrixXd tsvd_currents(const Eigen::MatrixXd& a, const Eigen::MatrixXd& y,
                                     std::span<const std::size_t> cells, double ratio = 1e-2) {
    if (cells.empty()) throw std::invalid_argument("tsvd_currents: empty support");
    return tsvd_solve(restrict_columns(a, cells), y, ratio);
}

// ---------------------------------------------------------------------------
// Internal potential
// ---------------------------------------------------------------------------

// Affine model of the internal-potential gradient on the support for
// cellwise-constant currents: grad u_hat_k = g0_k + T I_k, where I_k and the
// gradient are stacked as [first components; second components].
struct GradientModel {
    Eigen::MatrixXd T;   // 2|cells| x 2|cells|
    Eigen::MatrixXd g0;  // 2|cells| x M

    bool empty() const { return T.size() == 0; }

    std::vector<Eigen::MatrixXd> gradients(const Eigen::MatrixXd& currents) const {
        if (currents.rows() != T.cols() || currents.cols() != g0.cols())
            throw std::invalid_argument("GradientModel: current matrix has the wrong shape");
        return unstack(g0 + T * currents);
    }

    // Gradients consistent with the contrast x = sigma - 1 on the support:
    // I = -x grad u, hence (Id + T diag(x, x)) grad u = g0.
    std::vector<Eigen::MatrixXd> consistent_gradients(const Eigen::VectorXd& contrast) const {
        const Eigen::Index ns = T.rows() / 2;
        if (contrast.size() != ns) throw std::invalid_argument("GradientModel: contrast length mismatch");
        Eigen::VectorXd xx(2 * ns);
        xx << contrast, contrast;
        Eigen::MatrixXd m = T * xx.asDiagonal();
        m.diagonal().array() += 1.0;
        const Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
        return unstack(lu.solve(g0));
    }

private:
    std::vector<Eigen::MatrixXd> unstack(const Eigen::MatrixXd& g) const {
        const Eigen::Index ns = g.rows() / 2;
        std::vector<Eigen::MatrixXd> out;
        for (Eigen::Index k = 0; k < g.cols(); ++k) {
            Eigen::MatrixXd gk(ns, 2);
            gk.col(0) = g.col(k).head(ns);
            gk.col(1) = g.col(k).tail(ns);
            out.push_back(std::move(gk));
        }
        return out;
    }
};

struct InternalPotential {
    std::vector<std::size_t> cells;       // support cells (grid indices)
    std::vector<int> excitations;
    Eigen::MatrixXd value;                // |cells| x M
    std::vector<Eigen::MatrixXd> gradient;  // per excitation, |cells| x 2
    GradientModel model;                  // set by the analytic gradient rule
};

// Support cells plus their lattice neighbours, with index maps.
struct Neighbourhood {
    std::vector<std::size_t> cells;  // grid indices: support first, then neighbours
    std::map<std::size_t, std::size_t> local;
};

inline Neighbourhood support_neighbourhood(const Grid& grid, std::span<const std::size_t> support) {
    Neighbourhood nb;
    auto add = [&](std::size_t c) {
        if (nb.local.count(c)) return;
        nb.local[c] = nb.cells.size();
        nb.cells.push_back(c);
    };
    for (std::size_t c : support) {
        if (c >= grid.size()) throw std::invalid_argument("support index outside the grid");
        add(c);
    }
    for (std::size_t c : support) {
        const auto [i, j] = grid.lattice[c];
        for (const auto& d : {std::pair{1, 0}, std::pair{-1, 0}, std::pair{0, 1}, std::pair{0, -1}}) {
            const long k = grid.find(i + d.first, j + d.second);
            if (k >= 0) add(static_cast<std::size_t>(k));
        }
    }
    return nb;
}

enum class GradientRule {
    analytic,          // differentiate every term, exact self-cell contribution
    finite_difference  // differences of u_hat over the lattice
};

struct PotentialOptions {
    std::size_t boundary_nodes = 2000;  // mesh for the double layer of the interpolated trace
    GradientRule gradient = GradientRule::analytic;
    int near_subdivisions = 8;          // sub-cells per side for cells closer than near_cells * h
    double near_cells = 3.0;
    double regular_step = 1e-4;         // difference step for the smooth part of the Neumann kernel
};

namespace detail {

// Cell average of the Jacobian of r . I / (2 pi |r|^2) with r = x - y over y in
// the square cell of side h centred at c, as the symmetric tensor (t11, t12, t22).
inline Eigen::Vector3d volume_jacobian(const Vec2& x, const Vec2& c, double h, int sub) {
    auto tensor = [](const Vec2& r) {
        const double r2 = r.squaredNorm();
        const double r4 = r2 * r2;
        return Eigen::Vector3d((1.0 / r2 - 2.0 * r.x() * r.x() / r4) / kTwoPi, -2.0 * r.x() * r.y() / r4 / kTwoPi,
                               (1.0 / r2 - 2.0 * r.y() * r.y() / r4) / kTwoPi);
    };
    if (sub <= 1) return tensor(x - c);
    Eigen::Vector3d acc = Eigen::Vector3d::Zero();
    const double d = h / sub;
    for (int a = 0; a < sub; ++a)
        for (int b = 0; b < sub; ++b) {
            const Vec2 y(c.x() - 0.5 * h + (a + 0.5) * d, c.y() - 0.5 * h + (b + 0.5) * d);
            acc += tensor(x - y);
        }
    return acc / (sub * sub);
}

}  // namespace detail

// u_hat at the support cells and its gradient. Full-boundary data:
//   u_hat = U + D[(u - U)|dOmega] - sum_{j != self} grad_y Gamma(x - y_j) . I_j area;
// partial data (neumann != nullptr):
//   u_hat = U + sum_{j != self} grad_y N(x, y_j) . I_j area.
// `currents` is 2|support| x M in support order; `traces` holds (u - U) at the
// measurement points (unused for partial data).
//
// The analytic gradient treats I as constant on each cell: the self cell adds
// I/2, nearby cells are integrated on sub-cells, and the smooth part of the
// Neumann kernel is differenced with a small step. The finite-difference rule
// evaluates u_hat on the lattice neighbourhood and differences it, preferring
// neighbours inside the support.
inline InternalPotential estimate_internal_potential(const Grid& grid, std::span<const std::size_t> support,
                                                     const Eigen::MatrixXd& currents, const BoundaryMesh& domain,
                                                     const BoundaryMesh& points, const Eigen::MatrixXd& traces,
                                                     const std::vector<int>& excitations,
                                                     const NeumannFunction* neumann = nullptr,
                                                     PotentialOptions opt = {}) {
    if (support.empty()) throw std::invalid_argument("estimate_internal_potential: empty support");
    const auto ns = static_cast<Eigen::Index>(support.size());
    const auto mexc = static_cast<Eigen::Index>(excitations.size());
    if (currents.rows() != 2 * ns || currents.cols() != mexc)
        throw std::invalid_argument("estimate_internal_potential: current matrix has the wrong shape");
    if (neumann == nullptr && (traces.rows() != static_cast<Eigen::Index>(points.size()) || traces.cols() != mexc))
        throw std::invalid_argument("estimate_internal_potential: trace matrix has the wrong shape");
    const bool fd = opt.gradient == GradientRule::finite_difference;

    Neighbourhood nb;
    if (fd) {
        nb = support_neighbourhood(grid, support);
    } else {
        for (std::size_t c : support) {
            if (c >= grid.size()) throw std::invalid_argument("support index outside the grid");
            nb.local[c] = nb.cells.size();
            nb.cells.push_back(c);
        }
    }
    std::vector<Vec2> targets;
    for (std::size_t c : nb.cells) targets.push_back(grid.centers[c]);
    std::vector<Vec2> sources;
    for (std::size_t c : support) sources.push_back(grid.centers[c]);
    const auto nt = static_cast<Eigen::Index>(targets.size());

    // grad_y K(x_t, y_j) per component, self-cell removed.
    Eigen::MatrixXd kx(nt, ns), ky(nt, ns);
    if (neumann == nullptr) {
        for (Eigen::Index t = 0; t < nt; ++t)
            for (Eigen::Index j = 0; j < ns; ++j) {
                if (t == j) {
                    kx(t, j) = ky(t, j) = 0.0;
                    continue;
                }
                const Vec2 g = -grad_gamma(targets[static_cast<std::size_t>(t)] - sources[static_cast<std::size_t>(j)]);
                kx(t, j) = g.x();
                ky(t, j) = g.y();
            }
    } else {
        for (const auto& x : targets)
            if (winding_number(neumann->mesh().nodes, x) == 0)
                throw std::domain_error("estimate_internal_potential: support touches the domain boundary");
        const NeumannFunction::GradientTable tab = neumann->gradient_table_interior(targets, sources);
        kx = tab.n1;
        ky = tab.n2;
        for (Eigen::Index j = 0; j < ns; ++j) kx(j, j) = ky(j, j) = 0.0;  // singular self entries
    }

    Eigen::MatrixXd dlp, dlp_dx, dlp_dy;
    if (neumann == nullptr) {
        if (!points.periodic) throw std::invalid_argument("estimate_internal_potential: full-boundary data required");
        const BoundaryMesh fine = make_boundary(domain.curve, opt.boundary_nodes);
        Eigen::MatrixXd fine_traces(static_cast<Eigen::Index>(fine.size()), mexc);
        for (Eigen::Index k = 0; k < mexc; ++k) {
            const TrigInterpolant interp(points.params.front(), traces.col(k));
            for (std::size_t i = 0; i < fine.size(); ++i)
                fine_traces(static_cast<Eigen::Index>(i), k) = interp(fine.params[i]);
        }
        dlp = double_layer_matrix(fine, targets) * fine_traces;
        if (!fd) {
            // x-derivatives of the double layer kernel (y - x) . nu / (2 pi |y - x|^2)
            Eigen::MatrixXd gx(ns, static_cast<Eigen::Index>(fine.size())), gy(ns, static_cast<Eigen::Index>(fine.size()));
            for (Eigen::Index t = 0; t < ns; ++t)
                for (std::size_t j = 0; j < fine.size(); ++j) {
                    const Vec2 d = fine.nodes[j] - targets[static_cast<std::size_t>(t)];
                    const Vec2& nu = fine.normals[j];
                    const double d2 = d.squaredNorm();
                    const Vec2 g = (-nu / d2 + 2.0 * d.dot(nu) * d / (d2 * d2)) * (fine.weights[j] / kTwoPi);
                    gx(t, static_cast<Eigen::Index>(j)) = g.x();
                    gy(t, static_cast<Eigen::Index>(j)) = g.y();
                }
            dlp_dx = gx * fine_traces;
            dlp_dy = gy * fine_traces;
        }
    }

    // Gradient model: singular volume kernel (self cell I/2, nearby cells on
    // sub-cells) plus the smooth part of the Neumann kernel.
    GradientModel model;
    if (!fd) {
        model.T = Eigen::MatrixXd::Zero(2 * ns, 2 * ns);
        const double near = opt.near_cells * grid.h;
        for (Eigen::Index t = 0; t < ns; ++t) {
            model.T(t, t) = model.T(ns + t, ns + t) = 0.5;
            for (Eigen::Index j = 0; j < ns; ++j) {
                if (t == j) continue;
                const Vec2& x = targets[static_cast<std::size_t>(t)];
                const Vec2& c = sources[static_cast<std::size_t>(j)];
                const int sub = (x - c).norm() < near ? opt.near_subdivisions : 1;
                const Eigen::Vector3d jac = grid.area * detail::volume_jacobian(x, c, grid.h, sub);
                model.T(t, j) += jac[0];
                model.T(t, ns + j) += jac[1];
                model.T(ns + t, j) += jac[1];
                model.T(ns + t, ns + j) += jac[2];
            }
        }
        if (neumann != nullptr) {
            const double st = opt.regular_step;
            auto smooth = [&](const Vec2& shift) {
                std::vector<Vec2> xs;
                for (Eigen::Index t = 0; t < ns; ++t) xs.push_back(targets[static_cast<std::size_t>(t)] + shift);
                NeumannFunction::GradientTable tab = neumann->gradient_table_interior(xs, sources);
                for (Eigen::Index t = 0; t < ns; ++t)
                    for (Eigen::Index j = 0; j < ns; ++j) {
                        const Vec2 g = grad_gamma(xs[static_cast<std::size_t>(t)] - sources[static_cast<std::size_t>(j)]);
                        tab.n1(t, j) -= g.x();
                        tab.n2(t, j) -= g.y();
                    }
                return tab;
            };
            const auto px = smooth({st, 0.0}), mx = smooth({-st, 0.0});
            const auto py = smooth({0.0, st}), my = smooth({0.0, -st});
            const double f = grid.area / (2.0 * st);
            model.T.topLeftCorner(ns, ns) += f * (px.n1 - mx.n1);
            model.T.topRightCorner(ns, ns) += f * (px.n2 - mx.n2);
            model.T.bottomLeftCorner(ns, ns) += f * (py.n1 - my.n1);
            model.T.bottomRightCorner(ns, ns) += f * (py.n2 - my.n2);
        }
        model.g0.resize(2 * ns, mexc);
        for (Eigen::Index k = 0; k < mexc; ++k) {
            const int exc = excitations[static_cast<std::size_t>(k)];
            for (Eigen::Index t = 0; t < ns; ++t) {
                Vec2 g = background_gradient(exc, targets[static_cast<std::size_t>(t)]);
                if (neumann == nullptr) g += Vec2(dlp_dx(t, k), dlp_dy(t, k));
                model.g0(t, k) = g.x();
                model.g0(ns + t, k) = g.y();
            }
        }
    }

    InternalPotential ip;
    ip.cells.assign(support.begin(), support.end());
    ip.excitations = excitations;
    ip.value.resize(ns, mexc);
    for (Eigen::Index k = 0; k < mexc; ++k) {
        const int exc = excitations[static_cast<std::size_t>(k)];
        const double hmean = background_mean(exc, domain);
        const auto i1 = currents.col(k).head(ns);
        const auto i2 = currents.col(k).tail(ns);
        Eigen::VectorXd u(nt);
        for (Eigen::Index t = 0; t < nt; ++t)
            u[t] = background_potential(exc, targets[static_cast<std::size_t>(t)]) - hmean;
        const Eigen::VectorXd vol = grid.area * (kx * i1 + ky * i2);
        if (neumann == nullptr) u += dlp.col(k) - vol;
        else u += vol;
        ip.value.col(k) = u.head(ns);

        if (!fd) continue;
        Eigen::MatrixXd grad(ns, 2);
        for (Eigen::Index s = 0; s < ns; ++s) {
            const auto [ci, cj] = grid.lattice[support[static_cast<std::size_t>(s)]];
            for (int axis = 0; axis < 2; ++axis) {
                auto value_at = [&](int di, int dj, bool support_only) -> std::optional<double> {
                    const long g = grid.find(ci + di, cj + dj);
                    if (g < 0) return std::nullopt;
                    auto it = nb.local.find(static_cast<std::size_t>(g));
                    if (it == nb.local.end()) return std::nullopt;
                    if (support_only && it->second >= static_cast<std::size_t>(ns)) return std::nullopt;
                    return u[static_cast<Eigen::Index>(it->second)];
                };
                const int di = axis == 0 ? 1 : 0, dj = axis == 1 ? 1 : 0;
                const double u0 = u[s];
                // Prefer neighbours inside the support; the potential is continuous
                // but its gradient jumps across the anomaly boundary.
                std::optional<double> up = value_at(di, dj, true), dn = value_at(-di, -dj, true);
                double d;
                if (up && dn) d = (*up - *dn) / (2.0 * grid.h);
                else if (up) d = (*up - u0) / grid.h;
                else if (dn) d = (u0 - *dn) / grid.h;
                else {
                    up = value_at(di, dj, false);
                    dn = value_at(-di, -dj, false);
                    if (up && dn) d = (*up - *dn) / (2.0 * grid.h);
                    else if (up) d = (*up - u0) / grid.h;
                    else if (dn) d = (u0 - *dn) / grid.h;
                    else throw std::domain_error("estimate_internal_potential: isolated cell without neighbours");
                }
                grad(s, axis) = d;
            }
        }
        ip.gradient.push_back(std::move(grad));
    }
    if (!fd) {
        ip.gradient = model.gradients(currents);
        ip.model = std::move(model);
    }
    return ip;
}

}  // namespace jseit

#endif  // JSEIT_JSR_HPP
