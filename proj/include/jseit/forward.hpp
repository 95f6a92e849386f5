// Forward transmission solver and synthetic boundary measurements.
//
// The potential for excitation k is represented as
//
//   u = H_k + S_dOmega[psi] + sum_p S_dD_p[phi_p] + C,
//
// with one single-layer density per curve. The densities satisfy the Neumann
// condition du/dnu = dH_k/dnu on dOmega and flux continuity
// du/dnu|_+ = sigma_p du/dnu|_- across each dD_p; C fixes the zero boundary
// mean. The dOmega block has the equilibrium density in its kernel, so the
// system is bordered with int psi = 0 and one extra unknown.

#ifndef JSEIT_FORWARD_HPP
#define JSEIT_FORWARD_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/IterativeSolvers>

#include "jseit/geometry.hpp"
#include "jseit/layerpot.hpp"

namespace jseit {

// ---------------------------------------------------------------------------
// Excitations: g_k = grad H_k . nu with H in {x1, x2, x1^2 - x2^2, x1 x2}
// ---------------------------------------------------------------------------

inline void check_excitation(int k) {
    if (k < 1 || k > 4) throw std::invalid_argument("excitation index must be in 1..4");
}

inline double background_potential(int k, const Vec2& x) {
    check_excitation(k);
    switch (k) {
        case 1: return x.x();
        case 2: return x.y();
        case 3: return x.x() * x.x() - x.y() * x.y();
        default: return x.x() * x.y();
    }
}

inline Vec2 background_gradient(int k, const Vec2& x) {
    check_excitation(k);
    switch (k) {
        case 1: return {1.0, 0.0};
        case 2: return {0.0, 1.0};
        case 3: return {2.0 * x.x(), -2.0 * x.y()};
        default: return {x.y(), x.x()};
    }
}

inline Eigen::VectorXd boundary_current(int k, const BoundaryMesh& mesh) {
    Eigen::VectorXd g(static_cast<Eigen::Index>(mesh.size()));
    for (std::size_t i = 0; i < mesh.size(); ++i)
        g[static_cast<Eigen::Index>(i)] = background_gradient(k, mesh.nodes[i]).dot(mesh.normals[i]);
    return g;
}

// Boundary mean of H_k; the normalised background potential is U_k = H_k - mean.
inline double background_mean(int k, const BoundaryMesh& mesh) {
    double acc = 0.0;
    for (std::size_t i = 0; i < mesh.size(); ++i) acc += background_potential(k, mesh.nodes[i]) * mesh.weights[i];
    return acc / mesh.perimeter();
}

// ---------------------------------------------------------------------------
// Transmission solver
// ---------------------------------------------------------------------------

struct TransmissionOptions {
    std::size_t anomaly_nodes = 2000;
    // Systems up to this size use a dense LU; larger ones restarted GMRES.
    Eigen::Index direct_limit = 4200;
    double gmres_tolerance = 1e-14;
};

struct SolveDiagnostics {
    bool direct = true;
    double rcond = std::numeric_limits<double>::quiet_NaN();  // LU reciprocal condition estimate
    Eigen::Index iterations = 0;
    double relative_residual = 0.0;
};

class TransmissionSolver;

// Densities for one excitation plus evaluators for the resulting potential.
class TransmissionField {
public:
    int excitation() const { return k_; }

    // (u_k - U_k) at boundary parameters of the domain curve.
    Eigen::VectorXd perturbation_on_boundary(std::span<const double> params) const;

    // u_k at the domain mesh nodes.
    Eigen::VectorXd trace_at_nodes() const;

    // u_k and grad u_k at interior points away from every curve.
    double potential(const Vec2& x) const;
    Vec2 gradient(const Vec2& x) const;

    const SolveDiagnostics& diagnostics() const { return diag_; }

private:
    friend class TransmissionSolver;
    // Shared, immutable geometry so a field stays valid after its solver is gone.
    std::shared_ptr<const BoundaryMesh> domain_;
    std::shared_ptr<const std::vector<BoundaryMesh>> curves_;
    int k_ = 1;
    Eigen::VectorXd psi_;
    std::vector<Eigen::VectorXd> phi_;
    double layer_mean_ = 0.0;  // boundary mean of the layer potentials
    SolveDiagnostics diag_;
};

class TransmissionSolver {
public:
    TransmissionSolver(BoundaryMesh domain, std::vector<Anomaly> anomalies, TransmissionOptions opt = {})
        : anomalies_(std::move(anomalies)), opt_(opt) {
        if (!domain.periodic || domain.size() % 2 != 0)
            throw std::invalid_argument("TransmissionSolver: domain mesh must be periodic with an even node count");
        std::vector<BoundaryMesh> curves;
        for (const auto& an : anomalies_) {
            if (!(an.sigma > 0.0)) throw std::invalid_argument("TransmissionSolver: conductivity must be positive");
            curves.push_back(make_boundary(an.shape.curve(), opt_.anomaly_nodes));
        }
        domain_ = std::make_shared<const BoundaryMesh>(std::move(domain));
        curves_ = std::make_shared<const std::vector<BoundaryMesh>>(std::move(curves));
        offsets_.push_back(static_cast<Eigen::Index>(domain_->size()));
        for (const auto& c : *curves_) offsets_.push_back(offsets_.back() + static_cast<Eigen::Index>(c.size()));
        assemble();
        perimeter_ = domain_->perimeter();
        s_one_ = single_layer_on_nodes(*domain_) * Eigen::VectorXd::Ones(static_cast<Eigen::Index>(domain_->size()));
        // int_dOmega S_p[phi](x) ds(x) = sum_j phi_j w_j int_dOmega Gamma(x - y_j) ds(x)
        for (const auto& c : *curves_) {
            Eigen::VectorXd v(static_cast<Eigen::Index>(c.size()));
            for (std::size_t j = 0; j < c.size(); ++j) {
                double acc = 0.0;
                for (std::size_t i = 0; i < domain_->size(); ++i)
                    acc += gamma(domain_->nodes[i] - c.nodes[j]) * domain_->weights[i];
                v[static_cast<Eigen::Index>(j)] = acc * c.weights[j];
            }
            anomaly_means_.push_back(std::move(v));
        }
    }

    const BoundaryMesh& domain() const { return *domain_; }
    const std::vector<Anomaly>& anomalies() const { return anomalies_; }
    const std::vector<BoundaryMesh>& anomaly_meshes() const { return *curves_; }
    Eigen::Index unknowns() const { return system_.rows(); }

    TransmissionField solve(int k) const {
        check_excitation(k);
        const Eigen::Index n = system_.rows();
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
        for (std::size_t p = 0; p < curves_->size(); ++p) {
            const BoundaryMesh& c = (*curves_)[p];
            const double s = anomalies_[p].sigma;
            for (std::size_t i = 0; i < c.size(); ++i)
                rhs[offsets_[p] + static_cast<Eigen::Index>(i)] =
                    -(1.0 - s) * background_gradient(k, c.nodes[i]).dot(c.normals[i]);
        }
        TransmissionField f;
        f.domain_ = domain_;
        f.curves_ = curves_;
        f.k_ = k;
        Eigen::VectorXd sol;
        if (n <= opt_.direct_limit) {
            sol = lu_.solve(rhs);
            f.diag_.direct = true;
            f.diag_.rcond = lu_.rcond();
        } else {
            Eigen::GMRES<Eigen::MatrixXd, Eigen::IdentityPreconditioner> gmres;
            gmres.setTolerance(opt_.gmres_tolerance);
            gmres.set_restart(200);
            gmres.setMaxIterations(2000);
            gmres.compute(system_);
            sol = gmres.solve(rhs);
            f.diag_.direct = false;
            f.diag_.iterations = gmres.iterations();
            if (gmres.info() != Eigen::Success) throw std::runtime_error("TransmissionSolver: GMRES did not converge");
        }
        const double rn = rhs.norm();
        f.diag_.relative_residual = rn > 0.0 ? (system_ * sol - rhs).norm() / rn : (system_ * sol).norm();
        const auto l0 = static_cast<Eigen::Index>(domain_->size());
        f.psi_ = sol.head(l0);
        for (std::size_t p = 0; p < curves_->size(); ++p)
            f.phi_.push_back(sol.segment(offsets_[p], static_cast<Eigen::Index>((*curves_)[p].size())));
        double mean = 0.0;
        for (Eigen::Index j = 0; j < l0; ++j) mean += f.psi_[j] * s_one_[j] * domain_->weights[static_cast<std::size_t>(j)];
        for (std::size_t p = 0; p < curves_->size(); ++p) mean += anomaly_means_[p].dot(f.phi_[p]);
        f.layer_mean_ = mean / perimeter_;
        return f;
    }

private:

    // Normal derivative at x (normal nu) of the single layer of `src`, per node.
    static void add_flux_row(Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> row, const Vec2& x, const Vec2& nu,
                             const BoundaryMesh& src, double scale) {
        for (std::size_t j = 0; j < src.size(); ++j) {
            const Vec2 d = x - src.nodes[j];
            row[static_cast<Eigen::Index>(j)] += scale * d.dot(nu) / (kTwoPi * d.squaredNorm()) * src.weights[j];
        }
    }

    void assemble() {
        const Eigen::Index n = offsets_.back() + 1;
        const auto l0 = static_cast<Eigen::Index>(domain_->size());
        system_ = Eigen::MatrixXd::Zero(n, n);
        // dOmega rows: (-1/2 + K*) psi + sum_p dnu S_p phi_p + c = 0
        system_.topLeftCorner(l0, l0) = np_adjoint_operator(*domain_).matrix;
        system_.topLeftCorner(l0, l0).diagonal().array() -= 0.5;
        for (Eigen::Index i = 0; i < l0; ++i) {
            const auto ii = static_cast<std::size_t>(i);
            for (std::size_t p = 0; p < curves_->size(); ++p) {
                auto row = system_.row(i).segment(offsets_[p], static_cast<Eigen::Index>((*curves_)[p].size()));
                add_flux_row(row, domain_->nodes[ii], domain_->normals[ii], (*curves_)[p], 1.0);
            }
            system_(i, n - 1) = 1.0;
        }
        // dD_p rows: ((1+s)/2) phi_p + (1-s) (K*_p phi_p + dnu of every other layer) = -(1-s) dH/dnu
        for (std::size_t p = 0; p < curves_->size(); ++p) {
            const BoundaryMesh& c = (*curves_)[p];
            const double s = anomalies_[p].sigma;
            const auto lp = static_cast<Eigen::Index>(c.size());
            const Eigen::Index off = offsets_[p];
            system_.block(off, off, lp, lp) = (1.0 - s) * np_adjoint_operator(c).matrix;
            system_.block(off, off, lp, lp).diagonal().array() += 0.5 * (1.0 + s);
            for (Eigen::Index i = 0; i < lp; ++i) {
                const auto ii = static_cast<std::size_t>(i);
                auto r0 = system_.row(off + i).segment(0, l0);
                add_flux_row(r0, c.nodes[ii], c.normals[ii], *domain_, 1.0 - s);
                for (std::size_t q = 0; q < curves_->size(); ++q) {
                    if (q == p) continue;
                    auto rq = system_.row(off + i).segment(offsets_[q], static_cast<Eigen::Index>((*curves_)[q].size()));
                    add_flux_row(rq, c.nodes[ii], c.normals[ii], (*curves_)[q], 1.0 - s);
                }
            }
        }
        for (Eigen::Index j = 0; j < l0; ++j) system_(n - 1, j) = domain_->weights[static_cast<std::size_t>(j)];
        if (n <= opt_.direct_limit) {
            lu_.compute(system_);
            if (!(lu_.rcond() > 1e-14)) throw std::runtime_error("TransmissionSolver: ill-conditioned system");
        }
    }

    std::shared_ptr<const BoundaryMesh> domain_;
    std::vector<Anomaly> anomalies_;
    TransmissionOptions opt_;
    std::shared_ptr<const std::vector<BoundaryMesh>> curves_;
    std::vector<Eigen::Index> offsets_;  // start of each anomaly block, then the border index
    Eigen::MatrixXd system_;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
    double perimeter_ = 0.0;
    Eigen::VectorXd s_one_;
    std::vector<Eigen::VectorXd> anomaly_means_;
};

inline Eigen::VectorXd TransmissionField::perturbation_on_boundary(std::span<const double> params) const {
    Eigen::VectorXd w = single_layer_on_curve(*domain_, params) * psi_;
    std::vector<Vec2> pts;
    pts.reserve(params.size());
    for (double t : params) pts.push_back(curve_point(domain_->curve, t));
    for (std::size_t p = 0; p < curves_->size(); ++p) w += single_layer_matrix((*curves_)[p], pts) * phi_[p];
    return w.array() - layer_mean_;
}

inline Eigen::VectorXd TransmissionField::trace_at_nodes() const {
    const BoundaryMesh& d = *domain_;
    Eigen::VectorXd u = perturbation_on_boundary(d.params);
    const double hm = background_mean(k_, d);
    for (std::size_t i = 0; i < d.size(); ++i) u[static_cast<Eigen::Index>(i)] += background_potential(k_, d.nodes[i]) - hm;
    return u;
}

inline double TransmissionField::potential(const Vec2& x) const {
    const Vec2 pts[1] = {x};
    double v = background_potential(k_, x) - background_mean(k_, *domain_) - layer_mean_;
    v += (single_layer_matrix(*domain_, pts) * psi_)(0);
    for (std::size_t p = 0; p < curves_->size(); ++p) v += (single_layer_matrix((*curves_)[p], pts) * phi_[p])(0);
    return v;
}

inline Vec2 TransmissionField::gradient(const Vec2& x) const {
    Vec2 g = background_gradient(k_, x);
    auto add = [&](const BoundaryMesh& m, const Eigen::VectorXd& dens) {
        for (std::size_t j = 0; j < m.size(); ++j) {
            const Vec2 d = x - m.nodes[j];
            g += d / (kTwoPi * d.squaredNorm()) * dens[static_cast<Eigen::Index>(j)] * m.weights[j];
        }
    };
    add(*domain_, psi_);
    for (std::size_t p = 0; p < curves_->size(); ++p) add((*curves_)[p], phi_[p]);
    return g;
}

// u_k at the domain mesh nodes for one excitation.
inline Eigen::VectorXd solve_transmission(const BoundaryMesh& domain, const std::vector<Anomaly>& anomalies, int k,
                                          TransmissionOptions opt = {}) {
    const TransmissionSolver solver(domain, anomalies, opt);
    return solver.solve(k).trace_at_nodes();
}

// ---------------------------------------------------------------------------
// Measurements
// ---------------------------------------------------------------------------

struct MeasurementSet {
    Geometry geometry = Geometry::m100;
    double snr_db = std::numeric_limits<double>::infinity();
    std::uint64_t seed = 0;
    BoundaryMesh points;
    std::vector<int> excitations;
    Eigen::MatrixXd clean;  // (u_k - U_k) at the points, one column per excitation
    Eigen::MatrixXd data;   // clean plus noise

    Eigen::Index m() const { return data.rows(); }
    Eigen::Index count() const { return data.cols(); }
};

// i.i.d. Gaussian noise rescaled so that 20 log10(|signal| / |noise|) equals
// snr_db exactly for every excitation column. Each column draws from its own
// stream seeded by (seed, k).
inline Eigen::MatrixXd add_noise(const Eigen::MatrixXd& clean, const std::vector<int>& excitations, double snr_db,
                                 std::uint64_t seed) {
    Eigen::MatrixXd out = clean;
    if (std::isinf(snr_db) && snr_db > 0.0) return out;
    for (Eigen::Index c = 0; c < clean.cols(); ++c) {
        const double signal = clean.col(c).norm();
        if (signal == 0.0) continue;
        std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(excitations[static_cast<std::size_t>(c)])};
        std::mt19937_64 rng(seq);
        std::normal_distribution<double> nd(0.0, 1.0);
        Eigen::VectorXd e(clean.rows());
        for (Eigen::Index i = 0; i < clean.rows(); ++i) e[i] = nd(rng);
        const double target = signal / std::pow(10.0, snr_db / 20.0);
        out.col(c) += e * (target / e.norm());
    }
    return out;
}

inline MeasurementSet measure(const std::vector<TransmissionField>& fields, const BoundaryMesh& points,
                              Geometry geometry, double snr_db, std::uint64_t seed) {
    MeasurementSet ms;
    ms.geometry = geometry;
    ms.snr_db = snr_db;
    ms.seed = seed;
    ms.points = points;
    ms.clean.resize(static_cast<Eigen::Index>(points.size()), static_cast<Eigen::Index>(fields.size()));
    for (std::size_t c = 0; c < fields.size(); ++c) {
        ms.excitations.push_back(fields[c].excitation());
        ms.clean.col(static_cast<Eigen::Index>(c)) = fields[c].perturbation_on_boundary(points.params);
    }
    ms.data = add_noise(ms.clean, ms.excitations, snr_db, seed);
    return ms;
}

// Realised SNR in dB of one excitation column.
inline double realized_snr(const MeasurementSet& ms, Eigen::Index c) {
    return 20.0 * std::log10(ms.clean.col(c).norm() / (ms.data.col(c) - ms.clean.col(c)).norm());
}

}  // namespace jseit

#endif  // JSEIT_FORWARD_HPP
