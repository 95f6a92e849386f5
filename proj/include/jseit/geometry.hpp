// Boundary meshes, anomaly shapes, reconstruction grids and measurement
// layouts for two-dimensional EIT on an elliptic background domain.

#ifndef JSEIT_GEOMETRY_HPP
#define JSEIT_GEOMETRY_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace jseit {

using Vec2 = Eigen::Vector2d;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// ---------------------------------------------------------------------------
// Parametrized closed curves. Every curve is traversed counterclockwise for
// t in [0, 2*pi) and is at least C^2, so normals and curvature are analytic.
// ---------------------------------------------------------------------------

struct EllipseCurve {
    Vec2 center = Vec2::Zero();
    double a = 1.0;
    double b = 1.0;

    Vec2 point(double t) const { return center + Vec2(a * std::cos(t), b * std::sin(t)); }
    Vec2 d1(double t) const { return {-a * std::sin(t), b * std::cos(t)}; }
    Vec2 d2(double t) const { return {-a * std::cos(t), -b * std::sin(t)}; }
};

// x(t) = center + scale * (cos t + 0.65 cos 2t - 0.65, 1.5 sin t)
struct KiteCurve {
    Vec2 center = Vec2::Zero();
    double scale = 1.0;

    Vec2 point(double t) const {
        return center + scale * Vec2(std::cos(t) + 0.65 * std::cos(2.0 * t) - 0.65, 1.5 * std::sin(t));
    }
    Vec2 d1(double t) const {
        return scale * Vec2(-std::sin(t) - 1.3 * std::sin(2.0 * t), 1.5 * std::cos(t));
    }
    Vec2 d2(double t) const {
        return scale * Vec2(-std::cos(t) - 2.6 * std::cos(2.0 * t), -1.5 * std::sin(t));
    }
};

using Curve = std::variant<EllipseCurve, KiteCurve>;

inline Vec2 curve_point(const Curve& c, double t) {
    return std::visit([t](const auto& cc) { return cc.point(t); }, c);
}
inline Vec2 curve_d1(const Curve& c, double t) {
    return std::visit([t](const auto& cc) { return cc.d1(t); }, c);
}
inline Vec2 curve_d2(const Curve& c, double t) {
    return std::visit([t](const auto& cc) { return cc.d2(t); }, c);
}

// ---------------------------------------------------------------------------
// BoundaryMesh
// ---------------------------------------------------------------------------

// Nodes sampled from a parametrized curve. For closed uniform meshes
// (`periodic == true`) the weights are the trapezoidal arc-length weights
// |x'(t_i)| * dt, which integrate smooth periodic functions spectrally.
struct BoundaryMesh {
    Curve curve;
    std::vector<double> params;
    std::vector<Vec2> nodes;
    std::vector<Vec2> normals;    // unit outward
    std::vector<double> weights;  // arc-length quadrature weights
    std::vector<double> curvature;
    std::vector<double> speed;    // |x'(t)|
    double param_step = 0.0;
    bool periodic = false;

    std::size_t size() const { return nodes.size(); }

    double perimeter() const {
        double s = 0.0;
        for (double w : weights) s += w;
        return s;
    }

    // Largest distance between consecutive nodes.
    double max_spacing() const {
        double h = 0.0;
        for (std::size_t i = 0; i + 1 < nodes.size(); ++i) h = std::max(h, (nodes[i + 1] - nodes[i]).norm());
        if (periodic && nodes.size() > 1) h = std::max(h, (nodes.front() - nodes.back()).norm());
        return h;
    }

    double distance_to(const Vec2& x) const {
        double d = std::numeric_limits<double>::infinity();
        for (const auto& p : nodes) d = std::min(d, (p - x).norm());
        return d;
    }
};

// Samples `curve` at the given parameters. `param_step` sets the quadrature
// weight |x'(t)| * param_step of each node.
inline BoundaryMesh sample_curve(const Curve& curve, std::vector<double> params, double param_step,
                                 bool periodic) {
    BoundaryMesh mesh;
    mesh.curve = curve;
    mesh.param_step = param_step;
    mesh.periodic = periodic;
    const std::size_t n = params.size();
    mesh.nodes.reserve(n);
    mesh.normals.reserve(n);
    mesh.weights.reserve(n);
    mesh.curvature.reserve(n);
    mesh.speed.reserve(n);
    for (double t : params) {
        const Vec2 p = curve_point(curve, t);
        const Vec2 d1 = curve_d1(curve, t);
        const Vec2 d2 = curve_d2(curve, t);
        const double s = d1.norm();
        mesh.nodes.push_back(p);
        mesh.normals.emplace_back(d1.y() / s, -d1.x() / s);
        mesh.speed.push_back(s);
        mesh.weights.push_back(s * param_step);
        mesh.curvature.push_back((d1.x() * d2.y() - d1.y() * d2.x()) / (s * s * s));
    }
    mesh.params = std::move(params);
    return mesh;
}

inline BoundaryMesh make_boundary(const Curve& curve, std::size_t count) {
    if (count < 16) throw std::invalid_argument("make_boundary: at least 16 nodes are required");
    const double dt = kTwoPi / static_cast<double>(count);
    std::vector<double> t(count);
    for (std::size_t i = 0; i < count; ++i) t[i] = dt * static_cast<double>(i);
    return sample_curve(curve, std::move(t), dt, true);
}

inline BoundaryMesh make_ellipse(double a, double b, std::size_t count) {
    if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("make_ellipse: semi-axes must be positive");
    if (count < 16) throw std::invalid_argument("make_ellipse: at least 16 nodes are required");
    return make_boundary(EllipseCurve{Vec2::Zero(), a, b}, count);
}

// Signed area of the node polygon; positive for counterclockwise traversal.
inline double signed_area(const std::vector<Vec2>& poly) {
    double s = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % poly.size()];
        s += p.x() * q.y() - q.x() * p.y();
    }
    return 0.5 * s;
}

// Winding number of a closed polygon around x.
inline int winding_number(const std::vector<Vec2>& poly, const Vec2& x) {
    int wn = 0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % poly.size()];
        const double cross = (q.x() - p.x()) * (x.y() - p.y()) - (x.x() - p.x()) * (q.y() - p.y());
        if (p.y() <= x.y()) {
            if (q.y() > x.y() && cross > 0.0) ++wn;
        } else if (q.y() <= x.y() && cross < 0.0) {
            --wn;
        }
    }
    return wn;
}

// ---------------------------------------------------------------------------
// Anomalies and scenarios
// ---------------------------------------------------------------------------

enum class ShapeKind { disk, kite };

inline std::string to_string(ShapeKind k) { return k == ShapeKind::disk ? "disk" : "kite"; }

struct AnomalyShape {
    ShapeKind kind = ShapeKind::disk;
    Vec2 center = Vec2::Zero();
    double size = 1.0;  // radius for disks, scale for kites

    static AnomalyShape disk(Vec2 c, double radius) { return {ShapeKind::disk, c, radius}; }
    static AnomalyShape kite(Vec2 c, double scale) { return {ShapeKind::kite, c, scale}; }

    Curve curve() const {
        if (kind == ShapeKind::disk) return EllipseCurve{center, size, size};
        return KiteCurve{center, size};
    }

    // Analytic membership. A horizontal line meets the kite in exactly two
    // parameters t0 and pi - t0, so the interior slice is an interval.
    bool contains(const Vec2& x) const {
        const Vec2 p = (x - center) / size;
        if (kind == ShapeKind::disk) return p.squaredNorm() < 1.0;
        const double s = p.y() / 1.5;
        if (s <= -1.0 || s >= 1.0) return false;
        const double t0 = std::asin(s);
        const double t1 = kPi - t0;
        auto xof = [](double t) { return std::cos(t) + 0.65 * std::cos(2.0 * t) - 0.65; };
        const double x0 = xof(t0);
        const double x1 = xof(t1);
        return p.x() > std::min(x0, x1) && p.x() < std::max(x0, x1);
    }

    // Bounding radius around `center`.
    double extent() const { return kind == ShapeKind::disk ? size : 2.3 * size; }
};

struct Anomaly {
    AnomalyShape shape;
    double sigma = 2.0;
};

enum class Geometry { m100, m32, m16, m16p };

inline std::string to_string(Geometry g) {
    switch (g) {
        case Geometry::m100: return "m100";
        case Geometry::m32: return "m32";
        case Geometry::m16: return "m16";
        case Geometry::m16p: return "m16p";
    }
    return "m100";
}

inline Geometry parse_geometry(std::string_view s) {
    if (s == "m100" || s == "100") return Geometry::m100;
    if (s == "m32" || s == "32") return Geometry::m32;
    if (s == "m16" || s == "16") return Geometry::m16;
    if (s == "m16p" || s == "16p") return Geometry::m16p;
    throw std::invalid_argument("unknown measurement geometry '" + std::string(s) + "'");
}

inline std::size_t point_count(Geometry g) {
    switch (g) {
        case Geometry::m100: return 100;
        case Geometry::m32: return 32;
        case Geometry::m16:
        case Geometry::m16p: return 16;
    }
    return 0;
}

inline bool is_partial(Geometry g) { return g == Geometry::m16p; }

struct Scenario {
    std::string name = "custom";
    double a = 10.0;
    double b = 7.0;
    std::vector<Anomaly> anomalies;
    double h = 0.5;
    Geometry geometry = Geometry::m100;
    int excitations = 2;
    double snr_db = 40.0;  // +inf for noiseless data
    double half_start = 0.0;  // first parameter of the m16p half-boundary

    EllipseCurve domain() const { return {Vec2::Zero(), a, b}; }
    bool inside_domain(const Vec2& x, double margin = 0.0) const {
        const double aa = a - margin;
        const double bb = b - margin;
        if (aa <= 0.0 || bb <= 0.0) return false;
        return (x.x() / aa) * (x.x() / aa) + (x.y() / bb) * (x.y() / bb) < 1.0;
    }
};

// Disjointness of two shapes, tested on boundary samples of each.
inline bool shapes_disjoint(const AnomalyShape& p, const AnomalyShape& q) {
    if ((p.center - q.center).norm() > p.extent() + q.extent()) return true;
    const BoundaryMesh bp = make_boundary(p.curve(), 256);
    const BoundaryMesh bq = make_boundary(q.curve(), 256);
    for (const auto& x : bp.nodes)
        if (q.contains(x)) return false;
    for (const auto& x : bq.nodes)
        if (p.contains(x)) return false;
    return !p.contains(q.center) && !q.contains(p.center);
}

inline void validate(const Scenario& s) {
    if (!(s.a > 0.0) || !(s.b > 0.0)) throw std::invalid_argument("scenario: semi-axes must be positive");
    if (!(s.h > 0.0)) throw std::invalid_argument("scenario: grid spacing must be positive");
    if (s.excitations < 1 || s.excitations > 4)
        throw std::invalid_argument("scenario: excitation count must be in 1..4");
    for (std::size_t i = 0; i < s.anomalies.size(); ++i) {
        const Anomaly& an = s.anomalies[i];
        if (!(an.sigma > 0.0) || !std::isfinite(an.sigma))
            throw std::invalid_argument("scenario: anomaly conductivity must be positive and finite");
        if (an.sigma == 1.0) throw std::invalid_argument("scenario: anomaly conductivity equals the background");
        if (!(an.shape.size > 0.0)) throw std::invalid_argument("scenario: anomaly size must be positive");
        const BoundaryMesh bd = make_boundary(an.shape.curve(), 256);
        for (const auto& x : bd.nodes)
            if (!s.inside_domain(x)) throw std::invalid_argument("scenario: anomaly leaves the background domain");
        for (std::size_t j = 0; j < i; ++j)
            if (!shapes_disjoint(an.shape, s.anomalies[j].shape))
                throw std::invalid_argument("scenario: anomalies overlap");
    }
}

// Background conductivity is 1; anomalies are disjoint, so the first hit wins.
inline double conductivity_at(const Scenario& s, const Vec2& x) {
    for (const auto& an : s.anomalies)
        if (an.shape.contains(x)) return an.sigma;
    return 1.0;
}

// ---------------------------------------------------------------------------
// Reconstruction grid
// ---------------------------------------------------------------------------

// Cell-centred lattice: centres at ((i + 1/2) h, (j + 1/2) h).
struct Grid {
    std::vector<Vec2> centers;
    std::vector<std::pair<int, int>> lattice;  // (i, j) of each centre
    std::vector<double> sigma;                 // true conductivity label per cell
    double h = 0.5;
    double area = 0.25;
    std::map<std::pair<int, int>, std::size_t> index;

    std::size_t size() const { return centers.size(); }

    // Cell index of lattice site (i, j), or -1 outside the grid.
    long find(int i, int j) const {
        auto it = index.find({i, j});
        return it == index.end() ? -1 : static_cast<long>(it->second);
    }

    Eigen::VectorXd contrast() const {
        Eigen::VectorXd x(centers.size());
        for (std::size_t j = 0; j < centers.size(); ++j) x[j] = sigma[j] - 1.0;
        return x;
    }

    std::size_t anomalous_cells() const {
        return static_cast<std::size_t>(std::count_if(sigma.begin(), sigma.end(), [](double v) { return v != 1.0; }));
    }
};

// Keeps centres inside the ellipse shrunk by `margin_factor * h` in both
// semi-axes. The default half-cell margin keeps every cell inside the domain.
inline Grid build_grid(const Scenario& s, double margin_factor = 0.5) {
    if (!(s.h > 0.0)) throw std::invalid_argument("build_grid: grid spacing must be positive");
    Grid g;
    g.h = s.h;
    g.area = s.h * s.h;
    const double margin = margin_factor * s.h;
    const int ilo = static_cast<int>(std::floor(-s.a / s.h)) - 1;
    const int ihi = static_cast<int>(std::ceil(s.a / s.h)) + 1;
    const int jlo = static_cast<int>(std::floor(-s.b / s.h)) - 1;
    const int jhi = static_cast<int>(std::ceil(s.b / s.h)) + 1;
    for (int j = jlo; j <= jhi; ++j) {
        for (int i = ilo; i <= ihi; ++i) {
            const Vec2 c((i + 0.5) * s.h, (j + 0.5) * s.h);
            if (!s.inside_domain(c, margin)) continue;
            g.index[{i, j}] = g.centers.size();
            g.centers.push_back(c);
            g.lattice.emplace_back(i, j);
            g.sigma.push_back(conductivity_at(s, c));
        }
    }
    if (g.centers.empty()) throw std::invalid_argument("build_grid: grid is empty");
    return g;
}

// ---------------------------------------------------------------------------
// Measurement layouts
// ---------------------------------------------------------------------------

// Full-boundary layouts are uniform in the ellipse parameter; m16p spreads 16
// points uniformly over [half_start, half_start + pi], endpoints included.
inline BoundaryMesh measurement_points(Geometry g, const BoundaryMesh& domain, double half_start = 0.0) {
    const std::size_t m = point_count(g);
    if (!is_partial(g)) return make_boundary(domain.curve, m);
    const double dt = kPi / static_cast<double>(m - 1);
    std::vector<double> t(m);
    for (std::size_t i = 0; i < m; ++i) t[i] = half_start + dt * static_cast<double>(i);
    return sample_curve(domain.curve, std::move(t), dt, false);
}

// ---------------------------------------------------------------------------
// CSV export
// ---------------------------------------------------------------------------

inline void write_csv(std::ostream& os, const BoundaryMesh& mesh) {
    os << "t,x,y,nx,ny,weight,curvature\n";
    os.precision(17);
    for (std::size_t i = 0; i < mesh.size(); ++i)
        os << mesh.params[i] << ',' << mesh.nodes[i].x() << ',' << mesh.nodes[i].y() << ',' << mesh.normals[i].x()
           << ',' << mesh.normals[i].y() << ',' << mesh.weights[i] << ',' << mesh.curvature[i] << '\n';
}

inline void write_csv(std::ostream& os, const Grid& grid) {
    os << "i,j,x,y,sigma\n";
    os.precision(17);
    for (std::size_t k = 0; k < grid.size(); ++k)
        os << grid.lattice[k].first << ',' << grid.lattice[k].second << ',' << grid.centers[k].x() << ','
           << grid.centers[k].y() << ',' << grid.sigma[k] << '\n';
}

}  // namespace jseit

#endif  // JSEIT_GEOMETRY_HPP
