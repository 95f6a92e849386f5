// File formats: key=value run configs, CSV matrices and fields, PGM images,
// JSON sidecars and reports.

#ifndef JSEIT_IO_HPP
#define JSEIT_IO_HPP

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "jseit/harness.hpp"

namespace jseit {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// key=value configs
// ---------------------------------------------------------------------------

// Ordered key=value entries; '#' starts a comment, keys may repeat.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline KeyValues parse_key_values(std::istream& is) {
    KeyValues kv;
    std::string line;
    int no = 0;
    while (std::getline(is, line)) {
        ++no;
        if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(no) + ": expected key = value");
        const std::string key = trim(std::string_view(t).substr(0, eq));
        if (key.empty()) throw std::runtime_error("config line " + std::to_string(no) + ": empty key");
        kv.emplace_back(key, trim(std::string_view(t).substr(eq + 1)));
    }
    return kv;
}

namespace detail {

inline double to_double(const std::string& key, const std::string& v) {
    if (v == "inf" || v == "+inf") return std::numeric_limits<double>::infinity();
    std::size_t pos = 0;
    double d = 0.0;
    try {
        d = std::stod(v, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != v.size() || v.empty()) throw std::runtime_error("config: '" + key + "' expects a number, got '" + v + "'");
    return d;
}

inline int to_int(const std::string& key, const std::string& v) {
    const double d = to_double(key, v);
    if (d != std::floor(d) || std::abs(d) > 1e9) throw std::runtime_error("config: '" + key + "' expects an integer");
    return static_cast<int>(d);
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::runtime_error("config: '" + key + "' expects a boolean");
}

inline std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream is(s);
    std::vector<std::string> out;
    for (std::string w; is >> w;) out.push_back(w);
    return out;
}

}  // namespace detail

// Seed lists: "1-20", "3", "1,4,9" or a mix such as "1-5,10".
inline std::vector<std::uint64_t> parse_seeds(const std::string& s) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(s);
    for (std::string part; std::getline(ss, part, ',');) {
        part = trim(part);
        if (part.empty()) continue;
        const auto dash = part.find('-');
        try {
            if (dash == std::string::npos) {
                out.push_back(std::stoull(part));
            } else {
                const auto lo = std::stoull(part.substr(0, dash)), hi = std::stoull(part.substr(dash + 1));
                if (hi < lo) throw std::runtime_error("seed range '" + part + "' is decreasing");
                for (auto v = lo; v <= hi; ++v) out.push_back(v);
            }
        } catch (const std::logic_error&) {
            throw std::runtime_error("config: bad seed list '" + s + "'");
        }
    }
    if (out.empty()) throw std::runtime_error("config: empty seed list");
    return out;
}

inline GradientRule parse_gradient_rule(std::string_view s) {
    if (s == "analytic") return GradientRule::analytic;
    if (s == "finite-difference" || s == "fd") return GradientRule::finite_difference;
    throw std::invalid_argument("unknown gradient rule '" + std::string(s) + "'");
}

inline std::string to_string(GradientRule g) { return g == GradientRule::analytic ? "analytic" : "finite-difference"; }

// anomaly = disk|kite cx cy size sigma
inline Anomaly parse_anomaly(const std::string& v) {
    const auto w = detail::split_ws(v);
    if (w.size() != 5) throw std::runtime_error("config: anomaly expects 'disk|kite cx cy size sigma'");
    const Vec2 ctr(detail::to_double("anomaly", w[1]), detail::to_double("anomaly", w[2]));
    const double size = detail::to_double("anomaly", w[3]);
    const double sigma = detail::to_double("anomaly", w[4]);
    if (w[0] == "disk") return {AnomalyShape::disk(ctr, size), sigma};
    if (w[0] == "kite") return {AnomalyShape::kite(ctr, size), sigma};
    throw std::runtime_error("config: unknown anomaly shape '" + w[0] + "'");
}

// Applies one key to a RunConfig. Scenario keys (name, a, b, h) turn the
// preset into a custom scenario; anomaly lines are handled by parse_run_config.
inline void apply_config_key(RunConfig& c, const std::string& key, const std::string& v) {
    using namespace detail;
    auto custom = [&]() -> Scenario& {
        if (!c.custom) c.custom = scenario_by_name(c.scenario);
        return *c.custom;
    };
    if (key == "scenario") {
        scenario_by_name(v);
        c.scenario = v;
    } else if (key == "method") c.method = parse_method(v);
    else if (key == "geometry") c.geometry = parse_geometry(v);
    else if (key == "M" || key == "excitations") c.excitations = to_int(key, v);
    else if (key == "snr_db" || key == "snr") c.snr_db = to_double(key, v);
    else if (key == "seeds" || key == "seed") c.seeds = parse_seeds(v);
    else if (key == "support_threshold" || key == "epsilon") c.support_threshold = to_double(key, v);
    else if (key == "msbl_iterations") c.msbl_iterations = to_int(key, v);
    else if (key == "precondition") c.precondition = to_bool(key, v);
    else if (key == "precondition_factor") c.precondition_factor = to_double(key, v);
    else if (key == "c_tau") c.c_tau = to_double(key, v);
    else if (key == "c_eps") c.c_eps = to_double(key, v);
    else if (key == "mu") c.mu = to_double(key, v);
    else if (key == "tsvd_ratio") c.tsvd_ratio = to_double(key, v);
    else if (key == "tsvd_currents") c.tsvd_currents = to_bool(key, v);
    else if (key == "gradient") c.gradient = parse_gradient_rule(v);
    else if (key == "refine_steps") c.refine_steps = to_int(key, v);
    else if (key == "music_signal_dim") c.music_signal_dim = to_int(key, v);
    else if (key == "forward_nodes") c.forward_nodes = static_cast<std::size_t>(to_int(key, v));
    else if (key == "neumann_nodes") c.neumann_nodes = static_cast<std::size_t>(to_int(key, v));
    else if (key == "potential_nodes") c.potential_nodes = static_cast<std::size_t>(to_int(key, v));
    else if (key == "half_start") c.half_start = to_double(key, v);
    else if (key == "oracle_support") c.oracle_support = to_bool(key, v);
    else if (key == "name") {
        if (v == "sparseA" || v == "sparseB" || v == "kite")
            throw std::runtime_error("config: custom scenario name must differ from the presets");
        custom().name = v;
    } else if (key == "a") custom().a = to_double(key, v);
    else if (key == "b") custom().b = to_double(key, v);
    else if (key == "h") custom().h = to_double(key, v);
    else throw std::runtime_error("config: unknown key '" + key + "'");
}

inline RunConfig parse_run_config(std::istream& is) {
    RunConfig c;
    std::vector<Anomaly> anomalies;
    for (const auto& [k, v] : parse_key_values(is)) {
        if (k == "anomaly") anomalies.push_back(parse_anomaly(v));
        else apply_config_key(c, k, v);
    }
    if (!anomalies.empty()) {
        if (!c.custom) c.custom = scenario_by_name(c.scenario);
        c.custom->anomalies = std::move(anomalies);
    }
    if (c.custom) {
        if (c.custom->name == c.scenario) c.custom->name = "custom";
        validate(*c.custom);
    }
    c.excitation_list();
    return c;
}

inline RunConfig load_run_config(const std::filesystem::path& p) {
    std::ifstream is(p);
    if (!is) throw std::runtime_error("cannot open config '" + p.string() + "'");
    return parse_run_config(is);
}

inline std::string seeds_string(const std::vector<std::uint64_t>& s) {
    std::string out;
    for (std::size_t i = 0; i < s.size();) {
        std::size_t j = i;
        while (j + 1 < s.size() && s[j + 1] == s[j] + 1) ++j;
        if (!out.empty()) out += ',';
        out += std::to_string(s[i]);
        if (j > i) out += '-' + std::to_string(s[j]);
        i = j + 1;
    }
    return out;
}

inline void write_run_config(std::ostream& os, const RunConfig& c) {
    os.precision(17);
    os << "scenario = " << c.scenario << '\n'
       << "method = " << to_string(c.method) << '\n'
       << "geometry = " << to_string(c.geometry) << '\n'
       << "M = " << c.excitations << '\n'
       << "snr_db = " << c.snr_db << '\n'
       << "seeds = " << seeds_string(c.seeds) << '\n'
       << "support_threshold = " << c.support_threshold << '\n'
       << "precondition_factor = " << c.precondition_factor << '\n'
       << "tsvd_ratio = " << c.tsvd_ratio << '\n'
       << "music_signal_dim = " << c.music_signal_dim << '\n'
       << "forward_nodes = " << c.forward_nodes << '\n'
       << "neumann_nodes = " << c.neumann_nodes << '\n'
       << "potential_nodes = " << c.potential_nodes << '\n'
       << "half_start = " << c.half_start << '\n'
       << "oracle_support = " << (c.oracle_support ? "true" : "false") << '\n';
    if (c.msbl_iterations) os << "msbl_iterations = " << *c.msbl_iterations << '\n';
    if (c.precondition) os << "precondition = " << (*c.precondition ? "true" : "false") << '\n';
    if (c.c_tau) os << "c_tau = " << *c.c_tau << '\n';
    if (c.c_eps) os << "c_eps = " << *c.c_eps << '\n';
    if (c.mu) os << "mu = " << *c.mu << '\n';
    if (c.tsvd_currents) os << "tsvd_currents = " << (*c.tsvd_currents ? "true" : "false") << '\n';
    if (c.gradient) os << "gradient = " << to_string(*c.gradient) << '\n';
    if (c.refine_steps) os << "refine_steps = " << *c.refine_steps << '\n';
    if (c.custom) {
        const Scenario& s = *c.custom;
        os << "name = " << s.name << '\n' << "a = " << s.a << '\n' << "b = " << s.b << '\n' << "h = " << s.h << '\n';
        for (const auto& an : s.anomalies)
            os << "anomaly = " << to_string(an.shape.kind) << ' ' << an.shape.center.x() << ' ' << an.shape.center.y()
               << ' ' << an.shape.size << ' ' << an.sigma << '\n';
    }
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& m) {
    os.precision(17);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j ? "," : "") << m(i, j);
        os << '\n';
    }
}

// Numeric CSV; a first line that does not parse as numbers is taken as a header.
inline Eigen::MatrixXd read_matrix_csv(std::istream& is, std::vector<std::string>* header = nullptr) {
    std::vector<std::vector<double>> rows;
    std::string line;
    bool first = true;
    while (std::getline(is, line)) {
        if (trim(line).empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) cells.push_back(trim(c));
        std::vector<double> r;
        bool numeric = true;
        for (const auto& c : cells) {
            std::size_t pos = 0;
            try {
                r.push_back(std::stod(c, &pos));
            } catch (const std::exception&) {
                numeric = false;
                break;
            }
            if (pos != c.size()) {
                numeric = false;
                break;
            }
        }
        if (!numeric) {
            if (!first) throw std::runtime_error("csv: non-numeric row '" + line + "'");
            if (header) *header = cells;
            first = false;
            continue;
        }
        first = false;
        if (!rows.empty() && r.size() != rows.front().size()) throw std::runtime_error("csv: ragged rows");
        rows.push_back(std::move(r));
    }
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return m;
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream os(p);
    if (!os) throw std::runtime_error("cannot write '" + p.string() + "'");
    os << content;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream is(p);
    if (!is) throw std::runtime_error("cannot open '" + p.string() + "'");
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------
// Measurement sets: CSV (t, x, y, then one column per excitation) plus a JSON
// sidecar with the acquisition metadata.
// ---------------------------------------------------------------------------

struct StoredMeasurements {
    RunConfig config;  // scenario, geometry, M, SNR and the seed
    MeasurementSet set;
};

inline Json measurement_sidecar(const RunConfig& c, const MeasurementSet& ms) {
    Json j;
    std::ostringstream cfg;
    write_run_config(cfg, c);
    j["geometry"] = to_string(ms.geometry);
    j["snr_db"] = std::isinf(ms.snr_db) ? Json("inf") : Json(ms.snr_db);
    j["seed"] = ms.seed;
    j["excitations"] = ms.excitations;
    j["points"] = ms.points.size();
    j["scenario"] = c.label();
    j["config"] = cfg.str();
    return j;
}

inline void save_measurements(const std::filesystem::path& csv, const RunConfig& c, const MeasurementSet& ms) {
    std::ostringstream os;
    os.precision(17);
    os << "t,x,y";
    for (int k : ms.excitations) os << ",u" << k;
    os << '\n';
    for (Eigen::Index i = 0; i < ms.m(); ++i) {
        const auto ii = static_cast<std::size_t>(i);
        os << ms.points.params[ii] << ',' << ms.points.nodes[ii].x() << ',' << ms.points.nodes[ii].y();
        for (Eigen::Index k = 0; k < ms.count(); ++k) os << ',' << ms.data(i, k);
        os << '\n';
    }
    write_file(csv, os.str());
    std::filesystem::path side = csv;
    side.replace_extension(".json");
    write_file(side, measurement_sidecar(c, ms).dump(2) + "\n");
}

inline StoredMeasurements load_measurements(const std::filesystem::path& csv) {
    if (!std::filesystem::exists(csv)) throw std::runtime_error("cannot open '" + csv.string() + "'");
    std::filesystem::path side = csv;
    side.replace_extension(".json");
    const Json j = Json::parse(read_file(side));
    StoredMeasurements sm;
    std::istringstream cfg(j.at("config").get<std::string>());
    sm.config = parse_run_config(cfg);
    std::istringstream data(read_file(csv));
    const Eigen::MatrixXd m = read_matrix_csv(data);
    MeasurementSet& ms = sm.set;
    ms.geometry = parse_geometry(j.at("geometry").get<std::string>());
    ms.snr_db = j.at("snr_db").is_string() ? std::numeric_limits<double>::infinity() : j.at("snr_db").get<double>();
    ms.seed = j.at("seed").get<std::uint64_t>();
    ms.excitations = j.at("excitations").get<std::vector<int>>();
    if (m.cols() != 3 + static_cast<Eigen::Index>(ms.excitations.size()) ||
        m.rows() != static_cast<Eigen::Index>(point_count(ms.geometry)))
        throw std::runtime_error("measurement csv does not match its sidecar");
    const Scenario s = sm.config.scenario_data();
    ms.points = measurement_points(ms.geometry, make_ellipse(s.a, s.b, 16), sm.config.half_start);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        if (std::abs(ms.points.params[static_cast<std::size_t>(i)] - m(i, 0)) > 1e-9)
            throw std::runtime_error("measurement csv: point parameters differ from the geometry");
    ms.data = m.rightCols(m.cols() - 3);
    ms.clean = ms.data;
    sm.config.seeds = {ms.seed};
    return sm;
}

// ---------------------------------------------------------------------------
// Grid fields: CSV (i, j, x, y, value) and 8-bit PGM on the lattice
// ---------------------------------------------------------------------------

inline void write_field_csv(std::ostream& os, const Grid& g, const Eigen::VectorXd& v) {
    if (v.size() != static_cast<Eigen::Index>(g.size())) throw std::invalid_argument("field size differs from the grid");
    os.precision(17);
    os << "i,j,x,y,value\n";
    for (std::size_t k = 0; k < g.size(); ++k)
        os << g.lattice[k].first << ',' << g.lattice[k].second << ',' << g.centers[k].x() << ',' << g.centers[k].y()
           << ',' << v[static_cast<Eigen::Index>(k)] << '\n';
}

// Binary PGM, one pixel per cell, y axis pointing up. Values are mapped
// linearly from [lo, hi] to [0, 255]; cells outside the grid are black.
inline void write_field_pgm(std::ostream& os, const Grid& g, const Eigen::VectorXd& v, double lo, double hi) {
    if (v.size() != static_cast<Eigen::Index>(g.size())) throw std::invalid_argument("field size differs from the grid");
    int imin = 0, imax = 0, jmin = 0, jmax = 0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const auto [i, j] = g.lattice[k];
        if (k == 0 || i < imin) imin = i;
        if (k == 0 || i > imax) imax = i;
        if (k == 0 || j < jmin) jmin = j;
        if (k == 0 || j > jmax) jmax = j;
    }
    const int w = imax - imin + 1, h = jmax - jmin + 1;
    std::vector<unsigned char> px(static_cast<std::size_t>(w * h), 0);
    const double span = hi > lo ? hi - lo : 1.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const auto [i, j] = g.lattice[k];
        const double t = std::clamp((v[static_cast<Eigen::Index>(k)] - lo) / span, 0.0, 1.0);
        px[static_cast<std::size_t>((jmax - j) * w + (i - imin))] = static_cast<unsigned char>(std::lround(255.0 * t));
    }
    os << "P5\n" << w << ' ' << h << "\n255\n";
    os.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
}

inline void write_field_pgm(std::ostream& os, const Grid& g, const Eigen::VectorXd& v) {
    write_field_pgm(os, g, v, std::min(0.0, v.minCoeff()), std::max(0.0, v.maxCoeff()));
}

inline void save_field(const std::filesystem::path& stem, const Grid& g, const Eigen::VectorXd& v) {
    std::ostringstream csv;
    write_field_csv(csv, g, v);
    write_file(stem.string() + ".csv", csv.str());
    std::ostringstream pgm;
    write_field_pgm(pgm, g, v);
    write_file(stem.string() + ".pgm", pgm.str());
}

// ---------------------------------------------------------------------------
// JSON: M-SBL trace and run reports
// ---------------------------------------------------------------------------

inline Json msbl_trace_json(const MsblState& st) {
    Json j;
    j["iterations"] = st.iterations;
    j["lambda"] = st.lambda;
    j["active"] = st.active();
    Json it = Json::array();
    for (const auto& t : st.trace) {
        // Histogram of log10 gamma over the active pairs.
        std::map<int, int> hist;
        for (Eigen::Index i = 0; i < t.gamma.size(); ++i)
            if (t.gamma[i] > 0.0) ++hist[static_cast<int>(std::floor(std::log10(t.gamma[i])))];
        Json h = Json::object();
        for (const auto& [e, n] : hist) h[std::to_string(e)] = n;
        it.push_back({{"lambda", t.lambda}, {"active", t.active}, {"log10_gamma_histogram", h}});
    }
    j["trace"] = it;
    return j;
}

inline Json stage_json(const StageTimes& t) {
    return {{"support", t.support},
            {"potential", t.potential},
            {"conductivity", t.conductivity},
            {"assembly", t.assembly},
            {"total", t.total}};
}

inline Json report_json(const RunReport& r) {
    Json j;
    std::ostringstream cfg;
    write_run_config(cfg, r.config);
    j["scenario"] = r.config.label();
    j["method"] = to_string(r.config.method);
    j["geometry"] = to_string(r.config.geometry);
    j["M"] = r.config.excitations;
    j["snr_db"] = std::isinf(r.config.snr_db) ? Json("inf") : Json(r.config.snr_db);
    j["config"] = cfg.str();
    j["params"] = {{"msbl_iterations", r.params.msbl_iterations},
                   {"precondition", r.params.precondition},
                   {"c_tau", r.params.csalsa.c_tau},
                   {"c_eps", r.params.csalsa.c_eps},
                   {"mu", r.params.csalsa.mu},
                   {"tsvd_currents", r.params.tsvd_currents},
                   {"gradient", to_string(r.params.gradient)},
                   {"refine_steps", r.params.refine_steps}};
    j["mean_error"] = r.error.mean;
    j["std_error"] = r.error.stddev;
    j["bound"] = r.bound;
    j["true_rows"] = r.true_rows;
    j["forward_seconds"] = r.forward_seconds;
    j["assembly_seconds"] = r.assembly_seconds;
    j["mean_times"] = stage_json(r.mean_times);
    Json seeds = Json::array();
    for (const auto& s : r.seeds) {
        Json e{{"seed", s.seed}, {"ok", s.ok}, {"times", stage_json(s.times)}, {"support_size", s.support.size()}};
        if (s.ok && std::isfinite(s.error)) e["error"] = s.error;
        if (!s.ok) e["message"] = s.error_message;
        if (r.config.method != Method::music) {
            e["csalsa"] = {{"iterations", s.csalsa.iterations},
                           {"converged", s.csalsa.converged},
                           {"eps", s.csalsa.eps},
                           {"residual", s.csalsa.residual}};
        } else {
            e["signal_dim"] = s.signal_dim;
        }
        seeds.push_back(e);
    }
    j["seeds"] = seeds;
    j["outputs"] = r.outputs;
    return j;
}

// Rebuilds the aggregate fields of a report from its JSON (per-seed errors,
// stage times); mean and std are recomputed from the stored values.
inline RunReport report_from_json(const Json& j) {
    RunReport r;
    std::istringstream cfg(j.at("config").get<std::string>());
    r.config = parse_run_config(cfg);
    r.params = resolve_params(r.config);
    r.bound = j.at("bound").get<double>();
    r.true_rows = j.at("true_rows").get<std::size_t>();
    r.forward_seconds = j.at("forward_seconds").get<double>();
    r.assembly_seconds = j.at("assembly_seconds").get<double>();
    const Json& t = j.at("mean_times");
    r.mean_times = {t.at("support").get<double>(), t.at("potential").get<double>(), t.at("conductivity").get<double>(),
                    t.at("assembly").get<double>(), t.at("total").get<double>()};
    for (const auto& s : j.at("seeds")) {
        SeedResult sr;
        sr.seed = s.at("seed").get<std::uint64_t>();
        sr.ok = s.at("ok").get<bool>();
        if (s.contains("error")) {
            sr.error = s.at("error").get<double>();
            r.errors.push_back(sr.error);
        }
        if (s.contains("message")) sr.error_message = s.at("message").get<std::string>();
        r.seeds.push_back(std::move(sr));
    }
    r.error = summarize(r.errors);
    r.outputs = j.at("outputs").get<std::vector<std::string>>();
    return r;
}

inline void write_errors_csv(std::ostream& os, const RunReport& r) {
    os.precision(17);
    os << "seed,ok,error,support,potential,conductivity,assembly,total\n";
    for (const auto& s : r.seeds)
        os << s.seed << ',' << (s.ok ? 1 : 0) << ',' << s.error << ',' << s.times.support << ',' << s.times.potential
           << ',' << s.times.conductivity << ',' << s.times.assembly << ',' << s.times.total << '\n';
}

// ---------------------------------------------------------------------------
// Aggregate tables
// ---------------------------------------------------------------------------

// One row per report: mean and sample std of the relative error.
inline void write_error_table(std::ostream& os, const std::vector<RunReport>& reports) {
    os.precision(6);
    os << "scenario,method,geometry,M,snr_db,support_threshold,seeds,failures,mean_error,std_error\n";
    for (const auto& r : reports)
        os << r.config.label() << ',' << to_string(r.config.method) << ',' << to_string(r.config.geometry) << ','
           << r.config.excitations << ',' << r.config.snr_db << ',' << r.config.support_threshold << ','
           << r.seeds.size() << ',' << r.failures() << ',' << r.error.mean << ',' << r.error.stddev << '\n';
}

// Mean per-seed stage times; msbl covers support detection, csalsa the
// conductivity solve.
inline void write_timing_table(std::ostream& os, const std::vector<RunReport>& reports) {
    os.precision(6);
    os << "scenario,method,geometry,msbl,potential,system,csalsa,total,forward,kernel\n";
    for (const auto& r : reports) {
        const StageTimes& t = r.mean_times;
        os << r.config.label() << ',' << to_string(r.config.method) << ',' << to_string(r.config.geometry) << ','
           << t.support << ',' << t.potential << ',' << t.assembly << ',' << t.conductivity << ',' << t.total << ','
           << r.forward_seconds << ',' << r.assembly_seconds << '\n';
    }
}

// Error against the support threshold, sorted by threshold.
inline void write_sweep_table(std::ostream& os, std::vector<RunReport> reports) {
    std::sort(reports.begin(), reports.end(), [](const RunReport& a, const RunReport& b) {
        return a.config.support_threshold < b.config.support_threshold;
    });
    os.precision(6);
    os << "support_threshold,seeds,mean_error,std_error\n";
    for (const auto& r : reports)
        os << r.config.support_threshold << ',' << r.errors.size() << ',' << r.error.mean << ',' << r.error.stddev << '\n';
}

// Mean of the per-seed fields of a run (successful seeds only).
inline Eigen::VectorXd mean_field(const RunReport& r) {
    Eigen::VectorXd acc;
    int n = 0;
    for (const auto& s : r.seeds) {
        if (!s.ok || s.field.size() == 0) continue;
        if (acc.size() == 0) acc = Eigen::VectorXd::Zero(s.field.size());
        acc += s.field;
        ++n;
    }
    if (n == 0) throw std::runtime_error("mean_field: run has no successful seeds");
    return acc / n;
}

}  // namespace jseit

#endif  // JSEIT_IO_HPP
