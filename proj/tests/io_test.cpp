#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "jseit/io.hpp"

using namespace jseit;
namespace fs = std::filesystem;

namespace {

RunConfig parse(const std::string& text) {
    std::istringstream is(text);
    return parse_run_config(is);
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("jseit_io_test_" + name);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST(Config, KeyValuesAndComments) {
    std::istringstream is("# header\n  a = 1 \n\nb=two # trailing\nb = 3\n");
    const KeyValues kv = parse_key_values(is);
    ASSERT_EQ(kv.size(), 3u);
    EXPECT_EQ(kv[0], (std::pair<std::string, std::string>{"a", "1"}));
    EXPECT_EQ(kv[1].second, "two");
    EXPECT_EQ(kv[2].second, "3");
    std::istringstream bad("novalue\n");
    EXPECT_THROW(parse_key_values(bad), std::runtime_error);
    std::istringstream empty_key(" = 3\n");
    EXPECT_THROW(parse_key_values(empty_key), std::runtime_error);
}

TEST(Config, Seeds) {
    EXPECT_EQ(parse_seeds("1-3,7"), (std::vector<std::uint64_t>{1, 2, 3, 7}));
    EXPECT_EQ(parse_seeds(" 5 "), (std::vector<std::uint64_t>{5}));
    EXPECT_THROW(parse_seeds("4-2"), std::runtime_error);
    EXPECT_THROW(parse_seeds("x"), std::runtime_error);
    EXPECT_THROW(parse_seeds(""), std::runtime_error);
    EXPECT_EQ(seeds_string({1, 2, 3, 7, 9, 10}), "1-3,7,9-10");
}

TEST(Config, ParsesOverrides) {
    const RunConfig c = parse("scenario = kite\nmethod = linearized\ngeometry = m16p\nM = 3\nsnr_db = 30\n"
                              "seeds = 4-6\nc_tau = 2\nprecondition = false\ngradient = finite-difference\n");
    EXPECT_EQ(c.scenario, "kite");
    EXPECT_EQ(c.method, Method::linearized);
    EXPECT_EQ(c.geometry, Geometry::m16p);
    EXPECT_EQ(c.excitations, 3);
    EXPECT_EQ(c.snr_db, 30.0);
    EXPECT_EQ(c.seeds.size(), 3u);
    ASSERT_TRUE(c.c_tau);
    EXPECT_EQ(*c.c_tau, 2.0);
    ASSERT_TRUE(c.precondition);
    EXPECT_FALSE(*c.precondition);
    EXPECT_EQ(*c.gradient, GradientRule::finite_difference);
    EXPECT_FALSE(c.custom);
}

TEST(Config, RejectsBadInput) {
    EXPECT_THROW(parse("colour = red\n"), std::runtime_error);
    EXPECT_THROW(parse("scenario = nowhere\n"), std::invalid_argument);
    EXPECT_THROW(parse("M = 5\n"), std::invalid_argument);
    EXPECT_THROW(parse("c_tau = abc\n"), std::runtime_error);
    EXPECT_THROW(parse("name = kite\n"), std::runtime_error);
    EXPECT_THROW(parse("anomaly = square 0 0 1 2\n"), std::runtime_error);
    EXPECT_THROW(parse("anomaly = disk 0 0 1\n"), std::runtime_error);
}

TEST(Config, CustomScenarioRoundTrip) {
    const RunConfig c = parse("name = pair\na = 4\nb = 3\nanomaly = disk -1 0 0.6 3\nanomaly = kite 1.2 0.3 0.4 0.5\n"
                              "c_eps = 0.1\nrefine_steps = 0\n");
    ASSERT_TRUE(c.custom);
    EXPECT_EQ(c.label(), "pair");
    EXPECT_EQ(c.scenario_data().anomalies.size(), 2u);
    EXPECT_EQ(c.scenario_data().a, 4.0);
    std::ostringstream os;
    write_run_config(os, c);
    const RunConfig d = parse(os.str());
    ASSERT_TRUE(d.custom);
    EXPECT_EQ(d.label(), "pair");
    ASSERT_EQ(d.custom->anomalies.size(), 2u);
    EXPECT_EQ(d.custom->anomalies[1].shape.kind, c.custom->anomalies[1].shape.kind);
    EXPECT_EQ(d.custom->anomalies[1].sigma, 0.5);
    EXPECT_EQ(d.custom->b, 3.0);
    EXPECT_EQ(*d.c_eps, 0.1);
    EXPECT_EQ(*d.refine_steps, 0);
    std::ostringstream again;
    write_run_config(again, d);
    EXPECT_EQ(again.str(), os.str());
}

TEST(Csv, MatrixRoundTripWithHeader) {
    Eigen::MatrixXd m(3, 2);
    m << 1.0, -2.5, 1.0 / 3.0, 4e-17, 5.0, 6.0;
    std::ostringstream os;
    os << "p,q\n";
    write_matrix_csv(os, m);
    std::istringstream is(os.str());
    std::vector<std::string> header;
    const Eigen::MatrixXd r = read_matrix_csv(is, &header);
    EXPECT_EQ(header, (std::vector<std::string>{"p", "q"}));
    EXPECT_EQ(r, m);
    std::istringstream ragged("1,2\n3\n");
    EXPECT_THROW(read_matrix_csv(ragged), std::runtime_error);
    std::istringstream mid("1,2\nx,y\n");
    EXPECT_THROW(read_matrix_csv(mid), std::runtime_error);
}

TEST(Fields, CsvAndPgm) {
    const Grid g = build_grid(sparse_target_a());
    const Eigen::VectorXd v = g.contrast();
    std::ostringstream csv;
    write_field_csv(csv, g, v);
    std::istringstream in(csv.str());
    const Eigen::MatrixXd back = read_matrix_csv(in);
    ASSERT_EQ(back.rows(), static_cast<Eigen::Index>(g.size()));
    EXPECT_EQ(back.col(4), v);

    std::ostringstream pgm;
    write_field_pgm(pgm, g, v);
    const std::string s = pgm.str();
    std::istringstream hs(s);
    std::string magic;
    int w = 0, h = 0, maxv = 0;
    hs >> magic >> w >> h >> maxv;
    EXPECT_EQ(magic, "P5");
    EXPECT_EQ(maxv, 255);
    EXPECT_EQ(static_cast<std::size_t>(w * h) + static_cast<std::size_t>(hs.tellg()) + 1, s.size());
    // Contrast 4 (sigma = 5) is the brightest value.
    EXPECT_NE(s.find(static_cast<char>(255), static_cast<std::size_t>(hs.tellg()) + 1), std::string::npos);
    EXPECT_THROW(write_field_csv(csv, g, Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST(Measurements, SaveLoadRoundTrip) {
    RunConfig c;
    c.geometry = Geometry::m32;
    c.forward_nodes = 256;
    const Scenario s = c.scenario_data();
    const auto fd = solve_forward(s, c.forward_nodes, 2);
    const BoundaryMesh pts = measurement_points(c.geometry, fd->domain);
    const MeasurementSet ms = measure(fd->fields, pts, c.geometry, 40.0, 7);
    const fs::path dir = scratch("meas");
    RunConfig one = c;
    one.seeds = {7};
    save_measurements(dir / "m.csv", one, ms);
    ASSERT_TRUE(fs::exists(dir / "m.json"));
    const StoredMeasurements sm = load_measurements(dir / "m.csv");
    EXPECT_EQ(sm.set.seed, 7u);
    EXPECT_EQ(sm.set.geometry, Geometry::m32);
    EXPECT_EQ(sm.set.excitations, ms.excitations);
    EXPECT_EQ(sm.set.snr_db, 40.0);
    EXPECT_EQ(sm.config.forward_nodes, 256u);
    EXPECT_EQ(sm.config.seeds, (std::vector<std::uint64_t>{7}));
    EXPECT_EQ(sm.set.data, ms.data);
    fs::remove_all(dir);
}

TEST(Tables, ErrorTimingAndSweep) {
    RunReport a, b;
    a.config.support_threshold = 0.3;
    a.errors = {0.5, 0.7};
    a.error = summarize(a.errors);
    a.seeds.resize(2);
    b.config.support_threshold = 1e-3;
    b.errors = {0.4};
    b.error = summarize(b.errors);
    b.seeds.resize(1);
    std::ostringstream e, t, s;
    write_error_table(e, {a, b});
    write_timing_table(t, {a});
    write_sweep_table(s, {a, b});
    std::istringstream ei(e.str()), ti(t.str()), si(s.str());
    const Eigen::MatrixXd sweep = read_matrix_csv(si);
    ASSERT_EQ(sweep.rows(), 2);
    EXPECT_EQ(sweep(0, 0), 1e-3);
    EXPECT_NEAR(sweep(1, 2), 0.6, 1e-12);
    int lines = 0;
    for (std::string l; std::getline(ei, l);) ++lines;
    EXPECT_EQ(lines, 3);
    std::string header;
    std::getline(ti, header);
    EXPECT_NE(header.find("msbl"), std::string::npos);
    EXPECT_NE(header.find("csalsa"), std::string::npos);
    EXPECT_NE(header.find("total"), std::string::npos);
}

TEST(Reports, JsonRoundTripRecomputesSummary) {
    RunReport r;
    r.config.seeds = {1, 2, 3};
    r.params = resolve_params(r.config);
    for (std::uint64_t k : r.config.seeds) {
        SeedResult s;
        s.seed = k;
        s.error = 0.1 * static_cast<double>(k);
        r.errors.push_back(s.error);
        r.seeds.push_back(s);
    }
    r.seeds[2].ok = false;
    r.seeds[2].error_message = "boom";
    r.errors.pop_back();
    r.error = summarize(r.errors);
    const RunReport back = report_from_json(Json::parse(report_json(r).dump()));
    EXPECT_EQ(back.errors.size(), 2u);
    EXPECT_NEAR(back.error.mean, 0.15, 1e-15);
    EXPECT_EQ(back.failures(), 1u);
    EXPECT_EQ(back.seeds[2].error_message, "boom");
    EXPECT_EQ(back.config.seeds, r.config.seeds);
}

TEST(Reports, MeanField) {
    RunReport r;
    EXPECT_THROW(mean_field(r), std::runtime_error);
    SeedResult a, b, c;
    a.field = Eigen::VectorXd::Constant(3, 1.0);
    b.field = Eigen::VectorXd::Constant(3, 3.0);
    c.ok = false;
    r.seeds = {a, b, c};
    EXPECT_EQ(mean_field(r), Eigen::VectorXd::Constant(3, 2.0));
}

TEST(Reports, MsblTraceHistogram) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd a(12, 20);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = nd(rng);
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(20, 2);
    x(2, 0) = 1.0;
    x(12, 1) = -2.0;
    const MsblState st = msbl(a, a * x, 10);
    const Json j = msbl_trace_json(st);
    EXPECT_EQ(j.at("iterations").get<int>(), st.iterations);
    ASSERT_EQ(j.at("trace").size(), st.trace.size());
    for (std::size_t t = 0; t < st.trace.size(); ++t) {
        int total = 0;
        for (const auto& [k, n] : j.at("trace")[t].at("log10_gamma_histogram").items()) total += n.get<int>();
        EXPECT_EQ(static_cast<std::size_t>(total), static_cast<std::size_t>((st.trace[t].gamma.array() > 0.0).count()));
    }
}
