// jseit command line: simulate, reconstruct, benchmark, report, calibrate.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "jseit/benchmark.hpp"
#include "jseit/harness.hpp"
#include "jseit/io.hpp"

namespace fs = std::filesystem;
using namespace jseit;

namespace {

// Every RunConfig key is exposed as --key (underscores become dashes).
const std::vector<std::string> kConfigKeys{
    "scenario",        "method",        "geometry",      "M",             "snr_db",
    "seeds",           "support_threshold", "msbl_iterations", "precondition", "precondition_factor",
    "c_tau",           "c_eps",         "mu",            "tsvd_ratio",    "tsvd_currents",
    "gradient",        "refine_steps",  "music_signal_dim", "forward_nodes", "neumann_nodes",
    "potential_nodes", "half_start",    "oracle_support"};

struct ConfigFlags {
    std::string file;
    std::map<std::string, std::string> values;
    std::vector<std::string> anomalies;

    void add_to(CLI::App* app, const std::vector<std::string>& skip = {}) {
        app->add_option("-c,--config", file, "key=value run configuration file");
        for (const auto& k : kConfigKeys) {
            if (std::find(skip.begin(), skip.end(), k) != skip.end()) continue;
            std::string flag = k;
            std::replace(flag.begin(), flag.end(), '_', '-');
            app->add_option("--" + flag, values[k], "config key " + k);
        }
        app->add_option("--anomaly", anomalies, "custom anomaly 'disk|kite cx cy size sigma' (repeatable)");
    }

    // File first, then flags; flags win.
    RunConfig resolve() const {
        RunConfig c = file.empty() ? RunConfig{} : load_run_config(file);
        for (const auto& [k, v] : values)
            if (!v.empty()) apply_config_key(c, k, v);
        if (!anomalies.empty()) {
            if (!c.custom) {
                c.custom = scenario_by_name(c.scenario);
                c.custom->name = "custom";
            }
            c.custom->anomalies.clear();
            for (const auto& a : anomalies) c.custom->anomalies.push_back(parse_anomaly(a));
            validate(*c.custom);
        }
        c.excitation_list();
        return c;
    }

    // Method settings on top of a stored measurement config; keys that define
    // the data (scenario, geometry, M, noise, anomalies) are ignored.
    RunConfig apply_to(RunConfig c) const {
        auto data_key = [](const std::string& k) {
            static const std::vector<std::string> d{"scenario", "geometry", "M", "excitations", "snr_db", "snr", "seeds",
                                                    "seed", "forward_nodes", "half_start", "name", "a", "b", "h", "anomaly"};
            return std::find(d.begin(), d.end(), k) != d.end();
        };
        if (!file.empty()) {
            std::ifstream is(file);
            if (!is) throw std::runtime_error("cannot open " + file);
            for (const auto& [k, v] : parse_key_values(is))
                if (!data_key(k)) apply_config_key(c, k, v);
        }
        for (const auto& [k, v] : values)
            if (!v.empty() && !data_key(k)) apply_config_key(c, k, v);
        return c;
    }
};

std::string measurement_name(const RunConfig& c, std::uint64_t seed) {
    return c.label() + "_" + to_string(c.geometry) + "_M" + std::to_string(c.excitations) + "_s" + std::to_string(seed) + ".csv";
}

void write_report_files(const fs::path& dir, const std::string& stem, RunReport& r, const Grid& grid) {
    const fs::path field = dir / (stem + "_mean_field");
    save_field(field, grid, mean_field(r));
    r.outputs.push_back(field.string() + ".csv");
    r.outputs.push_back(field.string() + ".pgm");
    std::ostringstream err;
    write_errors_csv(err, r);
    write_file(dir / (stem + "_errors.csv"), err.str());
    r.outputs.push_back((dir / (stem + "_errors.csv")).string());
    write_file(dir / (stem + ".json"), report_json(r).dump(2) + "\n");
}

void write_tables(const fs::path& dir, const std::vector<RunReport>& reports) {
    std::ostringstream e, t;
    write_error_table(e, reports);
    write_timing_table(t, reports);
    write_file(dir / "error_table.csv", e.str());
    write_file(dir / "timing_table.csv", t.str());
    std::cout << "error table:\n" << e.str() << "timing table (s):\n" << t.str();
}

int cmd_simulate(const ConfigFlags& f, const fs::path& out) {
    RunConfig c = f.resolve();
    Workspace ws;
    const Scenario s = c.scenario_data();
    const auto fd = ws.forward(s, c.forward_nodes);
    const BoundaryMesh pts = measurement_points(c.geometry, fd->domain, c.half_start);
    std::vector<TransmissionField> fields;
    for (int k : c.excitation_list()) fields.push_back(fd->fields.at(static_cast<std::size_t>(k - 1)));
    for (std::uint64_t seed : c.seeds) {
        const MeasurementSet ms = measure(fields, pts, c.geometry, c.snr_db, seed);
        RunConfig one = c;
        one.seeds = {seed};
        const fs::path p = out / measurement_name(c, seed);
        save_measurements(p, one, ms);
        std::cout << p.string() << '\n';
    }
    Scenario grid_s = s;
    grid_s.geometry = c.geometry;
    const Grid g = build_grid(grid_s);
    save_field(out / (c.label() + "_truth"), g, g.contrast());
    std::cout << "forward solve " << fd->seconds << " s, " << c.seeds.size() << " measurement set(s) in " << out.string() << '\n';
    return 0;
}

int cmd_reconstruct(const ConfigFlags& f, const std::vector<std::string>& inputs, const fs::path& out) {
    Workspace ws;
    for (const auto& in : inputs) {
        StoredMeasurements sm = load_measurements(in);
        const RunConfig c = f.apply_to(sm.config);
        const Setup st = ws.setup(c);
        RunReport r;
        r.config = c;
        r.params = st.params;
        r.forward_seconds = st.forward->seconds;
        r.assembly_seconds = st.assembly_seconds;
        r.true_rows = 2 * st.grid.anomalous_cells();
        r.bound = recoverability_bound(static_cast<int>(st.points.size()), static_cast<int>(sm.set.count()));
        SeedResult sr = reconstruct(st, sm.set.data, sm.set.seed);
        const fs::path base = fs::path(in).stem();
        const std::string stem = base.string() + "_" + to_string(c.method);
        save_field(out / (stem + "_field"), st.grid, sr.field);
        r.outputs = {(out / (stem + "_field.csv")).string(), (out / (stem + "_field.pgm")).string()};
        if (c.method != Method::music) {
            write_file(out / (stem + "_msbl.json"), msbl_trace_json(sr.msbl).dump(2) + "\n");
            r.outputs.push_back((out / (stem + "_msbl.json")).string());
        }
        if (sr.ok && std::isfinite(sr.error)) r.errors.push_back(sr.error);
        r.mean_times = sr.times;
        std::cout << in << ": " << to_string(c.method) << " error " << sr.error << " support " << sr.support.size()
                  << " cells, " << sr.times.total << " s\n";
        r.seeds.push_back(std::move(sr));
        r.error = summarize(r.errors);
        write_file(out / (stem + ".json"), report_json(r).dump(2) + "\n");
    }
    return 0;
}

int cmd_benchmark(const std::string& seeds, double snr, const fs::path& out, bool check) {
    BenchmarkOptions opt;
    if (!seeds.empty()) opt.seeds = parse_seeds(seeds);
    opt.snr_db = snr;
    opt.progress = [](const std::string& k) { std::cerr << "running " << k << std::endl; };
    Workspace ws;
    BenchmarkRuns br = run_benchmark(ws, opt);
    std::vector<RunReport> table, sweep;
    for (auto& [key, r] : br.reports) {
        std::string stem = key;
        std::replace(stem.begin(), stem.end(), '/', '_');
        Scenario s = r.config.scenario_data();
        s.geometry = r.config.geometry;
        write_report_files(out, stem, r, build_grid(s));
        if (key.rfind("sweep/", 0) == 0) sweep.push_back(r);
        else table.push_back(r);
    }
    write_tables(out, table);
    std::ostringstream sw;
    write_sweep_table(sw, sweep);
    write_file(out / "sweep_table.csv", sw.str());
    std::cout << "threshold sweep:\n" << sw.str();
    const auto checks = acceptance_checks(br, opt.music_excitations);
    bool all = true;
    std::ostringstream lines;
    for (const auto& c : checks) {
        lines << format_check(c) << '\n';
        all = all && c.pass;
    }
    write_file(out / "checks.txt", lines.str());
    std::cout << lines.str();
    return check && !all ? 1 : 0;
}

int cmd_report(const std::vector<std::string>& inputs, const fs::path& out, bool sweep) {
    std::vector<RunReport> reports;
    for (const auto& in : inputs) {
        const Json j = Json::parse(read_file(in));
        if (!j.is_object() || !j.contains("config") || !j.contains("seeds"))
            throw std::runtime_error("'" + in + "' is not a run report");
        reports.push_back(report_from_json(j));
    }
    write_tables(out, reports);
    if (sweep) {
        std::ostringstream s;
        write_sweep_table(s, reports);
        write_file(out / "sweep_table.csv", s.str());
        std::cout << "threshold sweep:\n" << s.str();
    }
    return 0;
}

int cmd_calibrate(const ConfigFlags& f) {
    RunConfig c = f.resolve();
    Workspace ws;
    const Setup st = ws.setup(c);
    const Calibration cal = calibrate(st, c.seeds, tau_candidates(), eps_candidates());
    std::cout << "c_tau \\ c_eps";
    for (double e : cal.c_eps) std::cout << ',' << e;
    std::cout << '\n';
    for (Eigen::Index i = 0; i < cal.mean_error.rows(); ++i) {
        std::cout << cal.c_tau[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < cal.mean_error.cols(); ++j) std::cout << ',' << cal.mean_error(i, j);
        std::cout << '\n';
    }
    std::cout << "best c_tau = " << cal.best_tau << ", c_eps = " << cal.best_eps << ", mean error " << cal.best_error << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Joint-sparse EIT reconstruction"};
    app.require_subcommand(1);

    auto* sim = app.add_subcommand("simulate", "forward solve and noisy measurements to CSV + JSON");
    ConfigFlags sim_f;
    sim_f.add_to(sim, {"method"});
    std::string sim_out = "out";
    sim->add_option("-o,--out", sim_out, "output directory");

    auto* rec = app.add_subcommand("reconstruct", "run a method on stored measurements");
    ConfigFlags rec_f;
    rec_f.add_to(rec);
    std::vector<std::string> rec_in;
    std::string rec_out = "out";
    rec->add_option("-i,--input", rec_in, "measurement CSV files")->required();
    rec->add_option("-o,--out", rec_out, "output directory");

    auto* bench = app.add_subcommand("benchmark", "regenerate the error, timing and sweep tables");
    std::string bench_seeds, bench_out = "benchmark";
    double bench_snr = 40.0;
    bool bench_check = false;
    bench->add_option("--seeds", bench_seeds, "seed list, e.g. 1-20");
    bench->add_option("--snr-db", bench_snr, "measurement SNR in dB");
    bench->add_option("-o,--out", bench_out, "output directory");
    bench->add_flag("--check", bench_check, "exit nonzero if an acceptance check fails");

    auto* rep = app.add_subcommand("report", "aggregate run reports into tables");
    std::vector<std::string> rep_in;
    std::string rep_out = "report";
    bool rep_sweep = false;
    rep->add_option("-i,--input", rep_in, "run report JSON files")->required();
    rep->add_option("-o,--out", rep_out, "output directory");
    rep->add_flag("--sweep", rep_sweep, "also write the support-threshold sweep table");

    auto* cal = app.add_subcommand("calibrate", "grid-search the C-SALSA constants");
    ConfigFlags cal_f;
    cal_f.add_to(cal);

    CLI11_PARSE(app, argc, argv);
    try {
        if (sim->parsed()) return cmd_simulate(sim_f, sim_out);
        if (rec->parsed()) return cmd_reconstruct(rec_f, rec_in, rec_out);
        if (bench->parsed()) return cmd_benchmark(bench_seeds, bench_snr, bench_out, bench_check);
        if (rep->parsed()) return cmd_report(rep_in, rep_out, rep_sweep);
        if (cal->parsed()) return cmd_calibrate(cal_f);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
