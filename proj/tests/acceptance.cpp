// Acceptance run: regenerates the benchmark on seeds 1-20 (or argv[1]) and
// prints one PASS/FAIL line per criterion. Exit status 1 if any fails.

#include <iostream>
#include <string>

#include "jseit/benchmark.hpp"
#include "jseit/io.hpp"

int main(int argc, char** argv) {
    using namespace jseit;
    try {
        BenchmarkOptions opt;
        if (argc > 1) opt.seeds = parse_seeds(argv[1]);
        opt.progress = [](const std::string& k) { std::cerr << "running " << k << std::endl; };
        Workspace ws;
        const BenchmarkRuns br = run_benchmark(ws, opt);
        for (const auto& [key, r] : br.reports)
            std::cout << key << ": mean error " << r.error.mean << " +- " << r.error.stddev << " (" << r.errors.size()
                      << " seeds), conductivity solve " << r.mean_times.conductivity << " s\n";
        bool all = true;
        for (const auto& c : acceptance_checks(br, opt.music_excitations)) {
            std::cout << format_check(c) << std::endl;
            all = all && c.pass;
        }
        std::cout << (all ? "all acceptance criteria passed" : "acceptance criteria failed") << std::endl;
        return all ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "acceptance: " << e.what() << '\n';
        return 2;
    }
}
