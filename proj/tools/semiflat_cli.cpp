#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include <semiflat/scenario.hpp>

namespace fs = std::filesystem;
using namespace semiflat;

namespace {

std::vector<fs::path> bundled_scenarios() {
    std::vector<fs::path> out;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(SEMIFLAT_SCENARIO_DIR, ec))
        if (entry.path().extension() == ".json") out.push_back(entry.path());
    std::sort(out.begin(), out.end());
    return out;
}

int list_scenarios() {
    for (const auto& path : bundled_scenarios()) {
        try {
            const auto sc = load_scenario(path);
            std::string model = sc.model;
            if (sc.model == "pair") model = sc.left + " x " + sc.right;
            else if (sc.model == "elliptic") model = sc.left;
            else if (sc.model == "isotrivial") model = "isotrivial order " + std::to_string(sc.isotrivial_order);
            std::string checks;
            for (const auto& c : sc.checks) checks += (checks.empty() ? "" : ",") + c;
            std::printf("%-36s %-24s %s\n", path.filename().string().c_str(), model.c_str(), checks.c_str());
        } catch (const std::exception& e) {
            std::printf("%-36s invalid: %s\n", path.filename().string().c_str(), e.what());
        }
    }
    return 0;
}

int run(const fs::path& path, const fs::path& out_dir, std::optional<std::uint64_t> seed, RunOptions opt) {
    Scenario sc;
    try {
        sc = load_scenario(path);
        if (seed) sc.seed = *seed;
    } catch (const std::exception& e) {
        Report rep{path.stem().string(), opt, {}, e.what()};
        std::fprintf(stderr, "config error: %s\n", e.what());
        try {
            write_outputs(rep, output_paths(out_dir, rep.scenario, nullptr));
        } catch (const std::exception& io) {
            std::fprintf(stderr, "%s\n", io.what());
        }
        return 2;
    }
    const auto paths = output_paths(out_dir, sc.name, &sc);
    Report partial{sc.name, opt, {}, {}};
    auto rep = run_scenario(sc, opt, [&](const CheckOutcome& c) {
        const bool ok = c.passed(opt.tolerance_scale);
        std::printf("%s %-16s %7.2fs", ok ? "PASS" : "FAIL", c.name.c_str(), c.seconds);
        for (const auto& e : c.expectations)
            std::printf("  %s=%.6g", e.quantity.c_str(), e.measured);
        if (!c.error.empty()) std::printf("  error: %s", c.error.c_str());
        std::printf("\n");
        std::fflush(stdout);
        // Keep a report on disk after every check in case a later one is killed.
        partial.checks.push_back(c);
        try {
            write_outputs(partial, paths);
        } catch (const std::exception& io) {
            std::fprintf(stderr, "%s\n", io.what());
        }
    });
    try {
        write_outputs(rep, paths);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 1;
    }
    std::printf("%s: %s (report %s)\n", sc.name.c_str(), rep.passed() ? "pass" : "fail", paths.report.string().c_str());
    return rep.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semi-flat metric checks on abelian fibrations"};
    bool list = false;
    std::string out_dir = "semiflat-out";
    std::uint64_t seed = 0;
    int threads = threads_from_env(1);
    double tolerance_scale = 1;
    app.add_flag("--list", list, "List bundled scenarios");
    app.add_option("--out", out_dir, "Directory for reports and CSV series");
    app.add_option("--seed", seed, "Override the scenario seed");
    app.add_option("--threads", threads, "Worker threads (default SEMIFLAT_THREADS or 1)")->check(CLI::PositiveNumber);
    app.add_option("--tolerance-scale", tolerance_scale, "Multiply every tolerance")->check(CLI::PositiveNumber);
    std::string scenario;
    auto* run_cmd = app.add_subcommand("run", "Run one scenario file");
    run_cmd->add_option("scenario", scenario, "Scenario JSON")->required();
    run_cmd->fallthrough();
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 2;
    }
    if (list) return list_scenarios();
    if (!*run_cmd) {
        std::cerr << app.help();
        return 2;
    }
    std::optional<std::uint64_t> seed_override;
    if (app.count("--seed")) seed_override = seed;
    return run(scenario, out_dir, seed_override, RunOptions{tolerance_scale, threads});
}
