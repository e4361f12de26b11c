// Command-line front end. Runs built-in or file-based scenario ensembles
// and writes the requested output files.
//
// Exit codes: 0 success, 1 validation error, 2 numerical failure.

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "readyrules/readyrules.hpp"

namespace {

using namespace readyrules;

std::string default_out_dir() {
    if (const char* env = std::getenv("READYRULES_OUT")) return env;
    return "out";
}

std::filesystem::path ensure_out_dir(const std::string& dir) {
    std::filesystem::path p(dir);
    std::error_code ec;
    std::filesystem::create_directories(p, ec);
    if (ec)
        throw config_error("cannot create output directory '" + dir +
                           "': " + ec.message());
    return p;
}

struct RunConfig {
    std::string scenario;
    std::string file;
    std::string mode = "standard";
    long n = 1000;
    std::uint64_t seed = 1;
    double dt = 0.0;
    std::string out = default_out_dir();
    bool no_rule4 = false;
    std::vector<std::string> emit;
    int threads = 1;
};

// Rule 3a dissolution of a unit weight followed by rule 5 drift, sampled at
// a few step counts. A fixed series; scenario runs do not parameterize it.
std::vector<std::pair<long, ConsciousPulse>> pulse_series() {
    ConsciousPulse p = dissolve(1.0, ResolutionKernel{0.15}, 0.3, 12);
    const std::array<long, 6> marks{0, 10, 20, 40, 80, 160};
    std::vector<std::pair<long, ConsciousPulse>> snaps;
    long step = 0;
    for (long mark : marks) {
        for (; step < mark; ++step) p = drift_step(p, 0.05);
        snaps.emplace_back(mark, p);
    }
    return snaps;
}

int run_command(const RunConfig& cfg, bool have_scenario, bool have_file) {
    if (have_scenario == have_file)
        throw config_error("provide exactly one of --scenario or --file");

    const Scenario sc = have_scenario ? build(cfg.scenario) : load(cfg.file);
    const RuleMode mode{variant_from_string(cfg.mode), !cfg.no_rule4};

    RunOptions opts;
    opts.dt_override = cfg.dt;
    opts.threads = cfg.threads;

    const auto records = run_trajectories(sc, mode, cfg.n, cfg.seed, opts);
    const EnsembleStats es = aggregate(records, sc);

    std::cout << "scenario: " << sc.name << '\n'
              << "mode: " << to_string(mode.variant) << " (rule 4 "
              << (mode.rule4_enabled && sc.rule4_enabled ? "on" : "off") << ")\n"
              << "trajectories: " << es.n << " (base seed " << cfg.seed << ")\n"
              << "outcomes:\n";
    for (const auto& [key, count] : es.outcomes)
        std::cout << "  " << key << ": " << count << " ("
                  << static_cast<double>(count) / static_cast<double>(es.n) << ")\n";
    if (es.n_hit > 0)
        std::cout << "hits: " << es.n_hit << " of " << es.n << ", mean t_sc "
                  << es.mean_t_sc << '\n';
    else
        std::cout << "hits: 0 of " << es.n << '\n';

    if (es.forbidden_transitions > 0)
        std::cout << "WARNING: " << es.forbidden_transitions << " of " << es.n
                  << " trajectories reduced through a coupling rule 4 would mask;\n"
                  << "         with rule 4 enabled these transitions cannot occur.\n";

    const std::filesystem::path dir = ensure_out_dir(cfg.out);
    auto wrote = [](const std::filesystem::path& p) {
        std::cout << "wrote " << p.string() << '\n';
    };
    for (const std::string& what : cfg.emit) {
        if (what == "stats") {
            const auto summary = dir / "summary.json";
            write_summary_json(sc, mode, es.n, cfg.seed, es, summary.string());
            wrote(summary);
            const auto outcomes = dir / "outcomes.csv";
            write_outcomes_csv(es, outcomes.string());
            wrote(outcomes);
        } else if (what == "histogram") {
            const auto hist = dir / "hit_times.csv";
            write_histogram_csv(es.t_sc_hist, hist.string());
            wrote(hist);
        } else if (what == "trace") {
            RunOptions topts = opts;
            topts.collect_trace = true;
            const TrajectoryRecord rec = run_trajectory(sc, mode, cfg.seed, topts);
            int ncols = 1;
            for (const auto& p : rec.trace)
                ncols = std::max(ncols, static_cast<int>(p.moduli.size()));
            const auto trace = dir / "trace.csv";
            write_trace_csv(rec, ncols, trace.string());
            wrote(trace);
        } else if (what == "pulse") {
            const auto pulse = dir / "pulse.csv";
            write_pulse_csv(pulse_series(), pulse.string());
            wrote(pulse);
        }
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"five-rule stochastic state-reduction runner"};
    app.require_subcommand(1);

    RunConfig cfg;
    auto* run = app.add_subcommand("run", "run a scenario ensemble and write outputs");
    auto* opt_scenario =
        run->add_option("--scenario", cfg.scenario, "built-in scenario name");
    auto* opt_file = run->add_option("--file", cfg.file, "scenario JSON file");
    opt_scenario->excludes(opt_file);
    opt_file->excludes(opt_scenario);
    run->add_option("--mode", cfg.mode, "reduction variant")
        ->check(CLI::IsMember({"standard", "objective"}))
        ->capture_default_str();
    run->add_option("-N", cfg.n, "number of trajectories")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    run->add_option("--seed", cfg.seed, "base seed; trajectory i uses seed+i")
        ->capture_default_str();
    run->add_option("--dt", cfg.dt, "fixed integrator step (default: auto)")
        ->check(CLI::PositiveNumber);
    run->add_option("--out", cfg.out, "output directory (env READYRULES_OUT)")
        ->capture_default_str();
    run->add_flag("--no-rule4", cfg.no_rule4, "disable coupling masking");
    run->add_option("--emit", cfg.emit,
                    "outputs to write: stats, histogram, trace, pulse")
        ->delimiter(',')
        ->check(CLI::IsMember({"stats", "histogram", "trace", "pulse"}));
    run->add_option("--threads", cfg.threads, "worker threads")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    auto* verify = app.add_subcommand("verify", "run the acceptance checklist");
    auto* list = app.add_subcommand("list-scenarios", "print built-in scenario names");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (list->parsed()) {
            for (const auto& name : readyrules::catalog_names())
                std::cout << name << '\n';
            return 0;
        }
        if (verify->parsed())
            return readyrules::report_acceptance(std::cout) == 0 ? 0 : 1;
        if (cfg.emit.empty()) cfg.emit = {"stats", "histogram"};
        return run_command(cfg, opt_scenario->count() > 0, opt_file->count() > 0);
    } catch (const readyrules::validation_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const readyrules::numerical_error& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
