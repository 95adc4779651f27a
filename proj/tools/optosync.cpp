// optosync command-line front end.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "optosync/config.hpp"
#include "optosync/io.hpp"
#include "optosync/orchestrator.hpp"
#include "optosync/svg.hpp"

namespace cli = optosync::cli;
namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 1;
constexpr int kExitCellsFailed = 3;

struct RunFlags {
    std::string config;
    std::optional<std::string> output;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> n_traj;
    std::optional<bool> figures;
    std::optional<bool> full_output;
    std::vector<std::string> sets;
    unsigned workers = 0;
    std::size_t stop_after = 0;
    bool quiet = false;
};

void add_run_flags(CLI::App* app, RunFlags& f) {
    app->add_option("config", f.config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    app->add_option("-o,--output", f.output, "output directory");
    app->add_option("--seed", f.seed, "master seed");
    app->add_option("--n-traj", f.n_traj, "trajectories per cell");
    app->add_flag_function(
        "--figures,!--no-figures", [&f](std::int64_t n) { f.figures = n > 0; }, "write SVG figures when complete");
    app->add_flag_function(
        "--full-output,!--no-full-output", [&f](std::int64_t n) { f.full_output = n > 0; },
        "write per-trajectory files");
    app->add_option("--set", f.sets, "override any field, e.g. --set params.coupling_k=0.2");
    app->add_option("-j,--workers", f.workers, "worker threads (default: $OPTOSYNC_WORKERS or all cores)");
    app->add_option("--stop-after", f.stop_after, "compute at most this many new cells, then stop")->group("");
    app->add_flag("-q,--quiet", f.quiet, "no per-cell progress lines");
}

int run_config(const RunFlags& f, std::optional<cli::Engine> engine) {
    cli::RunConfig cfg;
    try {
        cli::Overrides o;
        if (engine) o.engine = cli::to_string(*engine);
        o.output = f.output;
        o.seed = f.seed;
        o.n_traj = f.n_traj;
        o.figures = f.figures;
        o.full_output = f.full_output;
        o.assignments = f.sets;
        cfg = cli::load_config(f.config, o);
    } catch (const cli::SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }

    cli::RunOptions opt;
    opt.workers = f.workers;
    opt.max_cells = f.stop_after;
    opt.log = f.quiet ? nullptr : &std::cerr;
    cli::RunReport rep;
    try {
        rep = cli::run(cfg, opt);
        if (cfg.figures && rep.complete) optosync::svg::render_directory(cfg.output);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    std::cerr << cfg.output << ": " << rep.cells << " cells, " << rep.computed << " computed, " << rep.resumed
              << " resumed, " << rep.failed << " failed" << (rep.complete ? "" : ", incomplete") << "\n";
    return rep.failed ? kExitCellsFailed : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Synchronization of optomechanical oscillators: simulation and analysis"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(cli::kSoftwareName) + " " + cli::kSoftwareVersion);

    struct Sub {
        const char* name;
        const char* help;
        std::optional<cli::Engine> engine;
    };
    const Sub subs[] = {
        {"simulate", "Langevin (semiclassical) trajectories", cli::Engine::langevin},
        {"jump", "quantum-jump (MCWF) trajectories", cli::Engine::mcwf},
        {"sweep", "run any engine over the sweep axes of the config", std::nullopt},
        {"phase-model", "fixed points, regimes and potentials of the phase-only model", cli::Engine::phase_model},
        {"noise-budget", "shot-noise versus thermal-noise budget", cli::Engine::noise_budget},
        {"threshold-scan", "self-oscillation threshold of a single cell", cli::Engine::threshold_scan},
    };
    std::vector<RunFlags> flags(std::size(subs));
    std::vector<CLI::App*> apps;
    for (std::size_t i = 0; i < std::size(subs); ++i) {
        auto* sub = app.add_subcommand(subs[i].name, subs[i].help);
        add_run_flags(sub, flags[i]);
        apps.push_back(sub);
    }

    std::vector<std::string> analyze_files;
    std::string analyze_out = "analysis";
    cli::AnalysisSettings an;
    std::optional<double> tau_min;
    bool analyze_figures = true;
    auto* analyze = app.add_subcommand("analyze", "phase histogram and residence times of trajectory CSVs");
    analyze->add_option("files", analyze_files, "trajectory CSV files")->required()->check(CLI::ExistingFile);
    analyze->add_option("-o,--output", analyze_out, "output directory");
    analyze->add_option("--bins", an.histogram_bins, "histogram bins")->check(CLI::PositiveNumber);
    analyze->add_option("--hysteresis", an.hysteresis, "half-width of the switching band (rad)")
        ->check(CLI::Range(0.0, 1.5));
    analyze->add_option("--debounce", an.debounce_periods, "minimum dwell, in periods")->check(CLI::NonNegativeNumber);
    analyze->add_option("--tau-min", tau_min, "tail-fit cutoff, in periods")->check(CLI::NonNegativeNumber);
    analyze->add_flag("!--no-figures", analyze_figures, "skip the SVG figures");

    std::string render_dir;
    auto* render = app.add_subcommand("render", "SVG figures from the result files of a run directory");
    render->add_option("directory", render_dir, "run or analysis directory")->required();

    CLI11_PARSE(app, argc, argv);

    for (std::size_t i = 0; i < apps.size(); ++i)
        if (apps[i]->parsed()) return run_config(flags[i], subs[i].engine);

    if (analyze->parsed()) {
        try {
            if (tau_min) an.tau_min_periods = *tau_min;
            std::vector<fs::path> files(analyze_files.begin(), analyze_files.end());
            auto t = cli::analyze_trajectories(files, an, analyze_out);
            std::cout << optosync::io::to_csv(t);
            if (analyze_figures) optosync::svg::render_directory(analyze_out);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return kExitRuntime;
        }
        return 0;
    }
    if (render->parsed()) {
        try {
            for (const auto& p : optosync::svg::render_directory(render_dir)) std::cout << p.string() << "\n";
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return kExitRuntime;
        }
        return 0;
    }
    return 0;
}
