// Command-line experiment runner: parses a sectioned key=value config file
// (plus flag overrides), runs the requested experiment, and writes CSV
// artifacts and a manifest into the output directory.
//
// Exit codes: 0 ok, 1 config error, 2 runtime error.

#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include <jctraj/config.hpp>
#include <jctraj/experiments.hpp>
#include <jctraj/version.hpp>

int main(int argc, char** argv) {
    CLI::App app{"cavity QED homodyne trajectory toolkit"};
    app.set_version_flag("--version", jctraj::version_string);

    std::string config_path, experiment, out_dir;
    std::uint64_t seed = 0;
    int workers = -1;
    double photon_number = -1.0;
    bool validate_only = false;

    app.add_option("--config", config_path, "config file (sectioned key = value)");
    app.add_option("--experiment", experiment,
                   "experiment name: steady, trajectory, ensemble, fig1b, fig2, fig3, fig4, "
                   "hmm-eval");
    app.add_option("--seed", seed, "master seed (record i uses child_seed(seed, i))");
    app.add_option("--workers", workers, "worker threads (0 = hardware concurrency)")
        ->check(CLI::NonNegativeNumber);
    app.add_option("--out", out_dir, "output directory for artifacts");
    app.add_option("--N", photon_number, "target empty-cavity photon number (sets drive)")
        ->check(CLI::NonNegativeNumber);
    app.add_flag("--validate", validate_only,
                 "check the configuration, print derived quantities, and exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;  // usage problems are config errors
    }

    jctraj::RunConfig cfg;
    try {
        if (!config_path.empty()) cfg = jctraj::parse_config_file(config_path);
        if (!experiment.empty()) {
            if (!jctraj::experiment_names().count(experiment)) {
                std::string msg = "unknown experiment '" + experiment + "'; valid:";
                for (const std::string& n : jctraj::experiment_names()) msg += " " + n;
                throw jctraj::config_error(msg);
            }
            cfg.experiment = experiment;
        }
        if (app.count("--seed") > 0) cfg.seed = seed;
        if (workers >= 0) cfg.workers = workers;
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (photon_number >= 0.0) {
            cfg.photon_number = photon_number;
            cfg.photon_number_set = true;
            cfg.drive_set_directly = false;
        }
    } catch (const jctraj::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    }

    if (validate_only) {
        try {
            jctraj::validate_config(cfg, &std::cout);
        } catch (const std::exception& e) {
            std::cerr << "config error: " << e.what() << "\n";
            return 1;
        }
        return 0;
    }

    try {
        const jctraj::ExperimentResult res = jctraj::run_experiment(cfg, &std::cout);
        std::cout << "artifacts in " << cfg.out_dir << ":";
        for (const std::string& a : res.artifacts) std::cout << ' ' << a;
        std::cout << "\n";
        if (!res.failures.empty()) {
            std::cerr << "runtime error: " << res.failures.size()
                      << " sweep cell(s) failed; completed cells were retained:\n";
            for (const std::string& f : res.failures) std::cerr << "  " << f << "\n";
            return 2;
        }
    } catch (const jctraj::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
