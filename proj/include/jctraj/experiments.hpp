#pragma once

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "analysis.hpp"
#include "config.hpp"
#include "hmm.hpp"
#include "io.hpp"
#include "model.hpp"
#include "signal.hpp"
#include "trajectory.hpp"
#include "version.hpp"

namespace jctraj {

struct ExperimentResult {
    std::vector<std::string> artifacts;  // file names relative to out_dir
    nlohmann::json summary;
    std::vector<std::string> failures;  // failed sweep cells, if any
};

namespace detail {

inline SystemParams system_from(const RunConfig& cfg, double photon_number) {
    SystemParams p = cfg.params;
    if (!cfg.drive_set_directly) p.drive = drive_from_photon_number(p, photon_number);
    p.validate();
    return p;
}

inline SimConfig sim_from(const RunConfig& cfg, double t_end_us) {
    SimConfig sim;
    sim.t_end = t_end_us * 1e-6;
    sim.sample_rate = cfg.sample_rate;
    sim.oversample = cfg.oversample;
    sim.n_max = cfg.n_max;
    sim.steps_per_rate = cfg.steps_per_rate;
    sim.truncation_threshold = cfg.truncation_threshold;
    sim.seed = cfg.seed;
    sim.dark_lifetime = cfg.dark_lifetime_us * 1e-6;
    sim.validate();
    return sim;
}

inline DetectorConfig det_from(const RunConfig& cfg, const std::string& preset) {
    DetectorConfig det;
    det.sample_rate = cfg.sample_rate;
    det.oversample = cfg.oversample;
    det.filter_preset = preset;
    det.noise_scale = cfg.noise_scale;
    det.validate();
    return det;
}

inline std::string index_name(const char* stem, int i, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%03d.%s", stem, i, ext);
    return buf;
}

// Per-record scalar summary used by the ensemble experiment.
struct RecordStats {
    std::uint64_t index = 0, seed = 0;
    double mean_y = 0.0, var_y = 0.0, mean_n = 0.0;
    std::size_t n_jumps = 0;
    double dark_time_us = std::numeric_limits<double>::infinity();
};

inline RecordStats record_stats(const TrajectoryRecord& rec) {
    RecordStats st;
    st.index = rec.index;
    st.seed = rec.seed;
    st.n_jumps = rec.jump_times.size();
    st.dark_time_us = rec.dark_time * 1e6;
    const double t_hi = std::min(rec.dark_time, rec.t_end);
    std::size_t lo = static_cast<std::size_t>(std::max(0.0, std::ceil(rec.settle_time / rec.kept_dt)));
    std::size_t hi = std::min<std::size_t>(
        rec.size(), static_cast<std::size_t>(std::max(0.0, std::floor(t_hi / rec.kept_dt))));
    if (lo >= hi) {
        lo = 0;
        hi = rec.size();
    }
    double s = 0.0, s2 = 0.0, sn = 0.0;
    for (std::size_t k = lo; k < hi; ++k) {
        s += rec.y_cond[k];
        s2 += rec.y_cond[k] * rec.y_cond[k];
        sn += rec.n_cond[k];
    }
    const double m = static_cast<double>(hi - lo);
    st.mean_y = s / m;
    st.var_y = std::max(0.0, s2 / m - st.mean_y * st.mean_y);
    st.mean_n = sn / m;
    return st;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Experiment drivers.  Each writes its artifacts under out_dir and returns
// the relative artifact names plus a machine-readable summary.  Nothing in
// any artifact depends on worker count, absolute paths, or wall-clock time.
// ---------------------------------------------------------------------------

inline ExperimentResult run_steady(const RunConfig& cfg, const std::string& out_dir,
                                   std::ostream* log) {
    const SystemParams p = detail::system_from(cfg, cfg.photon_number);
    const double n_target = cfg.drive_set_directly
                                ? (p.drive / p.kappa) * (p.drive / p.kappa)
                                : cfg.photon_number;
    const int n_max = cfg.n_max > 0 ? cfg.n_max : suggest_n_max(n_target);
    const Space sp = build_space(n_max);
    const OperatorSet ops = operator_set(sp);
    SteadyStateInfo info;
    const QuantumState ss = steady_state(p, sp, &info);

    const double n_exp = expectation_real(ops.n_photon, ss);
    const double x_exp = expectation_real(ops.x, ss);
    const double y_exp = expectation_real(ops.y, ss);
    const double excited = expectation_real(Operator(ops.sp * ops.sm), ss);
    const Operator y2op = ops.y * ops.y;
    const double y2 = expectation(y2op, ss).real();
    const double y4 = expectation(Operator(y2op * y2op), ss).real();
    const double mu = steady_branch_mu(ss, ops);
    const double mu_inf = p.g / (2.0 * p.kappa);

    ExperimentResult res;
    {
        std::ofstream f = detail::open_out(out_dir + "/steady.csv");
        f << "key,value\n";
        const auto row = [&](const char* k, double v) { f << k << ',' << fmt_g17(v) << '\n'; };
        row("photon_number_target", n_target);
        row("n_max", n_max);
        row("dim", sp.dim());
        row("n_expectation", n_exp);
        row("x_expectation", x_exp);
        row("y_expectation", y_exp);
        row("excited_population", excited);
        row("y2_moment", y2);
        row("y4_moment", y4);
        row("branch_mu", mu);
        row("splitting", 2.0 * mu);
        row("branch_mu_asymptotic", mu_inf);
        row("residual", info.residual);
    }
    res.artifacts.push_back("steady.csv");
    res.summary = {{"photon_number_target", n_target}, {"n_expectation", n_exp},
                   {"y_expectation", y_exp},           {"excited_population", excited},
                   {"branch_mu", mu},                  {"splitting", 2.0 * mu},
                   {"branch_mu_asymptotic", mu_inf},   {"residual", info.residual}};
    if (log) {
        *log << "steady state at drive targeting N = " << n_target << " (n_max " << n_max
             << ")\n"
             << "  <a'a> = " << n_exp << "  (empty-cavity target " << n_target << ")\n"
             << "  <X> = " << x_exp << ", <Y> = " << y_exp << "\n"
             << "  excited-state population = " << excited << "\n"
             << "  Y marginal branches at +-" << mu << " (moment-matched), asymptotic +-"
             << mu_inf << " = g/2kappa\n"
             << "  splitting = " << 2.0 * mu << "\n";
    }
    return res;
}

inline ExperimentResult run_trajectory_experiment(const RunConfig& cfg,
                                                  const std::string& out_dir, std::ostream* log) {
    const SystemParams p = detail::system_from(cfg, cfg.photon_number);
    const SimConfig sim = detail::sim_from(cfg, cfg.t_end_us);
    const DetectorConfig det = detail::det_from(cfg, cfg.filter_preset);

    const TrajectoryRecord rec = simulate_trajectory(p, sim, 0);
    const PhotocurrentTrace tr = synthesize_photocurrent(rec, det);

    ExperimentResult res;
    write_trajectory_csv(out_dir + "/trajectory.csv", rec);
    write_trajectory_sidecar(out_dir + "/trajectory.json", rec);
    write_trace_csv(out_dir + "/trace.csv", tr);
    res.artifacts = {"trajectory.csv", "trajectory.json", "trace.csv"};
    res.summary = {{"child_seed", rec.seed},
                   {"n_max", rec.n_max},
                   {"record_samples", rec.size()},
                   {"trace_samples", tr.y.size()},
                   {"n_jumps", rec.jump_times.size()},
                   {"shot_sigma", tr.shot_sigma}};
    if (std::isfinite(rec.dark_time)) res.summary["dark_time_us"] = rec.dark_time * 1e6;
    if (log)
        *log << "trajectory: " << rec.size() << " record samples, " << rec.jump_times.size()
             << " jumps, trace sigma_shot = " << tr.shot_sigma << "\n";
    return res;
}

inline ExperimentResult run_ensemble(const RunConfig& cfg, const std::string& out_dir,
                                     std::ostream* log) {
    const SystemParams p = detail::system_from(cfg, cfg.photon_number);
    const SimConfig sim = detail::sim_from(cfg, cfg.t_end_us);
    const DetectorConfig det = detail::det_from(cfg, cfg.filter_preset);

    ExperimentResult res;
    std::vector<double> sum_y, sum_n;
    std::vector<detail::RecordStats> stats;
    double kept_dt = 0.0;

    ensemble_stream(
        p, sim, cfg.n_traj,
        [&](TrajectoryRecord rec) {
            if (sum_y.empty()) {
                sum_y.assign(rec.size(), 0.0);
                sum_n.assign(rec.size(), 0.0);
                kept_dt = rec.kept_dt;
            }
            for (std::size_t k = 0; k < rec.size(); ++k) {
                sum_y[k] += rec.y_cond[k];
                sum_n[k] += rec.n_cond[k];
            }
            stats.push_back(detail::record_stats(rec));
            const PhotocurrentTrace tr = synthesize_photocurrent(rec, det);
            const std::string name =
                detail::index_name("trace", static_cast<int>(rec.index), "csv");
            write_trace_csv(out_dir + "/" + name, tr);
            res.artifacts.push_back(name);
            if (log) *log << "ensemble: record " << rec.index << " done\n";
        },
        cfg.workers);

    {
        std::ofstream f = detail::open_out(out_dir + "/ensemble_mean.csv");
        f << "t_us,y_cond_mean,n_cond_mean\n";
        for (std::size_t k = 0; k < sum_y.size(); ++k)
            f << fmt_g17(static_cast<double>(k) * kept_dt * 1e6) << ','
              << fmt_g17(sum_y[k] / cfg.n_traj) << ',' << fmt_g17(sum_n[k] / cfg.n_traj) << '\n';
    }
    {
        std::ofstream f = detail::open_out(out_dir + "/ensemble_summary.csv");
        f << "index,seed,mean_y_cond,var_y_cond,mean_n_cond,n_jumps,dark_time_us\n";
        for (const auto& st : stats)
            f << st.index << ',' << st.seed << ',' << fmt_g17(st.mean_y) << ','
              << fmt_g17(st.var_y) << ',' << fmt_g17(st.mean_n) << ',' << st.n_jumps << ','
              << fmt_g17(st.dark_time_us) << '\n';
    }
    res.artifacts.push_back("ensemble_mean.csv");
    res.artifacts.push_back("ensemble_summary.csv");
    res.summary = {{"n_traj", cfg.n_traj}};
    return res;
}

inline ExperimentResult run_fig1b(const RunConfig& cfg, const std::string& out_dir,
                                  std::ostream* log) {
    // Published operating point: drive targeting N = 20, 0.1-8 MHz bandpass.
    const double N = cfg.photon_number_set ? cfg.photon_number : 20.0;
    const double t_end_us = cfg.t_end_set ? cfg.t_end_us : 16.0;
    const int n_traj = cfg.n_traj_set ? cfg.n_traj : 12;
    const std::string preset = cfg.filter_preset_set ? cfg.filter_preset : "bandpass-0.1-8mhz";

    const SystemParams p = detail::system_from(cfg, N);
    const SimConfig sim = detail::sim_from(cfg, t_end_us);
    const DetectorConfig det = detail::det_from(cfg, preset);

    SplittingAccumulator acc;
    ensemble_stream(
        p, sim, n_traj,
        [&](TrajectoryRecord rec) {
            acc.add(synthesize_photocurrent(rec, det));
            if (log) *log << "fig1b: record " << rec.index << " done\n";
        },
        cfg.workers);
    const SplittingMeasurement m = acc.finalize(200, child_seed(cfg.seed, 1u << 20));

    ExperimentResult res;
    write_histogram_fit_csv(out_dir + "/fig1b.csv", m.hist, m.fit);
    res.artifacts = {"fig1b.csv"};
    res.summary = {{"photon_number", N},
                   {"filter_preset", preset},
                   {"splitting", m.splitting},
                   {"splitting_stderr", m.stderr_boot},
                   {"centroids", {m.fit.c1, m.fit.c2}},
                   {"sigma_shot", m.fit.sigma},
                   {"bimodality_p_value", m.fit.p_value},
                   {"n_samples", m.n_samples}};
    if (log)
        *log << "fig1b: splitting " << m.splitting << " +- " << m.stderr_boot
             << ", two-Gaussian vs one-Gaussian p = " << m.fit.p_value << "\n";
    return res;
}

inline ExperimentResult run_fig2(const RunConfig& cfg, const std::string& out_dir,
                                 std::ostream* log) {
    const double t_end_us = cfg.t_end_set ? cfg.t_end_us : 16.0;
    const int n_traj = cfg.n_traj_set ? cfg.n_traj : 12;

    ExperimentResult res;
    std::vector<SplittingRow> rows;
    nlohmann::json cells = nlohmann::json::array();

    for (double N : cfg.photon_numbers) {
        try {
            const SystemParams p = detail::system_from(cfg, N);
            SimConfig sim = detail::sim_from(cfg, t_end_us);
            // One ensemble per N, shared across presets through a per-N seed.
            sim.seed = child_seed(cfg.seed, static_cast<std::uint64_t>(std::llround(N * 64.0)));
            std::vector<DetectorConfig> dets;
            std::vector<SplittingAccumulator> accs(cfg.presets.size());
            for (const std::string& pr : cfg.presets) dets.push_back(detail::det_from(cfg, pr));

            ensemble_stream(
                p, sim, n_traj,
                [&](TrajectoryRecord rec) {
                    for (std::size_t j = 0; j < dets.size(); ++j)
                        accs[j].add(synthesize_photocurrent(rec, dets[j]));
                },
                cfg.workers);

            for (std::size_t j = 0; j < dets.size(); ++j) {
                const SplittingMeasurement m = accs[j].finalize(200, child_seed(sim.seed, j));
                SplittingRow row;
                row.photon_number = N;
                row.band_mhz = preset_band_mhz(cfg.presets[j]);
                row.splitting = m.splitting;
                row.stderr_boot = m.stderr_boot;
                rows.push_back(row);
                cells.push_back({{"N", N},
                                 {"preset", cfg.presets[j]},
                                 {"splitting", m.splitting},
                                 {"stderr", m.stderr_boot},
                                 {"p_value", m.fit.p_value}});
                if (log)
                    *log << "fig2: N = " << N << ", " << cfg.presets[j] << ": splitting "
                         << m.splitting << " +- " << m.stderr_boot << "\n";
            }
        } catch (const std::exception& ex) {
            res.failures.push_back("N=" + std::to_string(N) + ": " + ex.what());
            if (log) *log << "fig2: N = " << N << " FAILED: " << ex.what() << "\n";
        }
    }

    write_splitting_csv(out_dir + "/fig2.csv", rows);
    res.artifacts = {"fig2.csv"};
    res.summary = {{"cells", cells}, {"n_traj", n_traj}, {"t_end_us", t_end_us}};
    return res;
}

inline ExperimentResult run_fig3(const RunConfig& cfg, const std::string& out_dir,
                                 std::ostream* log) {
    const double t_end_us = cfg.t_end_set ? cfg.t_end_us : 25.0;
    const int n_traj = cfg.n_traj_set ? cfg.n_traj : 8;
    const std::string base_preset = cfg.filter_preset_set ? cfg.filter_preset : "lowpass-10mhz";
    const double max_lag_s = 1.5e-6;

    struct Case {
        std::string label;
        double N;
        double delta_atom;
    };
    const std::vector<Case> cases = {{"N4", 4.0, 0.0},
                                     {"N20", 20.0, 0.0},
                                     {"N56", 56.0, 0.0},
                                     {"N20-detuned-40MHz", 20.0, mhz(40.0)}};

    ExperimentResult res;
    std::vector<std::pair<std::string, AcfResult>> acfs;
    nlohmann::json case_summaries = nlohmann::json::array();

    for (std::size_t ci = 0; ci < cases.size(); ++ci) {
        const Case& c = cases[ci];
        try {
            SystemParams p = detail::system_from(cfg, c.N);
            p.delta_atom = c.delta_atom != 0.0 ? c.delta_atom : cfg.params.delta_atom;
            SimConfig sim = detail::sim_from(cfg, t_end_us);
            sim.seed = child_seed(cfg.seed, 4096 + ci);
            const DetectorConfig det = detail::det_from(cfg, base_preset);

            std::vector<PhotocurrentTrace> traces;
            traces.reserve(static_cast<std::size_t>(n_traj));
            ensemble_stream(
                p, sim, n_traj,
                [&](TrajectoryRecord rec) {
                    PhotocurrentTrace tr = synthesize_photocurrent(rec, det);
                    tr = apply_filter(tr, "achighpass-20khz");
                    traces.push_back(std::move(tr));
                },
                cfg.workers);

            const AcfResult acf = ensemble_autocorrelation(traces, max_lag_s);
            const double tau = integral_decay_time(acf);
            acfs.emplace_back(c.label, acf);
            case_summaries.push_back({{"case", c.label},
                                      {"acf0", acf.mean.empty() ? 0.0 : acf.mean[0]},
                                      {"integral_decay_time_us", tau * 1e6}});
            if (log)
                *log << "fig3: " << c.label << ": acf(0) = "
                     << (acf.mean.empty() ? 0.0 : acf.mean[0])
                     << ", integral decay time = " << tau * 1e6 << " us\n";
        } catch (const std::exception& ex) {
            res.failures.push_back(c.label + ": " + ex.what());
            if (log) *log << "fig3: " << c.label << " FAILED: " << ex.what() << "\n";
        }
    }

    write_acf_csv(out_dir + "/fig3.csv", acfs);
    res.artifacts = {"fig3.csv"};
    res.summary = {{"cases", case_summaries}, {"n_traj", n_traj}, {"t_end_us", t_end_us}};
    return res;
}

inline ExperimentResult run_fig4(const RunConfig& cfg, const std::string& out_dir,
                                 std::ostream* log) {
    // Published operating point: N ~ 37 at 10 MHz bandwidth, ~10 us record,
    // shot noise at the experimental signal-to-noise ratio (eta = 0.5).
    const double N = cfg.photon_number_set ? cfg.photon_number : 37.0;
    const double t_end_us = cfg.t_end_set ? cfg.t_end_us : 10.0;
    const std::string preset = cfg.filter_preset_set ? cfg.filter_preset : "lowpass-10mhz";

    SystemParams p = detail::system_from(cfg, N);
    if (!cfg.eta_set) p.eta = 0.5;
    const SimConfig sim = detail::sim_from(cfg, t_end_us);
    const DetectorConfig det = detail::det_from(cfg, preset);

    const TrajectoryRecord rec = simulate_trajectory(p, sim, 0);
    const PhotocurrentTrace tr = synthesize_photocurrent(rec, det);

    const double mu = p.g / (2.0 * p.kappa);
    const double sigma = tr.shot_sigma;
    const double switch_rate = cfg.switch_rate > 0.0 ? cfg.switch_rate : p.gamma_perp / 2.0;
    const double dark_rate = 1.0 / (cfg.hmm_dark_lifetime_us * 1e-6);
    const HmmSpec h = build_hmm(mu, sigma, 1.0 / tr.sample_rate, switch_rate, dark_rate);
    const DecodedPath dec = decode_telegraph(h, tr.y);

    ExperimentResult res;
    write_trajectory_csv(out_dir + "/conditional.csv", rec);
    write_trace_csv(out_dir + "/trace.csv", tr);
    write_decoded_csv(out_dir + "/decoded.csv", tr, dec);
    res.artifacts = {"conditional.csv", "trace.csv", "decoded.csv"};

    std::array<std::size_t, 3> occupancy{0, 0, 0};
    for (int s : dec.states) occupancy[static_cast<std::size_t>(s)]++;
    res.summary = {{"photon_number", N},
                   {"emission_mu", mu},
                   {"emission_sigma", sigma},
                   {"switch_rate_hz", switch_rate},
                   {"decoded_occupancy",
                    {{"neg", occupancy[0]}, {"pos", occupancy[1]}, {"dark", occupancy[2]}}},
                   {"log_likelihood", dec.log_likelihood}};
    if (log)
        *log << "fig4: decoded occupancy neg/pos/dark = " << occupancy[0] << "/" << occupancy[1]
             << "/" << occupancy[2] << ", log L = " << dec.log_likelihood << "\n";
    return res;
}

inline ExperimentResult run_hmm_eval(const RunConfig& cfg, const std::string& out_dir,
                                     std::ostream* log) {
    const double N = cfg.photon_number_set ? cfg.photon_number : 37.0;
    const double t_end_us = cfg.t_end_set ? cfg.t_end_us : 10.0;
    const std::string preset = cfg.filter_preset_set ? cfg.filter_preset : "lowpass-10mhz";
    const double dark_lifetime_us = cfg.dark_lifetime_set ? cfg.dark_lifetime_us : 30.0;

    SystemParams p = detail::system_from(cfg, N);
    if (!cfg.eta_set) p.eta = 0.5;  // experimental signal-to-noise operating point
    RunConfig cfg2 = cfg;
    cfg2.dark_lifetime_us = dark_lifetime_us;
    const SimConfig sim = detail::sim_from(cfg2, t_end_us);
    const DetectorConfig det = detail::det_from(cfg, preset);

    const double mu = p.g / (2.0 * p.kappa);
    const double sigma = shot_noise_sigma(det, p);
    const double switch_rate = cfg.switch_rate > 0.0 ? cfg.switch_rate : p.gamma_perp / 2.0;
    const double dark_rate = 1.0 / (cfg.hmm_dark_lifetime_us * 1e-6);
    const HmmSpec h = build_hmm(mu, sigma, 1.0 / cfg.sample_rate, switch_rate, dark_rate);

    const AccuracyReport rep = evaluate_accuracy(p, sim, det, h, cfg.n_trials, cfg.seed);

    ExperimentResult res;
    write_confusion_report(out_dir + "/confusion.txt", rep);
    res.artifacts = {"confusion.txt"};
    res.summary = {{"photon_number", N},
                   {"n_trials", rep.n_trials},
                   {"n_samples", rep.n_samples},
                   {"misclassification", rep.misclassification},
                   {"emission_mu", rep.mu},
                   {"emission_sigma", rep.sigma}};
    if (log)
        *log << "hmm-eval: misclassification = " << rep.misclassification << " over "
             << rep.n_samples << " samples in " << rep.n_trials << " trials\n";
    return res;
}

// Run the experiment named in the config, write artifacts plus manifest.json
// under cfg.out_dir, and return what was produced.  Partial sweep failures
// are reported in the result (and the manifest) rather than thrown, so
// completed cells are always retained; the caller decides the exit status.
inline ExperimentResult run_experiment(const RunConfig& cfg, std::ostream* log = nullptr) {
    std::filesystem::create_directories(cfg.out_dir);

    ExperimentResult res;
    if (cfg.experiment == "steady") res = run_steady(cfg, cfg.out_dir, log);
    else if (cfg.experiment == "trajectory") res = run_trajectory_experiment(cfg, cfg.out_dir, log);
    else if (cfg.experiment == "ensemble") res = run_ensemble(cfg, cfg.out_dir, log);
    else if (cfg.experiment == "fig1b") res = run_fig1b(cfg, cfg.out_dir, log);
    else if (cfg.experiment == "fig2") res = run_fig2(cfg, cfg.out_dir, log);
    else if (cfg.experiment == "fig3") res = run_fig3(cfg, cfg.out_dir, log);
    else if (cfg.experiment == "fig4") res = run_fig4(cfg, cfg.out_dir, log);
    else if (cfg.experiment == "hmm-eval") res = run_hmm_eval(cfg, cfg.out_dir, log);
    else throw config_error("unknown experiment: " + cfg.experiment);

    const std::string hash = fnv1a_hex(canonical_config_text(cfg));
    nlohmann::json artifacts = nlohmann::json::array();
    for (const std::string& a : res.artifacts)
        artifacts.push_back({{"file", a}, {"config_hash", hash}});
    nlohmann::json manifest = {{"experiment", cfg.experiment},
                               {"version", version_string},
                               {"config_hash", hash},
                               {"seed", cfg.seed},
                               {"seed_scheme", "record i uses child_seed(seed, i)"},
                               {"artifacts", artifacts},
                               {"summary", res.summary}};
    if (!res.failures.empty()) manifest["failed_cells"] = res.failures;
    write_manifest(cfg.out_dir + "/manifest.json", manifest);
    res.artifacts.push_back("manifest.json");
    return res;
}

// Configuration diagnostics: never throws for a structurally valid config;
// returns human-readable findings and prints derived rates.
inline std::vector<std::string> validate_config(const RunConfig& cfg, std::ostream* log = nullptr) {
    std::vector<std::string> notes;
    const SystemParams p = detail::system_from(cfg, cfg.photon_number);
    const double N = (p.drive / p.kappa) * (p.drive / p.kappa);
    const double C = cooperativity(p);
    const double dwell_us = 2.0 / p.gamma_perp * 1e6;

    if (log) {
        *log << "derived quantities:\n"
             << "  drive E = " << p.drive / mhz(1.0) << " MHz (as rate/2pi), targets N = " << N
             << "\n"
             << "  cooperativity C = " << C << "\n"
             << "  mean switching period 2/gamma_perp = " << dwell_us << " us\n"
             << "  branch amplitude g/2kappa = " << p.g / (2.0 * p.kappa) << "\n";
    }

    const int needed = suggest_n_max(N);
    if (cfg.n_max > 0 && cfg.n_max < needed)
        notes.push_back("n_max " + std::to_string(cfg.n_max) +
                        " is below the truncation heuristic N + 8 sqrt(N) + 10 = " +
                        std::to_string(needed) + " for N = " + std::to_string(N));

    const double nyquist_mhz = cfg.sample_rate * cfg.oversample / 2.0 / 1e6;
    const double band = preset_band_mhz(cfg.filter_preset);
    if (band > nyquist_mhz)
        notes.push_back("filter band " + std::to_string(band) +
                        " MHz exceeds the record-rate Nyquist frequency " +
                        std::to_string(nyquist_mhz) + " MHz");

    // Substep bound actually used by the integrator, reported for sanity.
    const double rate_max =
        std::abs(p.delta_cavity) + std::abs(p.delta_atom) + 2.0 * p.kappa + 2.0 * p.gamma_perp +
        p.drive + p.g * std::sqrt(static_cast<double>(std::max(1, needed)));
    const double dt_bound = 1.0 / (cfg.steps_per_rate * rate_max);
    if (log)
        *log << "  integrator substep bound dt <= " << dt_bound * 1e9 << " ns (steps_per_rate "
             << cfg.steps_per_rate << ")\n";

    if (cfg.sample_rate < p.gamma_perp)
        notes.push_back(
            "delivered sample rate is below twice the spontaneous switching rate "
            "gamma_perp/2; decoded telegraphs will be undersampled");

    if (log) {
        if (notes.empty()) {
            *log << "config ok\n";
        } else {
            for (const std::string& n : notes) *log << "warning: " << n << "\n";
        }
    }
    return notes;
}

}  // namespace jctraj
