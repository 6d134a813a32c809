#pragma once

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "params.hpp"
#include "signal.hpp"

namespace jctraj {

inline const std::set<std::string>& experiment_names() {
    static const std::set<std::string> names = {"steady",  "trajectory", "ensemble", "fig1b",
                                                "fig2",    "fig3",       "fig4",     "hmm-eval"};
    return names;
}

// Full run configuration with defaults reproducing the standard operating
// point.  Frequencies in the file are quoted in MHz (as frequency, not
// angular frequency); durations in microseconds.
struct RunConfig {
    // [run]
    std::string experiment = "trajectory";
    std::uint64_t seed = 1;
    int workers = 0;  // 0 = hardware concurrency
    std::string out_dir = "out";
    // [system]
    SystemParams params;
    bool eta_set = false;
    // [drive]
    double photon_number = 20.0;  // target empty-cavity photon number
    bool drive_set_directly = false;
    bool photon_number_set = false;  // true when the user chose a value
    // [sim]
    double t_end_us = 10.0;
    bool t_end_set = false;
    double sample_rate = 2.5e7;
    int oversample = 4;
    int n_max = -1;
    int steps_per_rate = 50;
    double truncation_threshold = 1e-6;
    double dark_lifetime_us = std::numeric_limits<double>::infinity();
    bool dark_lifetime_set = false;
    int n_traj = 8;
    bool n_traj_set = false;
    // [detector]
    std::string filter_preset = "lowpass-10mhz";
    bool filter_preset_set = false;
    double noise_scale = 1.0;
    // [hmm]
    double switch_rate = -1.0;  // rad-free 1/s; -1 = auto (gamma_perp / 2)
    double hmm_dark_lifetime_us = 30.0;
    int n_trials = 20;
    // [fig2]
    std::vector<double> photon_numbers = {1, 2, 4, 8, 14, 20, 30, 42, 56};
    std::vector<std::string> presets = {"lowpass-10mhz", "lowpass-2mhz"};

    std::string raw_text;  // exact file content, hashed into the manifest

    // Drive in rad/s after resolution of [drive] keys.
    double resolved_drive() const {
        return drive_set_directly ? params.drive : params.kappa * std::sqrt(photon_number);
    }
};

namespace detail {

struct IniEntry {
    std::string section, key, value;
    int line = 0;
};

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

inline std::vector<IniEntry> parse_ini(const std::string& text, const std::string& name) {
    std::vector<IniEntry> entries;
    std::istringstream ss(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = name + ":" + std::to_string(lineno);
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3)
                throw config_error(where + ": malformed section header '" + line + "'");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error(where + ": expected key = value, got '" + line + "'");
        if (section.empty())
            throw config_error(where + ": key outside any [section]");
        IniEntry e;
        e.section = section;
        e.key = trim(line.substr(0, eq));
        e.value = trim(line.substr(eq + 1));
        e.line = lineno;
        if (e.key.empty()) throw config_error(where + ": empty key");
        entries.push_back(std::move(e));
    }
    return entries;
}

inline double cfg_double(const IniEntry& e, const std::string& name) {
    if (e.value == "inf") return std::numeric_limits<double>::infinity();
    const char* b = e.value.c_str();
    char* end = nullptr;
    const double v = std::strtod(b, &end);
    if (end == b || *end != '\0')
        throw config_error(name + ":" + std::to_string(e.line) + ": value of '" + e.key +
                           "' is not a number: '" + e.value + "'");
    return v;
}

inline long long cfg_int(const IniEntry& e, const std::string& name) {
    const char* b = e.value.c_str();
    char* end = nullptr;
    const long long v = std::strtoll(b, &end, 10);
    if (end == b || *end != '\0')
        throw config_error(name + ":" + std::to_string(e.line) + ": value of '" + e.key +
                           "' is not an integer: '" + e.value + "'");
    return v;
}

inline std::vector<std::string> cfg_list(const IniEntry& e) {
    std::vector<std::string> items;
    std::istringstream ss(e.value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) items.push_back(item);
    }
    return items;
}

}  // namespace detail

// Parse configuration text.  Unknown sections or keys are line-precise hard
// errors; so are malformed values and out-of-range settings.
inline RunConfig parse_config_text(const std::string& text, const std::string& name = "<config>") {
    RunConfig cfg;
    cfg.raw_text = text;
    bool drive_n_set = false, drive_mhz_set = false;

    for (const detail::IniEntry& e : detail::parse_ini(text, name)) {
        const std::string where = name + ":" + std::to_string(e.line);
        const auto unknown_key = [&]() {
            throw config_error(where + ": unknown key '" + e.key + "' in [" + e.section + "]");
        };
        if (e.section == "run") {
            if (e.key == "experiment") {
                if (!experiment_names().count(e.value)) {
                    std::string msg = where + ": unknown experiment '" + e.value + "'; valid:";
                    for (const std::string& n : experiment_names()) msg += " " + n;
                    throw config_error(msg);
                }
                cfg.experiment = e.value;
            } else if (e.key == "seed") {
                cfg.seed = static_cast<std::uint64_t>(detail::cfg_int(e, name));
            } else if (e.key == "workers") {
                const long long w = detail::cfg_int(e, name);
                if (w < 0) throw config_error(where + ": workers must be >= 0");
                cfg.workers = static_cast<int>(w);
            } else if (e.key == "out_dir") {
                cfg.out_dir = e.value;
            } else {
                unknown_key();
            }
        } else if (e.section == "system") {
            if (e.key == "g_mhz") cfg.params.g = mhz(detail::cfg_double(e, name));
            else if (e.key == "kappa_mhz") cfg.params.kappa = mhz(detail::cfg_double(e, name));
            else if (e.key == "gamma_perp_mhz") cfg.params.gamma_perp = mhz(detail::cfg_double(e, name));
            else if (e.key == "delta_atom_mhz") cfg.params.delta_atom = mhz(detail::cfg_double(e, name));
            else if (e.key == "delta_cavity_mhz") cfg.params.delta_cavity = mhz(detail::cfg_double(e, name));
            else if (e.key == "eta") {
                cfg.params.eta = detail::cfg_double(e, name);
                cfg.eta_set = true;
            }
            else unknown_key();
        } else if (e.section == "drive") {
            if (e.key == "photon_number") {
                cfg.photon_number = detail::cfg_double(e, name);
                if (!(cfg.photon_number >= 0.0))
                    throw config_error(where + ": photon_number must be >= 0");
                cfg.photon_number_set = true;
                drive_n_set = true;
            } else if (e.key == "drive_mhz") {
                cfg.params.drive = mhz(detail::cfg_double(e, name));
                cfg.drive_set_directly = true;
                drive_mhz_set = true;
            } else {
                unknown_key();
            }
        } else if (e.section == "sim") {
            if (e.key == "t_end_us") {
                cfg.t_end_us = detail::cfg_double(e, name);
                cfg.t_end_set = true;
            }
            else if (e.key == "sample_rate") cfg.sample_rate = detail::cfg_double(e, name);
            else if (e.key == "oversample") cfg.oversample = static_cast<int>(detail::cfg_int(e, name));
            else if (e.key == "n_max") cfg.n_max = static_cast<int>(detail::cfg_int(e, name));
            else if (e.key == "steps_per_rate") cfg.steps_per_rate = static_cast<int>(detail::cfg_int(e, name));
            else if (e.key == "truncation_threshold") cfg.truncation_threshold = detail::cfg_double(e, name);
            else if (e.key == "dark_lifetime_us") {
                cfg.dark_lifetime_us = detail::cfg_double(e, name);
                cfg.dark_lifetime_set = true;
            }
            else if (e.key == "n_traj") {
                cfg.n_traj = static_cast<int>(detail::cfg_int(e, name));
                cfg.n_traj_set = true;
            }
            else unknown_key();
        } else if (e.section == "detector") {
            if (e.key == "filter_preset") {
                bool known = false;
                for (const std::string& n : filter_preset_names()) known = known || n == e.value;
                if (!known) {
                    std::string msg = where + ": unknown filter preset '" + e.value + "'; valid:";
                    for (const std::string& n : filter_preset_names()) msg += " " + n;
                    throw config_error(msg);
                }
                cfg.filter_preset = e.value;
                cfg.filter_preset_set = true;
            } else if (e.key == "noise_scale") {
                cfg.noise_scale = detail::cfg_double(e, name);
            } else {
                unknown_key();
            }
        } else if (e.section == "hmm") {
            if (e.key == "switch_rate") cfg.switch_rate = detail::cfg_double(e, name);
            else if (e.key == "dark_lifetime_us") cfg.hmm_dark_lifetime_us = detail::cfg_double(e, name);
            else if (e.key == "n_trials") cfg.n_trials = static_cast<int>(detail::cfg_int(e, name));
            else unknown_key();
        } else if (e.section == "fig2") {
            if (e.key == "photon_numbers") {
                cfg.photon_numbers.clear();
                for (const std::string& item : detail::cfg_list(e)) {
                    detail::IniEntry sub = e;
                    sub.value = item;
                    cfg.photon_numbers.push_back(detail::cfg_double(sub, name));
                }
                if (cfg.photon_numbers.empty())
                    throw config_error(where + ": photon_numbers list is empty");
            } else if (e.key == "presets") {
                cfg.presets = detail::cfg_list(e);
                for (const std::string& pr : cfg.presets) {
                    bool known = false;
                    for (const std::string& n : filter_preset_names()) known = known || n == pr;
                    if (!known)
                        throw config_error(where + ": unknown filter preset '" + pr + "'");
                }
                if (cfg.presets.empty()) throw config_error(where + ": presets list is empty");
            } else {
                unknown_key();
            }
        } else {
            throw config_error(where + ": unknown section [" + e.section + "]");
        }
    }

    if (drive_n_set && drive_mhz_set)
        throw config_error(name + ": [drive] sets both photon_number and drive_mhz; pick one");
    try {
        cfg.params.validate();
    } catch (const std::invalid_argument& ex) {
        throw config_error(name + ": invalid [system] parameters: " + ex.what());
    }
    if (!(cfg.t_end_us > 0.0)) throw config_error(name + ": [sim] t_end_us must be > 0");
    if (cfg.n_traj < 1) throw config_error(name + ": [sim] n_traj must be >= 1");
    if (cfg.n_trials < 1) throw config_error(name + ": [hmm] n_trials must be >= 1");
    return cfg;
}

inline RunConfig parse_config_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw config_error("cannot open config file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str(), path);
}

// Canonical text form of the *effective* configuration (after file parsing
// and command-line overrides).  Hashing this identifies a run.  Workers and
// the output directory are deliberately excluded: neither may influence
// artifact bytes.
inline std::string canonical_config_text(const RunConfig& cfg) {
    std::ostringstream s;
    s.setf(std::ios::scientific);
    s.precision(17);
    s << "[run]\nexperiment = " << cfg.experiment << "\nseed = " << cfg.seed << "\n";
    s << "[system]\ng_mhz = " << cfg.params.g / mhz(1.0)
      << "\nkappa_mhz = " << cfg.params.kappa / mhz(1.0)
      << "\ngamma_perp_mhz = " << cfg.params.gamma_perp / mhz(1.0)
      << "\ndelta_atom_mhz = " << cfg.params.delta_atom / mhz(1.0)
      << "\ndelta_cavity_mhz = " << cfg.params.delta_cavity / mhz(1.0)
      << "\neta = " << cfg.params.eta << "\neta_set = " << (cfg.eta_set ? 1 : 0) << "\n";
    s << "[drive]\n";
    if (cfg.drive_set_directly)
        s << "drive_mhz = " << cfg.params.drive / mhz(1.0) << "\n";
    else
        s << "photon_number = " << cfg.photon_number
          << "\nphoton_number_set = " << (cfg.photon_number_set ? 1 : 0) << "\n";
    s << "[sim]\nt_end_us = " << cfg.t_end_us << "\nt_end_set = " << (cfg.t_end_set ? 1 : 0)
      << "\nsample_rate = " << cfg.sample_rate << "\noversample = " << cfg.oversample
      << "\nn_max = " << cfg.n_max << "\nsteps_per_rate = " << cfg.steps_per_rate
      << "\ntruncation_threshold = " << cfg.truncation_threshold
      << "\ndark_lifetime_us = " << cfg.dark_lifetime_us
      << "\ndark_lifetime_set = " << (cfg.dark_lifetime_set ? 1 : 0)
      << "\nn_traj = " << cfg.n_traj << "\nn_traj_set = " << (cfg.n_traj_set ? 1 : 0) << "\n";
    s << "[detector]\nfilter_preset = " << cfg.filter_preset
      << "\nfilter_preset_set = " << (cfg.filter_preset_set ? 1 : 0)
      << "\nnoise_scale = " << cfg.noise_scale << "\n";
    s << "[hmm]\nswitch_rate = " << cfg.switch_rate
      << "\ndark_lifetime_us = " << cfg.hmm_dark_lifetime_us << "\nn_trials = " << cfg.n_trials
      << "\n";
    s << "[fig2]\nphoton_numbers =";
    for (double n : cfg.photon_numbers) s << ' ' << n;
    s << "\npresets =";
    for (const std::string& pr : cfg.presets) s << ' ' << pr;
    s << "\n";
    return s.str();
}

}  // namespace jctraj
