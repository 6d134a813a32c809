#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "analysis.hpp"
#include "hmm.hpp"
#include "signal.hpp"
#include "trajectory.hpp"
#include "version.hpp"

namespace jctraj {

// Shortest round-trippable decimal form: %.17g survives strtod exactly.
inline std::string fmt_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string fnv1a_hex(const std::string& s) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(s)));
    return buf;
}

namespace detail {

inline std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::binary);  // binary: no newline translation
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    return f;
}

inline double parse_strict_double(const std::string& tok, const std::string& context) {
    const char* begin = tok.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0')
        throw std::runtime_error(context + ": cannot parse number '" + tok + "'");
    return v;
}

}  // namespace detail

inline void write_trajectory_csv(const std::string& path, const TrajectoryRecord& rec) {
    std::ofstream f = detail::open_out(path);
    f << "t_us,y_cond,x_cond,n_cond,dW\n";
    for (std::size_t k = 0; k < rec.size(); ++k) {
        f << fmt_g17(rec.time(k) * 1e6) << ',' << fmt_g17(rec.y_cond[k]) << ','
          << fmt_g17(rec.x_cond[k]) << ',' << fmt_g17(rec.n_cond[k]) << ','
          << fmt_g17(rec.dW[k]) << '\n';
    }
}

inline nlohmann::json params_to_json(const SystemParams& p) {
    return nlohmann::json{{"g", p.g},
                          {"kappa", p.kappa},
                          {"gamma_perp", p.gamma_perp},
                          {"delta_atom", p.delta_atom},
                          {"delta_cavity", p.delta_cavity},
                          {"drive", p.drive},
                          {"eta", p.eta}};
}

inline void write_trajectory_sidecar(const std::string& path, const TrajectoryRecord& rec) {
    nlohmann::json j;
    j["format"] = "trajectory-record";
    j["version"] = version_string;
    j["params"] = params_to_json(rec.params);
    j["seed"] = rec.seed;
    j["index"] = rec.index;
    j["n_max"] = rec.n_max;
    j["kept_dt"] = rec.kept_dt;
    j["t_end"] = rec.t_end;
    j["settle_time"] = rec.settle_time;
    j["dark_time"] = std::isfinite(rec.dark_time) ? nlohmann::json(rec.dark_time)
                                                  : nlohmann::json(nullptr);
    j["jump_times"] = rec.jump_times;
    j["max_top_population"] = rec.max_top_population;
    j["truncation_ok"] = truncation_ok(rec);
    std::ofstream f = detail::open_out(path);
    f << j.dump(2) << '\n';
}

// Trace CSV: '#'-prefixed metadata header, then t_us,y rows.  y values are
// written with %.17g so a write/read cycle reproduces them bit-exactly; the
// time column is informational (reconstructed from sample_rate and t0).
// The noise-propagation history is not serialized.
inline void write_trace_csv(const std::string& path, const PhotocurrentTrace& tr) {
    std::ofstream f = detail::open_out(path);
    f << "# photocurrent-trace 1\n";
    f << "# sample_rate " << fmt_g17(tr.sample_rate) << '\n';
    f << "# t0 " << fmt_g17(tr.t0) << '\n';
    f << "# shot_sigma " << fmt_g17(tr.shot_sigma) << '\n';
    f << "# settle_time " << fmt_g17(tr.settle_time) << '\n';
    f << "# dark_time " << fmt_g17(tr.dark_time) << '\n';
    f << "# band " << (tr.band.empty() ? "none" : tr.band) << '\n';
    f << "# source " << (tr.source.empty() ? "unknown" : tr.source) << '\n';
    f << "t_us,y\n";
    for (std::size_t k = 0; k < tr.y.size(); ++k)
        f << fmt_g17(tr.time(k) * 1e6) << ',' << fmt_g17(tr.y[k]) << '\n';
}

inline PhotocurrentTrace read_trace_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for reading: " + path);
    PhotocurrentTrace tr;
    std::string line;
    std::size_t lineno = 0;
    bool header_done = false;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::string ctx = path + ":" + std::to_string(lineno);
        if (line[0] == '#') {
            std::istringstream ss(line.substr(1));
            std::string key, value;
            ss >> key;
            std::getline(ss, value);
            if (!value.empty() && value.front() == ' ') value.erase(0, 1);
            if (key == "sample_rate") tr.sample_rate = detail::parse_strict_double(value, ctx);
            else if (key == "t0") tr.t0 = detail::parse_strict_double(value, ctx);
            else if (key == "shot_sigma") tr.shot_sigma = detail::parse_strict_double(value, ctx);
            else if (key == "settle_time") tr.settle_time = detail::parse_strict_double(value, ctx);
            else if (key == "dark_time") tr.dark_time = detail::parse_strict_double(value, ctx);
            else if (key == "band") tr.band = value;
            else if (key == "source") tr.source = value;
            continue;
        }
        if (!header_done) {
            if (line != "t_us,y") throw std::runtime_error(ctx + ": expected column header t_us,y");
            header_done = true;
            continue;
        }
        const std::size_t comma = line.find(',');
        if (comma == std::string::npos) throw std::runtime_error(ctx + ": expected two columns");
        tr.y.push_back(detail::parse_strict_double(line.substr(comma + 1), ctx));
    }
    if (!(tr.sample_rate > 0.0))
        throw std::runtime_error(path + ": missing or invalid sample_rate header");
    return tr;
}

inline void write_histogram_fit_csv(const std::string& path, const HistogramData& h,
                                    const BiGaussianFit& fit) {
    std::ofstream f = detail::open_out(path);
    f << "bin_center,count,fit_density\n";
    for (int b = 0; b < h.n_bins(); ++b) {
        const double c = h.center(b);
        f << fmt_g17(c) << ',' << fmt_g17(h.counts[b]) << ','
          << fmt_g17(fit.density(c, h.total, h.width())) << '\n';
    }
}

struct SplittingRow {
    double photon_number = 0.0;
    double band_mhz = 0.0;
    double splitting = 0.0;
    double stderr_boot = 0.0;
};

inline void write_splitting_csv(const std::string& path, const std::vector<SplittingRow>& rows) {
    std::ofstream f = detail::open_out(path);
    f << "N,band_MHz,splitting,stderr\n";
    for (const SplittingRow& r : rows)
        f << fmt_g17(r.photon_number) << ',' << fmt_g17(r.band_mhz) << ','
          << fmt_g17(r.splitting) << ',' << fmt_g17(r.stderr_boot) << '\n';
}

inline void write_acf_csv(const std::string& path,
                          const std::vector<std::pair<std::string, AcfResult>>& cases) {
    std::ofstream f = detail::open_out(path);
    f << "lag_us,acf,case\n";
    for (const auto& [label, acf] : cases)
        for (std::size_t k = 0; k < acf.mean.size(); ++k)
            f << fmt_g17(k * acf.dt * 1e6) << ',' << fmt_g17(acf.mean[k]) << ',' << label << '\n';
}

inline void write_decoded_csv(const std::string& path, const PhotocurrentTrace& tr,
                              const DecodedPath& dec) {
    if (dec.states.size() != tr.y.size())
        throw std::invalid_argument("write_decoded_csv: trace and decode length mismatch");
    std::ofstream f = detail::open_out(path);
    f << "t_us,state,p_neg,p_pos,p_dark\n";
    for (std::size_t k = 0; k < dec.states.size(); ++k) {
        f << fmt_g17(tr.time(k) * 1e6) << ',' << telegraph_state_name(dec.states[k]) << ','
          << fmt_g17(dec.posterior[k][0]) << ',' << fmt_g17(dec.posterior[k][1]) << ','
          << fmt_g17(dec.posterior[k][2]) << '\n';
    }
}

inline void write_confusion_report(const std::string& path, const AccuracyReport& rep) {
    std::ofstream f = detail::open_out(path);
    f << "telegraph decoder accuracy report\n";
    f << "trials: " << rep.n_trials << "\n";
    f << "samples scored: " << rep.n_samples << "\n";
    f << "emission mu: " << fmt_g17(rep.mu) << "\n";
    f << "emission sigma: " << fmt_g17(rep.sigma) << "\n";
    f << "filter group delay (trace samples): " << fmt_g17(rep.group_delay_samples) << "\n";
    f << "misclassification fraction: " << fmt_g17(rep.misclassification) << "\n";
    f << "\nconfusion matrix, rows = truth, columns = decoded (neg pos dark):\n";
    for (int t = 0; t < 3; ++t) {
        f << telegraph_state_name(t) << ':';
        for (int d = 0; d < 3; ++d) f << ' ' << rep.confusion[t][d];
        f << '\n';
    }
}

inline void write_manifest(const std::string& path, const nlohmann::json& j) {
    std::ofstream f = detail::open_out(path);
    f << j.dump(2) << '\n';
}

}  // namespace jctraj
