#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "filter.hpp"
#include "rng.hpp"
#include "trajectory.hpp"

namespace jctraj {

// Filter presets, all order-4 Butterworth at the rate they are applied:
//   lowpass-10mhz, lowpass-4mhz, lowpass-2mhz   detection bandwidths
//   bandpass-0.1-8mhz                           histogram band
//   achighpass-20khz                            ac coupling
//   none                                        pass-through (tests)
inline const std::vector<std::string>& filter_preset_names() {
    static const std::vector<std::string> names = {
        "lowpass-10mhz", "lowpass-4mhz", "lowpass-2mhz",
        "bandpass-0.1-8mhz", "achighpass-20khz", "none"};
    return names;
}

inline FilterChain make_preset_filter(const std::string& preset, double fs) {
    if (preset == "lowpass-10mhz") return butterworth_lowpass(fs, 10e6);
    if (preset == "lowpass-4mhz") return butterworth_lowpass(fs, 4e6);
    if (preset == "lowpass-2mhz") return butterworth_lowpass(fs, 2e6);
    if (preset == "bandpass-0.1-8mhz") return butterworth_bandpass(fs, 0.1e6, 8e6);
    if (preset == "achighpass-20khz") return butterworth_highpass(fs, 20e3);
    if (preset == "none") {
        FilterChain c;
        c.sample_rate = fs;
        c.description = "none";
        return c;
    }
    std::string msg = "unknown filter preset '" + preset + "'; valid presets:";
    for (const std::string& n : filter_preset_names()) msg += " " + n;
    throw std::invalid_argument(msg);
}

// Characteristic bandwidth of a preset in MHz (the lowpass cutoff, or the
// upper band edge), used to label splitting-curve rows.
inline double preset_band_mhz(const std::string& preset) {
    if (preset == "lowpass-10mhz") return 10.0;
    if (preset == "lowpass-4mhz") return 4.0;
    if (preset == "lowpass-2mhz") return 2.0;
    if (preset == "bandpass-0.1-8mhz") return 8.0;
    if (preset == "achighpass-20khz") return 0.02;
    if (preset == "none") return 0.0;
    make_preset_filter(preset, 1.0);  // throws with the preset list
    return 0.0;
}

// Detection pipeline: shot noise is injected at the record rate
// (sample_rate * oversample), the preset filter runs there as the
// anti-alias stage, then the stream is decimated by `oversample`.
// noise_scale is a test hook multiplying the injected noise (1 = physical).
struct DetectorConfig {
    double sample_rate = 2.5e7;
    int oversample = 4;
    std::string filter_preset = "lowpass-10mhz";
    double noise_scale = 1.0;

    void validate() const {
        if (!(sample_rate > 0.0))
            throw std::invalid_argument("DetectorConfig: sample_rate must be > 0");
        if (oversample < 1) throw std::invalid_argument("DetectorConfig: oversample must be >= 1");
        if (!(noise_scale >= 0.0))
            throw std::invalid_argument("DetectorConfig: noise_scale must be >= 0");
        make_preset_filter(filter_preset, std::max(sample_rate * oversample, 1.0));
    }
};

// Processing history of a trace's noise: white per-sample sigma at the
// injection rate, then alternating filter/decimation stages.  Kept so the
// analytic shot-noise level can be propagated exactly through any chain.
struct NoiseStage {
    FilterChain filter;
    int decimate_after = 1;
};

struct NoiseChain {
    double white_sigma = 0.0;  // per-sample std dev at rate0
    double rate0 = 0.0;
    std::vector<NoiseStage> stages;
};

// Exact output std dev of white noise pushed through the chain.  Decimation
// preserves the marginal variance but folds the spectrum; evaluating stage
// j at the folded frequency of the original grid accounts for aliasing:
//   var = sigma0^2 (1/pi) \int_0^pi  prod_j |H_j(fold_j(w))|^2  dw.
inline double chain_noise_sigma(const NoiseChain& chain, int n_grid = 262144) {
    if (chain.stages.empty()) return chain.white_sigma;
    double acc = 0.0;
    for (int i = 0; i < n_grid; ++i) {
        const double w0 = M_PI * (i + 0.5) / n_grid;
        double w = w0;
        double gain = 1.0;
        for (const NoiseStage& st : chain.stages) {
            if (!st.filter.empty()) gain *= std::norm(st.filter.response(w));
            if (st.decimate_after > 1) {
                w *= st.decimate_after;
                w = std::fmod(w, 2.0 * M_PI);
                if (w > M_PI) w = 2.0 * M_PI - w;
            }
        }
        acc += gain;
    }
    return chain.white_sigma * std::sqrt(acc / n_grid);
}

// Homodyne photocurrent trace in quadrature units (telegraph branches sit
// near +-g/2kappa).  y[k] is the sample at t0 + k / sample_rate.
struct PhotocurrentTrace {
    double sample_rate = 0.0;
    double t0 = 0.0;
    std::vector<double> y;
    double shot_sigma = 0.0;  // analytic std dev of the filtered noise alone
    double settle_time = 0.0;
    double dark_time = std::numeric_limits<double>::infinity();
    NoiseChain noise;
    std::string band;    // human-readable filter description
    std::string source;  // "simulated" or "synthetic"
    double time(std::size_t k) const { return t0 + static_cast<double>(k) / sample_rate; }
};

// Analytic shot-noise sigma of a detector pipeline for a system with decay
// rate kappa and efficiency eta: white per-sample sigma 1/sqrt(8 eta kappa
// dt0) at the record rate, times the filter's noise gain (decimation does
// not change the variance).
inline double shot_noise_sigma(const DetectorConfig& det, const SystemParams& p) {
    det.validate();
    p.validate();
    if (!(p.kappa > 0.0)) throw std::invalid_argument("shot_noise_sigma: kappa must be > 0");
    const double rate0 = det.sample_rate * det.oversample;
    NoiseChain chain;
    chain.white_sigma = det.noise_scale / std::sqrt(8.0 * p.eta * p.kappa / rate0);
    chain.rate0 = rate0;
    chain.stages.push_back({make_preset_filter(det.filter_preset, rate0), det.oversample});
    return chain_noise_sigma(chain);
}

// Turn a trajectory record into the photocurrent a detector would deliver:
//   y_raw[k] = y_cond[k] + dW[k] / (kept_dt sqrt(8 eta kappa)) * noise_scale
// at the record rate, then preset filter, then decimation by `oversample`.
// The record's own Wiener increments are used, so the photocurrent stays
// consistent with the conditional state.
inline PhotocurrentTrace synthesize_photocurrent(const TrajectoryRecord& rec,
                                                 const DetectorConfig& det) {
    det.validate();
    const double rate0 = 1.0 / rec.kept_dt;
    if (std::abs(det.sample_rate * det.oversample - rate0) > 1e-6 * rate0)
        throw resampling_error(
            "synthesize_photocurrent: detector record rate does not match the "
            "trajectory kept rate");

    const double eta = rec.params.eta;
    const double kappa = rec.params.kappa;
    const double noise_gain =
        det.noise_scale / (rec.kept_dt * std::sqrt(8.0 * eta * kappa));

    std::vector<double> raw(rec.size());
    for (std::size_t k = 0; k < rec.size(); ++k)
        raw[k] = rec.y_cond[k] + rec.dW[k] * noise_gain;

    FilterChain filt = make_preset_filter(det.filter_preset, rate0);
    filt.apply_in_place(raw);

    PhotocurrentTrace tr;
    tr.sample_rate = det.sample_rate;
    tr.t0 = 0.0;
    tr.y.reserve(rec.size() / det.oversample + 1);
    for (std::size_t k = 0; k < rec.size(); k += det.oversample) tr.y.push_back(raw[k]);
    tr.settle_time = rec.settle_time;
    tr.dark_time = rec.dark_time;
    tr.noise.white_sigma = det.noise_scale / std::sqrt(8.0 * eta * kappa * rec.kept_dt);
    tr.noise.rate0 = rate0;
    tr.noise.stages.push_back({std::move(filt), det.oversample});
    tr.shot_sigma = chain_noise_sigma(tr.noise);
    tr.band = det.filter_preset;
    tr.source = "simulated";
    return tr;
}

// Apply a further preset filter to an existing trace (at the trace's own
// rate); the analytic shot sigma is re-propagated through the full chain.
// Returns the filtered copy; the input is untouched.
[[nodiscard]] inline PhotocurrentTrace apply_filter(const PhotocurrentTrace& in,
                                                    const std::string& preset) {
    PhotocurrentTrace out = in;
    FilterChain filt = make_preset_filter(preset, in.sample_rate);
    filt.apply_in_place(out.y);
    out.noise.stages.push_back({std::move(filt), 1});
    out.shot_sigma = chain_noise_sigma(out.noise);
    out.band = in.band + " + " + preset;
    return out;
}

// Synthetic two-branch telegraph source for decoder and pipeline tests: the
// conditional signal alternates between +-amplitude with exponential dwell
// times (rate `switch_rate` out of each branch), drops to 0 at an
// exponential dark time when dark_lifetime is finite, and carries shot noise
// matching `params` through the same pipeline as a simulated record.
inline PhotocurrentTrace make_synthetic_telegraph(const SystemParams& p, const DetectorConfig& det,
                                                  double t_end, double amplitude,
                                                  double switch_rate, double dark_lifetime,
                                                  std::uint64_t seed) {
    det.validate();
    p.validate();
    if (!(t_end > 0.0) || !(switch_rate >= 0.0) || !(dark_lifetime > 0.0))
        throw std::invalid_argument("make_synthetic_telegraph: bad shape parameters");

    TrajectoryRecord rec;
    rec.params = p;
    rec.kept_dt = 1.0 / (det.sample_rate * det.oversample);
    const std::size_t n = static_cast<std::size_t>(std::llround(t_end / rec.kept_dt));
    rec.t_end = n * rec.kept_dt;
    rec.seed = seed;
    rec.settle_time = 0.0;

    Rng rng(seed);
    double t_dark = std::numeric_limits<double>::infinity();
    if (std::isfinite(dark_lifetime)) t_dark = -dark_lifetime * std::log(1.0 - rng.uniform());
    double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    double t_next = switch_rate > 0.0 ? -std::log(1.0 - rng.uniform()) / switch_rate
                                      : std::numeric_limits<double>::infinity();

    rec.y_cond.resize(n);
    rec.x_cond.assign(n, 0.0);
    rec.n_cond.assign(n, 0.0);
    rec.dW.resize(n);
    const double sqdt = std::sqrt(rec.kept_dt);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = k * rec.kept_dt;
        while (t >= t_next && t < t_dark) {
            sign = -sign;
            t_next += -std::log(1.0 - rng.uniform()) / switch_rate;
        }
        rec.y_cond[k] = t >= t_dark ? 0.0 : sign * amplitude;
        rec.dW[k] = rng.normal() * sqdt;
    }
    if (t_dark < rec.t_end) rec.dark_time = t_dark;

    PhotocurrentTrace tr = synthesize_photocurrent(rec, det);
    tr.source = "synthetic";
    return tr;
}

}  // namespace jctraj
