#include <catch2/catch_amalgamated.hpp>

#include "jctraj/rng.hpp"
#include "jctraj/signal.hpp"
#include "jctraj/stats.hpp"
#include "jctraj/trajectory.hpp"

#include <cmath>
#include <limits>

using namespace jctraj;

namespace {

// Record with a constant conditional signal and zero Wiener increments, for
// deterministic pipeline checks.
TrajectoryRecord flat_record(double level, double t_end, double rate0, const SystemParams& p) {
    TrajectoryRecord rec;
    rec.params = p;
    rec.kept_dt = 1.0 / rate0;
    const std::size_t n = static_cast<std::size_t>(std::llround(t_end * rate0));
    rec.t_end = n * rec.kept_dt;
    rec.y_cond.assign(n, level);
    rec.x_cond.assign(n, 0.0);
    rec.n_cond.assign(n, 0.0);
    rec.dW.assign(n, 0.0);
    rec.settle_time = 0.0;
    return rec;
}

}  // namespace

TEST_CASE("butterworth lowpass: unit DC gain, -3 dB at cutoff, monotone rolloff") {
    const double fs = 1e8;
    for (double fc : {2e6, 4e6, 10e6}) {
        const FilterChain f = butterworth_lowpass(fs, fc);
        CHECK(std::abs(f.response_hz(0.0)) == Catch::Approx(1.0).margin(1e-12));
        CHECK(std::abs(f.response_hz(fc)) == Catch::Approx(std::sqrt(0.5)).epsilon(1e-3));
        double prev = 1.0;
        for (double fr = fc; fr < 0.49 * fs; fr *= 1.3) {
            const double mag = std::abs(f.response_hz(fr));
            CHECK(mag <= prev + 1e-12);
            prev = mag;
        }
        // order 4: far above cutoff (but below Nyquist) the response is tiny
        CHECK(std::abs(f.response_hz(std::min(10.0 * fc, 0.49 * fs))) < 2e-3);
    }
}

TEST_CASE("butterworth highpass: zero DC gain, -3 dB at cutoff, unit gain far above") {
    const FilterChain f = butterworth_highpass(2.5e7, 20e3);
    CHECK(std::abs(f.response_hz(0.0)) < 1e-12);
    CHECK(std::abs(f.response_hz(20e3)) == Catch::Approx(std::sqrt(0.5)).epsilon(1e-3));
    CHECK(std::abs(f.response_hz(5e6)) == Catch::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("bandpass combines the two -3 dB edges") {
    const FilterChain f = butterworth_bandpass(1e8, 0.1e6, 8e6);
    CHECK(std::abs(f.response_hz(0.1e6)) == Catch::Approx(std::sqrt(0.5)).epsilon(2e-2));
    CHECK(std::abs(f.response_hz(8e6)) == Catch::Approx(std::sqrt(0.5)).epsilon(2e-2));
    CHECK(std::abs(f.response_hz(1e6)) == Catch::Approx(1.0).epsilon(1e-2));
    CHECK(std::abs(f.response_hz(0.0)) < 1e-12);
}

TEST_CASE("filter application is linear") {
    const FilterChain f = butterworth_lowpass(2.5e7, 4e6);
    Rng rng(5);
    std::vector<double> x(400), y(400);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = rng.normal();
        y[i] = rng.normal();
    }
    std::vector<double> combo(400);
    for (std::size_t i = 0; i < x.size(); ++i) combo[i] = 2.5 * x[i] - 0.7 * y[i];
    const std::vector<double> fx = f.apply(x), fy = f.apply(y), fc = f.apply(combo);
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(fc[i] == Catch::Approx(2.5 * fx[i] - 0.7 * fy[i]).margin(1e-10));
}

TEST_CASE("design rejects invalid cutoffs and unknown presets") {
    CHECK_THROWS_AS(butterworth_lowpass(1e7, 6e6), std::invalid_argument);  // above Nyquist
    CHECK_THROWS_AS(butterworth_lowpass(1e7, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(make_preset_filter("lowpass-3mhz", 1e8), std::invalid_argument);
    for (const std::string& name : filter_preset_names())
        CHECK_NOTHROW(make_preset_filter(name, 1e8));
}

TEST_CASE("chain noise sigma matches Monte-Carlo noise for every preset") {
    const double rate0 = 1e8;
    Rng rng(99);
    for (const std::string& preset : filter_preset_names()) {
        NoiseChain chain;
        chain.white_sigma = 1.0;
        chain.rate0 = rate0;
        chain.stages.push_back({make_preset_filter(preset, rate0), 4});
        const double analytic = chain_noise_sigma(chain);
        if (preset == "none") CHECK(analytic == Catch::Approx(1.0).margin(1e-12));

        // filter a long white stream, decimate by 4, measure the std dev
        const std::size_t n = 1 << 20;
        std::vector<double> x(n);
        for (double& v : x) v = rng.normal();
        chain.stages.front().filter.apply_in_place(x);
        double acc = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 8192; i < n; i += 4) {  // skip the filter transient
            acc += x[i] * x[i];
            ++count;
        }
        const double mc = std::sqrt(acc / static_cast<double>(count));
        INFO("preset " << preset);
        CHECK(mc == Catch::Approx(analytic).epsilon(0.02));
    }
}

TEST_CASE("shot noise sigma: analytic level and efficiency scaling") {
    SystemParams p;
    DetectorConfig det;
    const double sigma1 = shot_noise_sigma(det, p);
    // default pipeline (10 MHz lowpass, 25 MS/s) on unit-efficiency shot noise
    CHECK(sigma1 > 0.15);
    CHECK(sigma1 < 0.30);

    SystemParams half = p;
    half.eta = 0.5;
    const double sigma_half = shot_noise_sigma(det, half);
    CHECK(sigma1 * sigma1 == Catch::Approx(sigma_half * sigma_half / 2.0).epsilon(1e-6));

    DetectorConfig noiseless = det;
    noiseless.noise_scale = 0.0;
    CHECK(shot_noise_sigma(noiseless, p) == 0.0);
}

TEST_CASE("synthesized empty-cavity photocurrent is zero-mean with the analytic sigma") {
    SystemParams p;
    p.g = 0.0;
    p.drive = 0.0;
    DetectorConfig det;
    det.oversample = 1;  // keep the record small; rate0 = 25 MS/s
    const double rate0 = det.sample_rate * det.oversample;

    TrajectoryRecord rec = flat_record(0.0, 8e-4, rate0, p);
    Rng rng(17);
    const double sqdt = std::sqrt(rec.kept_dt);
    for (double& w : rec.dW) w = rng.normal() * sqdt;

    const PhotocurrentTrace tr = synthesize_photocurrent(rec, det);
    CHECK(tr.shot_sigma == Catch::Approx(shot_noise_sigma(det, p)).margin(1e-12));
    const std::size_t skip = 512;  // filter transient
    std::vector<double> tail(tr.y.begin() + skip, tr.y.end());
    const Moments m = moments(tail);
    const double n = static_cast<double>(tail.size());
    CHECK(std::abs(m.mean) <= 4.0 * tr.shot_sigma / std::sqrt(n));
    CHECK(std::sqrt(m.var) == Catch::Approx(tr.shot_sigma).epsilon(0.02));
}

TEST_CASE("static conditional level passes through with unit gain") {
    SystemParams p;
    DetectorConfig det;
    det.oversample = 1;
    const double rate0 = det.sample_rate * det.oversample;
    const TrajectoryRecord rec = flat_record(0.75, 8e-5, rate0, p);
    const PhotocurrentTrace tr = synthesize_photocurrent(rec, det);
    CHECK(tr.y.back() == Catch::Approx(0.75).epsilon(1e-6));
    CHECK(tr.sample_rate == det.sample_rate);
    CHECK(tr.y.size() == rec.size());
}

TEST_CASE("decimation keeps every oversample-th filtered sample") {
    SystemParams p;
    DetectorConfig det;  // oversample 4
    const double rate0 = det.sample_rate * det.oversample;
    const TrajectoryRecord rec = flat_record(0.5, 4e-5, rate0, p);
    const PhotocurrentTrace tr = synthesize_photocurrent(rec, det);
    CHECK(tr.y.size() == rec.size() / 4);
    CHECK(tr.sample_rate == det.sample_rate);
    CHECK(tr.y.back() == Catch::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("synthesize rejects a record rate that mismatches the detector") {
    SystemParams p;
    DetectorConfig det;  // expects a 100 MS/s record (25 MS/s x 4)
    const TrajectoryRecord rec = flat_record(0.0, 1e-5, 5e7, p);
    CHECK_THROWS_AS(synthesize_photocurrent(rec, det), resampling_error);
}

TEST_CASE("apply_filter composes the chain and re-propagates shot sigma") {
    SystemParams p;
    p.g = 0.0;
    p.drive = 0.0;
    DetectorConfig det;
    det.oversample = 1;
    const double rate0 = det.sample_rate * det.oversample;
    TrajectoryRecord rec = flat_record(0.0, 8e-4, rate0, p);
    Rng rng(23);
    const double sqdt = std::sqrt(rec.kept_dt);
    for (double& w : rec.dW) w = rng.normal() * sqdt;

    const PhotocurrentTrace base = synthesize_photocurrent(rec, det);
    const PhotocurrentTrace ac = apply_filter(base, "achighpass-20khz");
    CHECK(ac.noise.stages.size() == 2);
    CHECK(ac.band == base.band + " + achighpass-20khz");
    CHECK(ac.shot_sigma < base.shot_sigma);  // a further filter only removes power

    const std::size_t skip = 4096;  // past the slow AC-coupling transient
    std::vector<double> tail(ac.y.begin() + skip, ac.y.end());
    const Moments m = moments(tail);
    CHECK(std::sqrt(m.var) == Catch::Approx(ac.shot_sigma).epsilon(0.03));
}

TEST_CASE("synthetic telegraph: branch levels, switching, and dark collapse") {
    SystemParams p;
    DetectorConfig det;
    det.oversample = 1;
    det.filter_preset = "none";
    det.noise_scale = 0.0;  // look at the clean telegraph
    const double amp = 1.0, rate = 1e6, t_end = 2e-4;
    const PhotocurrentTrace tr = make_synthetic_telegraph(
        p, det, t_end, amp, rate, std::numeric_limits<double>::infinity(), 3);
    CHECK(tr.source == "synthetic");
    CHECK(!std::isfinite(tr.dark_time));

    std::size_t flips = 0;
    bool levels_ok = true;
    for (std::size_t k = 0; k < tr.y.size(); ++k) {
        if (std::abs(std::abs(tr.y[k]) - amp) > 1e-12) levels_ok = false;
        if (k > 0 && tr.y[k] != tr.y[k - 1]) ++flips;
    }
    CHECK(levels_ok);
    const double expect = rate * t_end;
    CHECK(std::abs(static_cast<double>(flips) - expect) < 5.0 * std::sqrt(expect));

    const PhotocurrentTrace dark = make_synthetic_telegraph(p, det, t_end, amp, rate, 2e-5, 3);
    REQUIRE(std::isfinite(dark.dark_time));
    bool dark_ok = true;
    for (std::size_t k = 0; k < dark.y.size(); ++k)
        if (dark.time(k) >= dark.dark_time && dark.y[k] != 0.0) dark_ok = false;
    CHECK(dark_ok);
}

TEST_CASE("preset band labels") {
    CHECK(preset_band_mhz("lowpass-10mhz") == 10.0);
    CHECK(preset_band_mhz("lowpass-2mhz") == 2.0);
    CHECK(preset_band_mhz("bandpass-0.1-8mhz") == 8.0);
    CHECK(preset_band_mhz("achighpass-20khz") == Catch::Approx(0.02));
    CHECK(preset_band_mhz("none") == 0.0);
    CHECK_THROWS_AS(preset_band_mhz("lowpass-3mhz"), std::invalid_argument);
}
