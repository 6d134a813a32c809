#include <catch2/catch_amalgamated.hpp>

#include "jctraj/analysis.hpp"
#include "jctraj/rng.hpp"
#include "jctraj/signal.hpp"
#include "jctraj/space.hpp"
#include "jctraj/stats.hpp"

#include <cmath>
#include <limits>
#include <vector>

using namespace jctraj;

namespace {

// Noise-free synthetic telegraph photocurrent at 25 MS/s.
PhotocurrentTrace clean_telegraph(double amp, double rate, double t_end, std::uint64_t seed) {
    SystemParams p;
    DetectorConfig det;
    det.oversample = 1;
    det.filter_preset = "none";
    det.noise_scale = 0.0;
    return make_synthetic_telegraph(p, det, t_end, amp, rate,
                                    std::numeric_limits<double>::infinity(), seed);
}

}  // namespace

TEST_CASE("histogram: mass conservation and automatic bin count") {
    Rng rng(1);
    std::vector<double> xs(5000);
    for (double& x : xs) x = rng.normal();
    const HistogramData h = make_histogram(xs);
    CHECK(h.n_bins() >= 30);
    CHECK(h.n_bins() <= 200);
    double total = 0.0;
    for (double c : h.counts) total += c;
    CHECK(total == Catch::Approx(5000.0));
    CHECK(h.total == Catch::Approx(5000.0));
    CHECK(h.edges.front() == Catch::Approx(*std::min_element(xs.begin(), xs.end())));
    CHECK(h.edges.size() == static_cast<std::size_t>(h.n_bins()) + 1);

    const HistogramData h40 = make_histogram(xs, 40);
    CHECK(h40.n_bins() == 40);

    CHECK_THROWS_AS(make_histogram(std::vector<double>{1, 2, 3}), std::invalid_argument);
    CHECK_THROWS_AS(make_histogram(std::vector<double>(50, 1.0)), std::invalid_argument);
}

TEST_CASE("two-Gaussian fit recovers a planted mixture and rejects one lump") {
    Rng rng(2);
    const double mu = 1.0, sigma = 0.35;
    std::vector<double> xs(40000);
    for (double& x : xs) x = (rng.uniform() < 0.5 ? -mu : mu) + sigma * rng.normal();

    const HistogramData h = make_histogram(xs);
    const BiGaussianFit fit = fit_bigaussian(h, sigma);
    REQUIRE(fit.converged);
    CHECK(fit.c1 == Catch::Approx(-mu).margin(0.02));
    CHECK(fit.c2 == Catch::Approx(+mu).margin(0.02));
    CHECK(fit.splitting() == Catch::Approx(2.0 * mu).margin(0.04));
    CHECK(fit.weight1 == Catch::Approx(0.5).margin(0.02));
    CHECK(fit.p_value < 1e-10);  // bimodality is unmistakable at this size
    CHECK(fit.lr_stat > 0.0);

    // a genuinely single-lump sample must not fake a significant splitting
    std::vector<double> mono(40000);
    for (double& x : mono) x = 0.3 + sigma * rng.normal();
    const BiGaussianFit null_fit = fit_bigaussian(make_histogram(mono), sigma);
    REQUIRE(null_fit.converged);
    CHECK(null_fit.p_value > 1e-3);
}

TEST_CASE("analysis window respects settle and dark boundaries") {
    PhotocurrentTrace tr;
    tr.sample_rate = 10.0;
    tr.t0 = 0.0;
    tr.y.assign(100, 0.0);
    tr.settle_time = 2.05;
    tr.dark_time = 7.5;
    const auto [lo, hi] = analysis_window(tr);
    CHECK(lo == 21);
    CHECK(hi == 75);

    tr.settle_time = 8.0;  // settle beyond the dark transition: nothing usable
    CHECK_THROWS_AS(analysis_window(tr), std::invalid_argument);
}

TEST_CASE("raw autocorrelation of a clean telegraph matches mu^2 exp(-2 r tau)") {
    const double amp = 0.9, rate = 1e6, t_end = 2e-3;
    std::vector<PhotocurrentTrace> traces;
    for (int i = 0; i < 8; ++i) traces.push_back(clean_telegraph(amp, rate, t_end, 100 + i));

    const double max_lag = 1.5e-6;
    const AcfResult acf = ensemble_autocorrelation(traces, max_lag);
    REQUIRE(acf.n_traces == 8);
    REQUIRE(acf.mean.size() == static_cast<std::size_t>(std::floor(max_lag * 2.5e7)) + 1);

    // lag 0 is the raw second moment (not normalized to 1)
    CHECK(acf.mean[0] == Catch::Approx(amp * amp).epsilon(0.02));
    for (std::size_t k = 1; k < acf.mean.size(); k += 6) {
        const double theory = amp * amp * std::exp(-2.0 * rate * static_cast<double>(k) * acf.dt);
        CHECK(acf.mean[k] == Catch::Approx(theory).margin(0.05 * amp * amp));
    }

    const auto [tau, tau_se] = integral_decay_time_jackknife(acf);
    CHECK(tau == Catch::Approx(1.0 / (2.0 * rate)).epsilon(0.06));
    CHECK(tau_se > 0.0);
    CHECK(tau_se < 0.1 * tau);
}

TEST_CASE("raw autocorrelation of pure shot noise is the noise variance at lag 0") {
    SystemParams p;
    DetectorConfig det;
    det.oversample = 1;
    det.filter_preset = "none";
    const PhotocurrentTrace tr = make_synthetic_telegraph(
        p, det, 2e-3, 0.0, 0.0, std::numeric_limits<double>::infinity(), 9);
    const std::vector<double> acf = autocorrelation(tr, 1e-6);
    const double n = static_cast<double>(tr.y.size());
    CHECK(acf[0] == Catch::Approx(tr.shot_sigma * tr.shot_sigma).epsilon(0.05));
    // unfiltered noise is white: all other lags vanish within sampling error
    for (std::size_t k = 1; k < acf.size(); ++k)
        CHECK(std::abs(acf[k]) < 5.0 * tr.shot_sigma * tr.shot_sigma / std::sqrt(n));
}

TEST_CASE("autocorrelation preconditions") {
    const PhotocurrentTrace tr = clean_telegraph(1.0, 1e6, 1e-4, 5);
    CHECK_THROWS_AS(autocorrelation(tr, 0.0), std::invalid_argument);
    // 10x max_lag guard: the window is 2500 samples, so 30 us of lag needs 30000
    CHECK_THROWS_AS(autocorrelation(tr, 3e-5), std::invalid_argument);
    CHECK_NOTHROW(autocorrelation(tr, 1e-6));

    CHECK_THROWS_AS(ensemble_autocorrelation({}, 1e-6), std::invalid_argument);
    PhotocurrentTrace other = tr;
    other.sample_rate *= 2.0;
    CHECK_THROWS_AS(ensemble_autocorrelation({tr, other}, 1e-6), resampling_error);
}

TEST_CASE("integral decay time is exact for a sampled exponential") {
    const double tau = 0.4e-6, dt = 0.04e-6;
    AcfResult acf;
    acf.dt = dt;
    const std::size_t n_lag = 81;  // out to 8 tau
    acf.mean.resize(n_lag);
    for (std::size_t k = 0; k < n_lag; ++k)
        acf.mean[k] = 2.0 * std::exp(-static_cast<double>(k) * dt / tau);
    CHECK(integral_decay_time(acf) == Catch::Approx(tau).epsilon(0.005));

    // summation stops at the first nonpositive lag, ignoring whatever follows
    AcfResult clipped = acf;
    clipped.mean[30] = -1.0;
    for (std::size_t k = 31; k < n_lag; ++k) clipped.mean[k] = 100.0;
    const double expect_clipped = integral_decay_time([&] {
        AcfResult a;
        a.dt = dt;
        a.mean.assign(acf.mean.begin(), acf.mean.begin() + 30);
        return a;
    }());
    CHECK(integral_decay_time(clipped) == Catch::Approx(expect_clipped));

    AcfResult bad;
    bad.dt = dt;
    CHECK_THROWS_AS(integral_decay_time(bad), std::invalid_argument);
    bad.mean = {0.0, 1.0};
    CHECK_THROWS_AS(integral_decay_time(bad), std::invalid_argument);

    // jackknife over identical traces has zero spread
    acf.per_trace.assign(4, acf.mean);
    const auto [full, se] = integral_decay_time_jackknife(acf);
    CHECK(full == Catch::Approx(tau).epsilon(0.005));
    CHECK(se == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("dwell times: exact censoring and telegraph statistics") {
    // hand-built signal at rate 1: the only completed dwell spans samples 2..4
    const std::vector<double> y = {1.0, 1.0, -1.0, -1.0, -1.0, 1.0};
    const std::vector<double> d = dwell_times(y, 1.0, 1.0);
    REQUIRE(d.size() == 1);
    CHECK(d[0] == Catch::Approx(3.0));

    CHECK_THROWS_AS(dwell_times(y, 1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(dwell_times(y, 0.0, 1.0), std::invalid_argument);

    // exponential dwell statistics of a clean telegraph
    const double rate = 1e6;
    const PhotocurrentTrace tr = clean_telegraph(1.0, rate, 4e-3, 21);
    const std::vector<double> dw = dwell_times(tr.y, tr.sample_rate, 1.0);
    REQUIRE(dw.size() > 1000);
    const Moments m = moments(dw);
    const double se = m.mean / std::sqrt(static_cast<double>(dw.size()));
    CHECK(std::abs(m.mean - 1.0 / rate) < 4.0 * se);
}

TEST_CASE("splitting accumulator: bimodal traces in, consistent shot sigma enforced") {
    SystemParams p;
    DetectorConfig det;  // default 10 MHz lowpass, oversample 4
    SplittingAccumulator acc;
    for (int i = 0; i < 4; ++i)
        acc.add(make_synthetic_telegraph(p, det, 4e-4, 1.0, 5e5,
                                         std::numeric_limits<double>::infinity(), 40 + i));
    CHECK(acc.n_traces() == 4);
    const SplittingMeasurement sm = acc.finalize(80, 7);
    REQUIRE(sm.fit.converged);
    CHECK(sm.splitting == Catch::Approx(2.0).margin(0.08));
    CHECK(sm.stderr_boot > 0.0);
    CHECK(sm.n_traces == 4);

    // the bootstrap is seeded: finalizing again reproduces the same numbers
    const SplittingMeasurement sm2 = acc.finalize(80, 7);
    CHECK(sm2.splitting == sm.splitting);
    CHECK(sm2.stderr_boot == sm.stderr_boot);

    // traces with a different analytic noise level cannot be pooled
    DetectorConfig other = det;
    other.noise_scale = 0.5;
    SplittingAccumulator strict;
    strict.add(make_synthetic_telegraph(p, det, 1e-4, 1.0, 5e5,
                                        std::numeric_limits<double>::infinity(), 1));
    CHECK_THROWS_AS(strict.add(make_synthetic_telegraph(
                        p, other, 1e-4, 1.0, 5e5,
                        std::numeric_limits<double>::infinity(), 2)),
                    std::invalid_argument);

    SplittingAccumulator empty;
    CHECK_THROWS_AS(empty.finalize(), std::invalid_argument);
    SplittingAccumulator lone;
    lone.add(make_synthetic_telegraph(p, det, 1e-4, 1.0, 5e5,
                                      std::numeric_limits<double>::infinity(), 3));
    CHECK_THROWS_AS(lone.finalize(100, 1), resampling_error);
    CHECK_NOTHROW(lone.finalize(0, 1));  // without a bootstrap one trace is fine
}

TEST_CASE("moment-matched branch amplitude: exact on its model family, zero on vacuum") {
    const Space sp = build_space(40);
    const OperatorSet ops = operator_set(sp);

    CHECK(steady_branch_mu(fock_state(sp, 0, 0), ops) == Catch::Approx(0.0).margin(1e-12));
    // a single coherent state has a centered Gaussian marginal: no splitting
    CHECK(steady_branch_mu(coherent_ground(sp, Complex(1.2, 0.0)), ops) ==
          Catch::Approx(0.0).margin(1e-6));

    // equal mixture of coherent states at +-i mu: the formula is exact
    const double mu = 1.3;
    const Operator rho = 0.5 * to_density(coherent_ground(sp, Complex(0.0, mu))) +
                         0.5 * to_density(coherent_ground(sp, Complex(0.0, -mu)));
    const QuantumState mix = density_state(sp, rho);
    CHECK(steady_branch_mu(mix, ops) == Catch::Approx(mu).epsilon(1e-6));
}

TEST_CASE("asymptotic splitting ladder fails loudly when capped too low") {
    SystemParams base;
    CHECK_THROWS_AS(asymptotic_splitting(base, 0.01, 20), truncation_error);
}
