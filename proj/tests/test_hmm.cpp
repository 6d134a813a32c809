#include <catch2/catch_amalgamated.hpp>

#include "jctraj/hmm.hpp"
#include "jctraj/rng.hpp"
#include "jctraj/signal.hpp"
#include "jctraj/stats.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <vector>

using namespace jctraj;

namespace {

// Reference posterior by summing over every state path (3^T of them).
struct BruteForce {
    std::vector<std::array<double, 3>> posterior;
    double log_likelihood = 0.0;
};

BruteForce brute_force(const HmmSpec& h, const std::vector<double>& y) {
    const std::size_t T = y.size();
    const auto emit = [&](std::size_t t, int s) {
        return normal_pdf(y[t], h.emission_mean[s], h.sigma);
    };
    BruteForce out;
    out.posterior.assign(T, {0.0, 0.0, 0.0});
    double total = 0.0;
    std::vector<int> path(T, 0);
    const std::size_t n_paths = static_cast<std::size_t>(std::pow(3.0, double(T)));
    for (std::size_t code = 0; code < n_paths; ++code) {
        std::size_t c = code;
        for (std::size_t t = 0; t < T; ++t) {
            path[t] = static_cast<int>(c % 3);
            c /= 3;
        }
        double w = h.initial[path[0]] * emit(0, path[0]);
        for (std::size_t t = 1; t < T; ++t) w *= h.transition[path[t - 1]][path[t]] * emit(t, path[t]);
        total += w;
        for (std::size_t t = 0; t < T; ++t) out.posterior[t][path[t]] += w;
    }
    for (std::size_t t = 0; t < T; ++t)
        for (int s = 0; s < 3; ++s) out.posterior[t][s] /= total;
    out.log_likelihood = std::log(total);
    return out;
}

HmmSpec random_spec(Rng& rng) {
    HmmSpec h;
    h.sigma = 0.5 + rng.uniform();
    for (int s = 0; s < 3; ++s) h.emission_mean[s] = 2.0 * rng.uniform() - 1.0;
    double norm = 0.0;
    for (int s = 0; s < 3; ++s) {
        h.initial[s] = 0.05 + rng.uniform();
        norm += h.initial[s];
    }
    for (int s = 0; s < 3; ++s) h.initial[s] /= norm;
    for (int r = 0; r < 3; ++r) {
        double rn = 0.0;
        for (int s = 0; s < 3; ++s) {
            h.transition[r][s] = 0.05 + rng.uniform();
            rn += h.transition[r][s];
        }
        for (int s = 0; s < 3; ++s) h.transition[r][s] /= rn;
    }
    return h;
}

}  // namespace

TEST_CASE("forward-backward matches exhaustive path enumeration") {
    Rng rng(12345);
    for (std::size_t T = 1; T <= 8; ++T) {
        for (int rep = 0; rep < 4; ++rep) {
            const HmmSpec h = random_spec(rng);
            std::vector<double> y(T);
            for (double& v : y) v = 2.5 * rng.uniform() - 1.25;

            const DecodedPath fb = decode_telegraph(h, y);
            const BruteForce ref = brute_force(h, y);

            CHECK(std::abs(fb.log_likelihood - ref.log_likelihood) < 1e-10);
            for (std::size_t t = 0; t < T; ++t) {
                double col = 0.0;
                for (int s = 0; s < 3; ++s) {
                    CHECK(std::abs(fb.posterior[t][s] - ref.posterior[t][s]) < 1e-10);
                    col += fb.posterior[t][s];
                }
                CHECK(std::abs(col - 1.0) < 1e-9);
                // reported state is the posterior argmax
                int arg = 0;
                for (int s = 1; s < 3; ++s)
                    if (fb.posterior[t][s] > fb.posterior[t][arg]) arg = s;
                CHECK(fb.states[t] == arg);
            }
        }
    }
}

TEST_CASE("transition model: exponential waiting times, absorbing dark state") {
    const double mu = 1.0, sigma = 0.3, dt = 4e-8, rs = 8e6, rd = 2e4;
    const HmmSpec h = build_hmm(mu, sigma, dt, rs, rd);
    const double ps = 1.0 - std::exp(-rs * dt);
    const double pd = 1.0 - std::exp(-rd * dt);

    CHECK(h.transition[telegraph_neg][telegraph_pos] == Catch::Approx((1.0 - pd) * ps));
    CHECK(h.transition[telegraph_neg][telegraph_neg] == Catch::Approx((1.0 - pd) * (1.0 - ps)));
    CHECK(h.transition[telegraph_neg][telegraph_dark] == Catch::Approx(pd));
    CHECK(h.transition[telegraph_pos][telegraph_neg] == Catch::Approx((1.0 - pd) * ps));
    CHECK(h.transition[telegraph_dark][telegraph_neg] == 0.0);
    CHECK(h.transition[telegraph_dark][telegraph_pos] == 0.0);
    CHECK(h.transition[telegraph_dark][telegraph_dark] == 1.0);
    for (int r = 0; r < 3; ++r) {
        double rowsum = 0.0;
        for (int s = 0; s < 3; ++s) rowsum += h.transition[r][s];
        CHECK(rowsum == Catch::Approx(1.0).margin(1e-15));
    }
    CHECK(h.initial[telegraph_dark] == 0.0);
    CHECK(h.emission_mean[telegraph_neg] == -mu);
    CHECK(h.emission_mean[telegraph_dark] == 0.0);

    CHECK_THROWS_AS(build_hmm(mu, sigma, 1e-6, 6e5), undersampled_model);
    CHECK_THROWS_AS(build_hmm(0.0, sigma, dt, rs), std::invalid_argument);
    CHECK_THROWS_AS(build_hmm(mu, 0.0, dt, rs), std::invalid_argument);
    CHECK_THROWS_AS(build_hmm(mu, sigma, 0.0, rs), std::invalid_argument);
    CHECK_THROWS_AS(build_hmm(mu, sigma, dt, -1.0), std::invalid_argument);
}

TEST_CASE("reset points decode independent segments in one call") {
    Rng rng(77);
    const HmmSpec h = build_hmm(1.0, 0.4, 4e-8, 8e6, 1e4);
    std::vector<double> y(40);
    for (double& v : y) v = (rng.uniform() < 0.5 ? -1.0 : 1.0) + 0.4 * rng.normal();

    const std::size_t cut = 25;
    const DecodedPath joint = decode_telegraph(h, y, {cut});
    const DecodedPath head = decode_telegraph(h, {y.begin(), y.begin() + cut});
    const DecodedPath tail = decode_telegraph(h, {y.begin() + cut, y.end()});

    CHECK(std::abs(joint.log_likelihood - (head.log_likelihood + tail.log_likelihood)) < 1e-10);
    for (std::size_t t = 0; t < y.size(); ++t) {
        const std::array<double, 3>& ref =
            t < cut ? head.posterior[t] : tail.posterior[t - cut];
        for (int s = 0; s < 3; ++s) CHECK(std::abs(joint.posterior[t][s] - ref[s]) < 1e-12);
    }

    CHECK_THROWS_AS(decode_telegraph(h, y, {40}), std::invalid_argument);   // out of range
    CHECK_THROWS_AS(decode_telegraph(h, y, {5, 5}), std::invalid_argument); // not increasing
    CHECK_THROWS_AS(decode_telegraph(h, {}), std::invalid_argument);
}

TEST_CASE("decoder recovers a noisy synthetic telegraph") {
    SystemParams p;
    DetectorConfig det;
    det.oversample = 1;
    det.filter_preset = "none";  // no group delay to compensate
    const double amp = 1.0, rate = 5e5, t_end = 4e-4;
    const std::uint64_t seed = 99;

    // same seed, same switching path: the noise-free twin provides the truth
    DetectorConfig clean = det;
    clean.noise_scale = 0.0;
    const PhotocurrentTrace truth = make_synthetic_telegraph(
        p, clean, t_end, amp, rate, std::numeric_limits<double>::infinity(), seed);
    const PhotocurrentTrace noisy = make_synthetic_telegraph(
        p, det, t_end, amp, rate, std::numeric_limits<double>::infinity(), seed);
    REQUIRE(truth.y.size() == noisy.y.size());

    const HmmSpec h = build_hmm(amp, noisy.shot_sigma, 1.0 / noisy.sample_rate, rate);
    const DecodedPath path = decode_telegraph(h, noisy.y);

    std::size_t wrong = 0;
    for (std::size_t k = 0; k < noisy.y.size(); ++k) {
        const int want = truth.y[k] > 0.0 ? telegraph_pos : telegraph_neg;
        if (path.states[k] != want) ++wrong;
    }
    const double mis = static_cast<double>(wrong) / static_cast<double>(noisy.y.size());
    CHECK(mis < 0.02);
}

TEST_CASE("a dark collapse is decoded as the absorbing state") {
    SystemParams p;
    DetectorConfig det;
    det.oversample = 1;
    det.filter_preset = "none";
    const double amp = 1.0, rate = 5e5, t_end = 4e-4, dark_lifetime = 1e-4;
    const PhotocurrentTrace tr =
        make_synthetic_telegraph(p, det, t_end, amp, rate, dark_lifetime, 31);
    REQUIRE(std::isfinite(tr.dark_time));
    REQUIRE(tr.dark_time < 0.7 * t_end);

    const HmmSpec h =
        build_hmm(amp, tr.shot_sigma, 1.0 / tr.sample_rate, rate, 1.0 / dark_lifetime);
    const DecodedPath path = decode_telegraph(h, tr.y);

    // well after the collapse the posterior must commit to dark
    const std::size_t from =
        static_cast<std::size_t>((tr.dark_time + 2e-5) * tr.sample_rate);
    std::size_t dark_hits = 0, n = 0;
    for (std::size_t k = from; k < tr.y.size(); ++k) {
        ++n;
        if (path.states[k] == telegraph_dark) ++dark_hits;
    }
    REQUIRE(n > 100);
    CHECK(static_cast<double>(dark_hits) / static_cast<double>(n) > 0.99);
    // and it never un-absorbs: once dark, dark forever
    bool seen_dark = false, unabsorbed = false;
    for (std::size_t k = 0; k < tr.y.size(); ++k) {
        if (path.states[k] == telegraph_dark) seen_dark = true;
        else if (seen_dark) unabsorbed = true;
    }
    CHECK(!unabsorbed);
}

TEST_CASE("hopeless observations fail loudly instead of returning junk") {
    const HmmSpec h = build_hmm(1.0, 1e-3, 4e-8, 1e5);
    const std::vector<double> y = {1.0, 1.0, 1e3, 1.0};
    CHECK_THROWS_AS(decode_telegraph(h, y), decoding_error);
}

TEST_CASE("ground-truth labels: hysteresis carry-through and dark tail") {
    TrajectoryRecord rec;
    rec.kept_dt = 1.0;
    rec.y_cond = {0.05, 0.5, 0.05, -0.05, -0.5, 0.05, 0.3, 0.3};
    rec.dark_time = 6.0;  // samples 6 and 7 are past the collapse
    const std::vector<int> labels = true_telegraph_labels(rec, 1.0, 0.1);
    const std::vector<int> expect = {
        telegraph_pos,   // 0.05: undecided yet, takes the sign of y_cond
        telegraph_pos,   // 0.5: committed +
        telegraph_pos,   // 0.05: inside the band, carries +
        telegraph_pos,   // -0.05: still inside the band
        telegraph_neg,   // -0.5: committed -
        telegraph_neg,   // 0.05: inside the band, carries -
        telegraph_dark, telegraph_dark};
    CHECK(labels == expect);
    CHECK_THROWS_AS(true_telegraph_labels(rec, 0.0), std::invalid_argument);
}

TEST_CASE("end-to-end decoder benchmark returns a coherent report") {
    SystemParams p;
    p.drive = drive_from_photon_number(p, 1.0);
    SimConfig cfg;
    cfg.t_end = 3e-6;
    DetectorConfig det;
    const HmmSpec h = build_hmm(p.g / (2.0 * p.kappa), shot_noise_sigma(det, p),
                                1.0 / det.sample_rate, 0.5 * p.gamma_perp);

    const AccuracyReport rep = evaluate_accuracy(p, cfg, det, h, 2, 555);
    CHECK(rep.n_trials == 2);
    CHECK(rep.misclassification >= 0.0);
    CHECK(rep.misclassification <= 1.0);
    CHECK(rep.group_delay_samples > 0.0);  // the causal lowpass delays the trace
    std::size_t total = 0;
    for (const auto& row : rep.confusion)
        for (std::size_t c : row) total += c;
    CHECK(total == rep.n_samples);
    CHECK(rep.n_samples > 0);

    CHECK_THROWS_AS(evaluate_accuracy(p, cfg, det, h, 0, 1), std::invalid_argument);
}
