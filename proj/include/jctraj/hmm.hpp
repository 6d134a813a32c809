#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "analysis.hpp"
#include "errors.hpp"
#include "signal.hpp"
#include "stats.hpp"
#include "trajectory.hpp"

namespace jctraj {

// Telegraph decoder states.  The two bright branches sit at -mu and +mu; the
// dark state (atom lost) sits at 0 and is absorbing.
enum TelegraphState : int { telegraph_neg = 0, telegraph_pos = 1, telegraph_dark = 2 };

inline const char* telegraph_state_name(int s) {
    switch (s) {
        case telegraph_neg: return "neg";
        case telegraph_pos: return "pos";
        case telegraph_dark: return "dark";
        default: throw std::invalid_argument("telegraph_state_name: bad state");
    }
}

// Discrete-time three-state hidden Markov model over photocurrent samples.
// Per-step probabilities come from exponential waiting times:
//   p_switch = 1 - exp(-switch_rate dt)   (neg <-> pos, after surviving dark)
//   p_dark   = 1 - exp(-dark_rate dt)     (either branch -> dark, absorbing)
// Emissions are Gaussians of common sigma at -mu, +mu, 0.  The initial
// distribution is (1/2, 1/2, 0).
struct HmmSpec {
    double mu = 0.0;
    double sigma = 0.0;
    double dt = 0.0;
    double switch_rate = 0.0;
    double dark_rate = 0.0;
    std::array<std::array<double, 3>, 3> transition{};  // [from][to]
    std::array<double, 3> initial{};
    std::array<double, 3> emission_mean{};
};

inline HmmSpec build_hmm(double mu, double sigma, double dt, double switch_rate,
                         double dark_rate = 0.0) {
    if (!(mu > 0.0)) throw std::invalid_argument("build_hmm: mu must be > 0");
    if (!(sigma > 0.0)) throw std::invalid_argument("build_hmm: sigma must be > 0");
    if (!(dt > 0.0)) throw std::invalid_argument("build_hmm: dt must be > 0");
    if (!(switch_rate >= 0.0) || !(dark_rate >= 0.0))
        throw std::invalid_argument("build_hmm: rates must be >= 0");
    if (switch_rate * dt > 0.5)
        throw undersampled_model(
            "build_hmm: switch_rate * dt = " + std::to_string(switch_rate * dt) +
            " > 0.5; the two-point transition model needs a finer sample spacing");

    HmmSpec h;
    h.mu = mu;
    h.sigma = sigma;
    h.dt = dt;
    h.switch_rate = switch_rate;
    h.dark_rate = dark_rate;
    const double ps = 1.0 - std::exp(-switch_rate * dt);
    const double pd = 1.0 - std::exp(-dark_rate * dt);
    h.transition[telegraph_neg] = {(1.0 - pd) * (1.0 - ps), (1.0 - pd) * ps, pd};
    h.transition[telegraph_pos] = {(1.0 - pd) * ps, (1.0 - pd) * (1.0 - ps), pd};
    h.transition[telegraph_dark] = {0.0, 0.0, 1.0};
    h.initial = {0.5, 0.5, 0.0};
    h.emission_mean = {-mu, mu, 0.0};
    return h;
}

struct DecodedPath {
    std::vector<int> states;                      // posterior argmax per sample
    std::vector<std::array<double, 3>> posterior; // [t][state]
    double log_likelihood = 0.0;
};

// Scaled forward-backward smoothing.  `reset_points` lists sample indices
// where the chain is re-initialized with the initial distribution and no
// transition is scored across the boundary (independent segments decoded in
// one call).  Index 0 is implicit.
inline DecodedPath decode_telegraph(const HmmSpec& h, const std::vector<double>& y,
                                    const std::vector<std::size_t>& reset_points = {}) {
    const std::size_t T = y.size();
    if (T == 0) throw std::invalid_argument("decode_telegraph: empty observation sequence");
    for (std::size_t i = 0; i < reset_points.size(); ++i) {
        if (reset_points[i] >= T || (i > 0 && reset_points[i] <= reset_points[i - 1]))
            throw std::invalid_argument("decode_telegraph: reset_points must be increasing and in range");
    }

    std::vector<bool> is_reset(T, false);
    is_reset[0] = true;
    for (std::size_t r : reset_points) is_reset[r] = true;

    const auto emit = [&](std::size_t t, int s) {
        return normal_pdf(y[t], h.emission_mean[s], h.sigma);
    };

    std::vector<std::array<double, 3>> alpha(T);
    std::vector<double> scale(T);
    for (std::size_t t = 0; t < T; ++t) {
        std::array<double, 3> a{};
        if (is_reset[t]) {
            for (int s = 0; s < 3; ++s) a[s] = h.initial[s] * emit(t, s);
        } else {
            for (int s = 0; s < 3; ++s) {
                double acc = 0.0;
                for (int r = 0; r < 3; ++r) acc += alpha[t - 1][r] * h.transition[r][s];
                a[s] = acc * emit(t, s);
            }
        }
        const double c = a[0] + a[1] + a[2];
        if (!(c > 0.0) || !std::isfinite(c))
            throw decoding_error("decode_telegraph: forward pass underflowed at sample " +
                                 std::to_string(t));
        for (int s = 0; s < 3; ++s) alpha[t][s] = a[s] / c;
        scale[t] = c;
    }

    std::vector<std::array<double, 3>> beta(T);
    beta[T - 1] = {1.0, 1.0, 1.0};
    for (std::size_t t = T - 1; t-- > 0;) {
        if (is_reset[t + 1]) {
            beta[t] = {1.0, 1.0, 1.0};
            continue;
        }
        for (int s = 0; s < 3; ++s) {
            double acc = 0.0;
            for (int r = 0; r < 3; ++r)
                acc += h.transition[s][r] * emit(t + 1, r) * beta[t + 1][r];
            beta[t][s] = acc / scale[t + 1];
        }
        if (!std::isfinite(beta[t][0] + beta[t][1] + beta[t][2]))
            throw decoding_error("decode_telegraph: backward pass diverged at sample " +
                                 std::to_string(t));
    }

    DecodedPath out;
    out.states.resize(T);
    out.posterior.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
        std::array<double, 3> g{};
        double norm = 0.0;
        for (int s = 0; s < 3; ++s) {
            g[s] = alpha[t][s] * beta[t][s];
            norm += g[s];
        }
        if (!(norm > 0.0) || !std::isfinite(norm))
            throw decoding_error("decode_telegraph: posterior degenerate at sample " +
                                 std::to_string(t));
        int arg = 0;
        for (int s = 0; s < 3; ++s) {
            g[s] /= norm;
            if (g[s] > g[arg]) arg = s;
        }
        out.posterior[t] = g;
        out.states[t] = arg;
        out.log_likelihood += std::log(scale[t]);
    }
    return out;
}

// Ground-truth telegraph labels from the conditional record: Schmitt trigger
// on y_cond with hysteresis band +-hysteresis*mu (carrying the previous
// branch through brief excursions), dark from the recorded dark time on.
// Samples before the first committed branch get the sign of y_cond.
inline std::vector<int> true_telegraph_labels(const TrajectoryRecord& rec, double mu,
                                              double hysteresis = 0.1) {
    if (!(mu > 0.0)) throw std::invalid_argument("true_telegraph_labels: mu must be > 0");
    const double band = hysteresis * mu;
    std::vector<int> labels(rec.size(), telegraph_neg);
    int state = 0;  // 0 = undecided yet
    std::size_t first_decided = rec.size();
    for (std::size_t k = 0; k < rec.size(); ++k) {
        if (rec.time(k) >= rec.dark_time) {
            labels[k] = telegraph_dark;
            continue;
        }
        if (rec.y_cond[k] > band) state = 1;
        else if (rec.y_cond[k] < -band) state = -1;
        if (state == 0) {
            first_decided = std::min(first_decided, k + 1);
            labels[k] = rec.y_cond[k] >= 0.0 ? telegraph_pos : telegraph_neg;
        } else {
            labels[k] = state > 0 ? telegraph_pos : telegraph_neg;
        }
    }
    return labels;
}

struct AccuracyReport {
    double misclassification = 1.0;
    std::array<std::array<std::size_t, 3>, 3> confusion{};  // [truth][decoded]
    std::size_t n_samples = 0;
    std::size_t n_trials = 0;
    double mu = 0.0;
    double sigma = 0.0;
    double group_delay_samples = 0.0;
};

// End-to-end decoder benchmark: simulate fresh trajectories, push them
// through the detector, decode, and compare to ground-truth labels from the
// conditional record.  The causal filter chain delays the photocurrent by
// its low-frequency group delay, so truth labels are shifted by the nearest
// whole number of record samples before comparison; scoring starts after
// both the physical settle window and the filter transient.
inline AccuracyReport evaluate_accuracy(const SystemParams& p, const SimConfig& cfg,
                                        const DetectorConfig& det, const HmmSpec& h,
                                        int n_trials, std::uint64_t seed_base) {
    if (n_trials < 1) throw std::invalid_argument("evaluate_accuracy: n_trials must be >= 1");
    const double mu_true = p.g / (2.0 * p.kappa);

    AccuracyReport rep;
    rep.mu = h.mu;
    rep.sigma = h.sigma;
    rep.n_trials = static_cast<std::size_t>(n_trials);

    for (int trial = 0; trial < n_trials; ++trial) {
        SimConfig c = cfg;
        c.seed = seed_base;
        const TrajectoryRecord rec =
            simulate_trajectory(p, c, static_cast<std::uint64_t>(trial));
        const PhotocurrentTrace tr = synthesize_photocurrent(rec, det);

        double delay_s = 0.0;
        for (const NoiseStage& st : tr.noise.stages) delay_s += group_delay_dc(st.filter);
        const long shift_rec = std::lround(delay_s / rec.kept_dt);
        rep.group_delay_samples = delay_s * tr.sample_rate;

        const DecodedPath path = decode_telegraph(h, tr.y);
        const std::vector<int> truth = true_telegraph_labels(rec, mu_true);

        const std::size_t k_lo = static_cast<std::size_t>(
            std::ceil((rec.settle_time + delay_s) * tr.sample_rate));
        for (std::size_t k = k_lo; k < tr.y.size(); ++k) {
            const long rec_idx =
                static_cast<long>(k) * static_cast<long>(det.oversample) - shift_rec;
            if (rec_idx < 0 || rec_idx >= static_cast<long>(rec.size())) continue;
            const int t_label = truth[static_cast<std::size_t>(rec_idx)];
            const int d_label = path.states[k];
            rep.confusion[t_label][d_label] += 1;
            rep.n_samples += 1;
        }
    }

    if (rep.n_samples == 0) throw decoding_error("evaluate_accuracy: no samples scored");
    std::size_t wrong = 0;
    for (int t = 0; t < 3; ++t)
        for (int d = 0; d < 3; ++d)
            if (t != d) wrong += rep.confusion[t][d];
    rep.misclassification = static_cast<double>(wrong) / static_cast<double>(rep.n_samples);
    return rep;
}

}  // namespace jctraj
