#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "model.hpp"
#include "signal.hpp"
#include "stats.hpp"

namespace jctraj {

struct HistogramData {
    std::vector<double> edges;    // size n_bins + 1
    std::vector<double> counts;   // size n_bins
    double total = 0.0;
    int n_bins() const { return static_cast<int>(counts.size()); }
    double center(int b) const { return 0.5 * (edges[b] + edges[b + 1]); }
    double width() const { return edges[1] - edges[0]; }
};

// Equal-width histogram.  n_bins = 0 selects Freedman-Diaconis width from
// the interquartile range, clamped to [30, 200] bins.
inline HistogramData make_histogram(std::vector<double> xs, int n_bins = 0) {
    if (xs.size() < 10) throw std::invalid_argument("make_histogram: need at least 10 samples");
    std::sort(xs.begin(), xs.end());
    const double lo = xs.front(), hi = xs.back();
    if (!(hi > lo)) throw std::invalid_argument("make_histogram: degenerate sample range");
    if (n_bins <= 0) {
        const double q1 = xs[xs.size() / 4];
        const double q3 = xs[(3 * xs.size()) / 4];
        const double iqr = q3 - q1;
        const double w = 2.0 * iqr / std::cbrt(static_cast<double>(xs.size()));
        n_bins = w > 0.0 ? static_cast<int>(std::ceil((hi - lo) / w)) : 100;
        n_bins = std::clamp(n_bins, 30, 200);
    }
    HistogramData h;
    h.edges.resize(n_bins + 1);
    const double span = (hi - lo) * (1.0 + 1e-12) + 1e-300;
    for (int b = 0; b <= n_bins; ++b)
        h.edges[b] = lo + span * static_cast<double>(b) / n_bins;
    h.counts.assign(n_bins, 0.0);
    for (double x : xs) {
        int b = static_cast<int>((x - lo) / span * n_bins);
        b = std::clamp(b, 0, n_bins - 1);
        h.counts[b] += 1.0;
    }
    h.total = static_cast<double>(xs.size());
    return h;
}

// Symmetric-width two-Gaussian mixture with the component sigma held fixed
// (to the analytic shot-noise level); centers and the weight are free.
struct BiGaussianFit {
    double c1 = 0.0, c2 = 0.0;  // canonical order c1 <= c2
    double weight1 = 0.5;       // mixture weight of the c1 component
    double sigma = 0.0;
    double nll = 0.0;         // Poisson binned negative log-likelihood
    double single_nll = 0.0;  // best single-Gaussian reference (same sigma)
    double lr_stat = 0.0;     // 2 (single_nll - nll), ~chi2(2) under "one lump"
    double p_value = 1.0;     // chi2_sf(lr_stat, 2)
    bool converged = false;
    double splitting() const { return c2 - c1; }

    // Model density scaled to histogram counts per unit x.
    double density(double x, double total, double bin_width) const {
        return total * bin_width *
               (weight1 * normal_pdf(x, c1, sigma) +
                (1.0 - weight1) * normal_pdf(x, c2, sigma));
    }
};

namespace detail {

// Expected fraction of a N(c, sigma) component inside bin b.
inline double bin_mass(const HistogramData& h, int b, double c, double sigma) {
    return normal_cdf(h.edges[b + 1], c, sigma) - normal_cdf(h.edges[b], c, sigma);
}

inline double poisson_binned_nll(const HistogramData& h, double c1, double c2, double w,
                                 double sigma) {
    double nll = 0.0;
    for (int b = 0; b < h.n_bins(); ++b) {
        const double mu =
            h.total * (w * bin_mass(h, b, c1, sigma) + (1.0 - w) * bin_mass(h, b, c2, sigma)) +
            1e-12 * h.total / h.n_bins();
        nll += mu - h.counts[b] * std::log(mu);
    }
    return nll;
}

// Compact Nelder-Mead for the few-parameter fits here.
inline bool nelder_mead(std::function<double(const std::vector<double>&)> f,
                        std::vector<double>& x, double step, int max_iter = 600,
                        double tol = 1e-11) {
    const std::size_t n = x.size();
    std::vector<std::vector<double>> pts(n + 1, x);
    std::vector<double> fv(n + 1);
    for (std::size_t i = 1; i <= n; ++i) pts[i][i - 1] += step;
    for (std::size_t i = 0; i <= n; ++i) fv[i] = f(pts[i]);

    for (int it = 0; it < max_iter; ++it) {
        std::vector<std::size_t> order(n + 1);
        for (std::size_t i = 0; i <= n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        const std::size_t best = order[0], worst = order[n], second = order[n - 1];
        if (std::abs(fv[worst] - fv[best]) <= tol * (1.0 + std::abs(fv[best]))) {
            x = pts[best];
            return true;
        }
        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (std::size_t j = 0; j < n; ++j) centroid[j] += pts[i][j];
        }
        for (double& c : centroid) c /= static_cast<double>(n);

        const auto blend = [&](double t) {
            std::vector<double> p(n);
            for (std::size_t j = 0; j < n; ++j)
                p[j] = centroid[j] + t * (pts[worst][j] - centroid[j]);
            return p;
        };
        std::vector<double> refl = blend(-1.0);
        const double f_refl = f(refl);
        if (f_refl < fv[order[0]]) {
            std::vector<double> expa = blend(-2.0);
            const double f_expa = f(expa);
            if (f_expa < f_refl) {
                pts[worst] = expa;
                fv[worst] = f_expa;
            } else {
                pts[worst] = refl;
                fv[worst] = f_refl;
            }
        } else if (f_refl < fv[second]) {
            pts[worst] = refl;
            fv[worst] = f_refl;
        } else {
            std::vector<double> contr = blend(0.5);
            const double f_contr = f(contr);
            if (f_contr < fv[worst]) {
                pts[worst] = contr;
                fv[worst] = f_contr;
            } else {
                for (std::size_t i = 0; i <= n; ++i) {
                    if (i == best) continue;
                    for (std::size_t j = 0; j < n; ++j)
                        pts[i][j] = pts[best][j] + 0.5 * (pts[i][j] - pts[best][j]);
                    fv[i] = f(pts[i]);
                }
            }
        }
    }
    return false;
}

inline double logit(double w) { return std::log(w / (1.0 - w)); }
inline double expit(double l) { return 1.0 / (1.0 + std::exp(-l)); }

}  // namespace detail

// Maximum-likelihood two-Gaussian fit of a histogram with fixed component
// sigma.  Multi-start Nelder-Mead on (c1, c2, logit weight) from center
// guesses at +-sigma, +-2 sigma, +-4 sigma around the sample mean; the
// likelihood-ratio statistic against the best single Gaussian (same fixed
// sigma) is attached.  Throws fit_error if no start converges.
inline BiGaussianFit fit_bigaussian(const HistogramData& h, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("fit_bigaussian: sigma must be > 0");

    double mean_x = 0.0;
    for (int b = 0; b < h.n_bins(); ++b) mean_x += h.counts[b] * h.center(b);
    mean_x /= h.total;

    const auto nll3 = [&](const std::vector<double>& q) {
        return detail::poisson_binned_nll(h, q[0], q[1], detail::expit(q[2]), sigma);
    };

    BiGaussianFit best;
    best.sigma = sigma;
    double best_nll = std::numeric_limits<double>::infinity();
    bool any = false;
    const double ks[] = {1.0, 2.0, 4.0};
    for (double ka : ks) {
        for (double kb : ks) {
            std::vector<double> q = {mean_x - ka * sigma, mean_x + kb * sigma, 0.0};
            const bool ok = detail::nelder_mead(nll3, q, 0.5 * sigma);
            const double v = nll3(q);
            if (ok && v < best_nll) {
                best_nll = v;
                best.c1 = q[0];
                best.c2 = q[1];
                best.weight1 = detail::expit(q[2]);
                any = true;
            }
        }
    }
    if (!any) throw fit_error("fit_bigaussian: no start converged");
    if (best.c1 > best.c2) {
        std::swap(best.c1, best.c2);
        best.weight1 = 1.0 - best.weight1;
    }
    best.nll = best_nll;
    best.converged = true;

    const auto nll1 = [&](const std::vector<double>& q) {
        return detail::poisson_binned_nll(h, q[0], q[0], 0.5, sigma);
    };
    double single_best = std::numeric_limits<double>::infinity();
    for (double c0 : {mean_x, best.c1, best.c2, 0.5 * (best.c1 + best.c2)}) {
        std::vector<double> q = {c0};
        if (detail::nelder_mead(nll1, q, 0.5 * sigma)) single_best = std::min(single_best, nll1(q));
    }
    if (!std::isfinite(single_best))
        throw fit_error("fit_bigaussian: single-Gaussian reference did not converge");
    best.single_nll = single_best;
    best.lr_stat = std::max(0.0, 2.0 * (single_best - best_nll));
    best.p_value = chi2_sf(best.lr_stat, 2.0);
    return best;
}

// Post-settle, pre-dark sample window of a trace.
inline std::pair<std::size_t, std::size_t> analysis_window(const PhotocurrentTrace& tr) {
    const double t_hi = std::min(tr.dark_time, tr.t0 + tr.y.size() / tr.sample_rate);
    std::size_t lo = static_cast<std::size_t>(
        std::max(0.0, std::ceil((tr.settle_time - tr.t0) * tr.sample_rate)));
    std::size_t hi = static_cast<std::size_t>(
        std::max(0.0, std::floor((t_hi - tr.t0) * tr.sample_rate)));
    hi = std::min<std::size_t>(hi, tr.y.size());
    if (lo >= hi) throw std::invalid_argument("analysis_window: trace has no usable samples");
    return {lo, hi};
}

struct SplittingMeasurement {
    double splitting = 0.0;
    double stderr_boot = 0.0;
    BiGaussianFit fit;
    HistogramData hist;
    std::size_t n_samples = 0;
    std::size_t n_traces = 0;
};

// Streaming splitting measurement: traces are added one at a time (so the
// caller can drop the much larger raw record after synthesis), post-settle
// samples are pooled into one histogram, the two-Gaussian fit gives the
// splitting, and the quoted standard error is a bootstrap over whole
// trajectories (the only independent unit).
class SplittingAccumulator {
  public:
    void add(const PhotocurrentTrace& tr) {
        const auto [lo, hi] = analysis_window(tr);
        if (!per_record_.empty() && std::abs(tr.shot_sigma - sigma_) > 1e-9 * sigma_)
            throw std::invalid_argument(
                "SplittingAccumulator: traces have inconsistent shot-noise levels");
        sigma_ = tr.shot_sigma;
        per_record_.emplace_back(tr.y.begin() + static_cast<std::ptrdiff_t>(lo),
                                 tr.y.begin() + static_cast<std::ptrdiff_t>(hi));
    }

    std::size_t n_traces() const { return per_record_.size(); }

    SplittingMeasurement finalize(int n_boot = 200, std::uint64_t boot_seed = 1234) const {
        if (per_record_.empty())
            throw std::invalid_argument("SplittingAccumulator: no traces added");
        std::vector<double> pooled;
        for (const auto& row : per_record_) pooled.insert(pooled.end(), row.begin(), row.end());

        SplittingMeasurement out;
        out.hist = make_histogram(pooled);
        out.fit = fit_bigaussian(out.hist, sigma_);
        out.splitting = out.fit.splitting();
        out.n_samples = pooled.size();
        out.n_traces = per_record_.size();

        if (n_boot > 0) {
            if (per_record_.size() < 2)
                throw resampling_error(
                    "SplittingAccumulator: bootstrap needs at least 2 trajectories");
            // Per-record counts on the pooled edges; a resample is a sum of rows.
            const int nb = out.hist.n_bins();
            const double lo_edge = out.hist.edges.front();
            const double span = out.hist.edges.back() - lo_edge;
            std::vector<std::vector<double>> row_counts(per_record_.size(),
                                                        std::vector<double>(nb, 0.0));
            std::vector<double> row_totals(per_record_.size(), 0.0);
            for (std::size_t r = 0; r < per_record_.size(); ++r) {
                for (double x : per_record_[r]) {
                    int b = static_cast<int>((x - lo_edge) / span * nb);
                    b = std::clamp(b, 0, nb - 1);
                    row_counts[r][b] += 1.0;
                }
                row_totals[r] = static_cast<double>(per_record_[r].size());
            }
            Rng rng(boot_seed);
            std::vector<double> boots;
            boots.reserve(static_cast<std::size_t>(n_boot));
            for (int it = 0; it < n_boot; ++it) {
                HistogramData hb;
                hb.edges = out.hist.edges;
                hb.counts.assign(nb, 0.0);
                hb.total = 0.0;
                for (std::size_t r = 0; r < per_record_.size(); ++r) {
                    const std::size_t pick =
                        static_cast<std::size_t>(rng.uniform() * per_record_.size());
                    for (int b = 0; b < nb; ++b) hb.counts[b] += row_counts[pick][b];
                    hb.total += row_totals[pick];
                }
                try {
                    boots.push_back(fit_bigaussian(hb, sigma_).splitting());
                } catch (const fit_error&) {
                    // a rare degenerate resample is skipped rather than fatal
                }
            }
            if (boots.size() >= 10) {
                const Moments m = moments(boots);
                out.stderr_boot = std::sqrt(m.var);
            }
        }
        return out;
    }

  private:
    std::vector<std::vector<double>> per_record_;
    double sigma_ = 0.0;
};

// Convenience wrapper over SplittingAccumulator for ensembles that already
// fit in memory.
inline SplittingMeasurement measure_splitting(const std::vector<TrajectoryRecord>& recs,
                                              const DetectorConfig& det, int n_boot = 200,
                                              std::uint64_t boot_seed = 1234) {
    if (recs.empty()) throw std::invalid_argument("measure_splitting: empty ensemble");
    SplittingAccumulator acc;
    for (const TrajectoryRecord& r : recs) acc.add(synthesize_photocurrent(r, det));
    return acc.finalize(n_boot, boot_seed);
}

struct AcfResult {
    double dt = 0.0;
    std::vector<double> mean;                   // acf averaged over traces, lag 0 .. max
    std::vector<double> se;                     // standard error across traces
    std::vector<std::vector<double>> per_trace; // per-trace acfs, for jackknifing
    std::size_t n_traces = 0;
};

// Raw biased autocorrelation of one trace over its analysis window:
// acf(k) = (1/n) sum_i y_i y_{i+k}, lag 0 .. max_lag.  Not normalized at
// lag 0 and no mean subtraction (units: squared quadrature amplitude).
// Callers ac-couple the trace first; any residual slow or DC content then
// shows up honestly as long-lag correlation instead of being absorbed into
// a mean estimate.  That matters for branch-preferring (detuned) signals,
// whose nonzero quadrature mean passes through an AC-coupling filter as a
// slowly decaying component.
inline std::vector<double> autocorrelation(const PhotocurrentTrace& tr, double max_lag_s) {
    if (!(max_lag_s > 0.0)) throw std::invalid_argument("autocorrelation: max_lag must be > 0");
    const double rate = tr.sample_rate;
    const std::size_t n_lag = static_cast<std::size_t>(std::floor(max_lag_s * rate)) + 1;
    const auto [lo, hi] = analysis_window(tr);
    if (hi - lo < 10 * n_lag)
        throw std::invalid_argument("autocorrelation: trace shorter than 10x max_lag");
    const std::size_t n = hi - lo;
    std::vector<double> acf(n_lag, 0.0);
    for (std::size_t k = 0; k < n_lag; ++k) {
        double s = 0.0;
        for (std::size_t i = lo; i + k < hi; ++i) s += tr.y[i] * tr.y[i + k];
        acf[k] = s / static_cast<double>(n);  // biased normalization
    }
    return acf;
}

// Per-trace raw autocorrelations averaged over the ensemble, with
// cross-trace standard errors.
inline AcfResult ensemble_autocorrelation(const std::vector<PhotocurrentTrace>& traces,
                                          double max_lag_s) {
    if (traces.empty()) throw std::invalid_argument("ensemble_autocorrelation: no traces");
    const double rate = traces.front().sample_rate;
    const std::size_t n_lag =
        static_cast<std::size_t>(std::floor(max_lag_s * rate)) + 1;

    std::vector<std::vector<double>> acfs;
    for (const PhotocurrentTrace& tr : traces) {
        if (std::abs(tr.sample_rate - rate) > 1e-6 * rate)
            throw resampling_error("ensemble_autocorrelation: mixed sample rates");
        acfs.push_back(autocorrelation(tr, max_lag_s));
    }

    AcfResult out;
    out.dt = 1.0 / rate;
    out.n_traces = acfs.size();
    out.mean.assign(n_lag, 0.0);
    out.se.assign(n_lag, 0.0);
    for (const auto& a : acfs)
        for (std::size_t k = 0; k < n_lag; ++k) out.mean[k] += a[k];
    for (double& v : out.mean) v /= static_cast<double>(acfs.size());
    if (acfs.size() > 1) {
        for (std::size_t k = 0; k < n_lag; ++k) {
            double s2 = 0.0;
            for (const auto& a : acfs) s2 += std::pow(a[k] - out.mean[k], 2);
            out.se[k] = std::sqrt(s2 / (acfs.size() * (acfs.size() - 1.0)));
        }
    }
    out.per_trace = std::move(acfs);
    return out;
}

// Integral decay timescale of a normalized acf: dt (1/2 + sum r_k) over
// lags until the first nonpositive value.  Exact for an exponential in the
// continuum limit; robust to the noisy tail because summation stops at the
// first zero crossing.
inline double integral_decay_time(const AcfResult& acf) {
    if (acf.mean.empty() || !(acf.mean[0] > 0.0))
        throw std::invalid_argument("integral_decay_time: invalid acf");
    double s = 0.5;
    for (std::size_t k = 1; k < acf.mean.size(); ++k) {
        const double r = acf.mean[k] / acf.mean[0];
        if (r <= 0.0) break;
        s += r;
    }
    return s * acf.dt;
}

// Leave-one-trace-out jackknife of the integral decay time: returns the
// full-sample estimate and its jackknife standard error.
inline std::pair<double, double> integral_decay_time_jackknife(const AcfResult& acf) {
    const double full = integral_decay_time(acf);
    const std::size_t n = acf.per_trace.size();
    if (n < 2) return {full, 0.0};
    std::vector<double> loo;
    loo.reserve(n);
    for (std::size_t drop = 0; drop < n; ++drop) {
        AcfResult sub;
        sub.dt = acf.dt;
        sub.mean.assign(acf.mean.size(), 0.0);
        for (std::size_t t = 0; t < n; ++t) {
            if (t == drop) continue;
            for (std::size_t k = 0; k < sub.mean.size(); ++k)
                sub.mean[k] += acf.per_trace[t][k];
        }
        for (double& v : sub.mean) v /= static_cast<double>(n - 1);
        loo.push_back(integral_decay_time(sub));
    }
    const double m = mean(loo);
    double s2 = 0.0;
    for (double v : loo) s2 += (v - m) * (v - m);
    const double se = std::sqrt(s2 * (static_cast<double>(n) - 1.0) / static_cast<double>(n));
    return {full, se};
}

// Completed dwell times of a two-branch telegraph signal via a Schmitt
// trigger with hysteresis band +-hysteresis*mu around zero.  The first and
// last (censored) dwells are discarded.
inline std::vector<double> dwell_times(const std::vector<double>& y, double rate, double mu,
                                       double hysteresis = 0.1, std::size_t lo = 0,
                                       std::size_t hi = std::numeric_limits<std::size_t>::max()) {
    if (!(mu > 0.0) || !(rate > 0.0))
        throw std::invalid_argument("dwell_times: need mu > 0 and rate > 0");
    hi = std::min<std::size_t>(hi, y.size());
    const double band = hysteresis * mu;
    int state = 0;  // 0 unknown, +1, -1
    std::size_t flip_at = 0;
    bool have_flip = false;
    std::vector<double> dwells;
    for (std::size_t i = lo; i < hi; ++i) {
        int next = state;
        if (y[i] > band) next = 1;
        else if (y[i] < -band) next = -1;
        if (next != state && state != 0) {
            if (have_flip) dwells.push_back((i - flip_at) / rate);
            flip_at = i;
            have_flip = true;
        }
        state = next;
    }
    return dwells;
}

struct SplittingLadderInfo {
    std::vector<double> photon_numbers;
    std::vector<double> splittings;
    bool converged = false;
};

// Moment-matched branch amplitude of a state's Y marginal: for a symmetric
// pair of equal-width Gaussians at +-mu,
//   m2 = mu^2 + s^2,  m4 = mu^4 + 6 mu^2 s^2 + 3 s^4
//   => mu = ((3 m2^2 - m4) / 2)^(1/4),
// exact for that family and exactly zero for the vacuum.
inline double steady_branch_mu(const QuantumState& st, const OperatorSet& ops) {
    const Operator y2op = ops.y * ops.y;
    const double m2 = expectation(y2op, st).real();
    const double m4 = expectation(Operator(y2op * y2op), st).real();
    return std::pow(std::max(0.0, (3.0 * m2 * m2 - m4) / 2.0), 0.25);
}

// Drive-independent asymptotic splitting: for each rung of an increasing
// drive ladder, take the steady state and moment-match a symmetric
// two-Gaussian to the Y marginal (steady_branch_mu), splitting = 2 mu.
// The ladder stops when successive rungs agree within rel_tol; exceeding
// the truncation cap first raises truncation_error.
inline double asymptotic_splitting(const SystemParams& base, double rel_tol = 0.01,
                                   int n_max_cap = 170, SplittingLadderInfo* info = nullptr) {
    base.validate();
    double prev = std::numeric_limits<double>::quiet_NaN();
    double n_target = 16.0;
    for (int rung = 0; rung < 12; ++rung) {
        const int n_max = suggest_n_max(n_target);
        if (n_max > n_max_cap)
            throw truncation_error(
                "asymptotic_splitting: ladder exceeded the truncation cap before "
                "converging (n_max " +
                std::to_string(n_max) + " > " + std::to_string(n_max_cap) + ")");
        SystemParams p = base;
        p.drive = drive_from_photon_number(base, n_target);
        const Space sp = build_space(n_max);
        const QuantumState ss = steady_state(p, sp);
        const OperatorSet ops = operator_set(sp);
        const double s = 2.0 * steady_branch_mu(ss, ops);
        if (info) {
            info->photon_numbers.push_back(n_target);
            info->splittings.push_back(s);
        }
        if (std::isfinite(prev) && std::abs(s - prev) <= rel_tol * std::max(std::abs(s), 1e-9)) {
            if (info) info->converged = true;
            return s;
        }
        prev = s;
        n_target *= 1.5;
    }
    throw convergence_error("asymptotic_splitting: ladder did not converge in 12 rungs");
}

}  // namespace jctraj
