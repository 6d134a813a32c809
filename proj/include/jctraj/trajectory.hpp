#pragma once

#include <cmath>
#include <condition_variable>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <thread>
#include <vector>

#include "model.hpp"
#include "params.hpp"
#include "rng.hpp"
#include "space.hpp"

namespace jctraj {

// Configuration of a single stochastic run.  Time is discretized on two
// levels: records are kept every 1 / (sample_rate * oversample) seconds, and
// each kept interval is integrated in substeps chosen so that
// dt <= 1 / (steps_per_rate * rate_max), with rate_max the fastest rate in
// the truncated problem (including g sqrt(n_max)).
struct SimConfig {
    double t_end = 10e-6;
    double sample_rate = 2.5e7;  // delivered photocurrent rate, S/s
    int oversample = 4;          // record rate = sample_rate * oversample
    int n_max = -1;              // -1: suggest_n_max((drive/kappa)^2)
    int steps_per_rate = 50;     // >= 20 enforced
    double truncation_threshold = 1e-6;
    std::uint64_t seed = 1;
    double dark_lifetime = std::numeric_limits<double>::infinity();
    Ket initial;  // empty: vacuum cavity, atom ground

    double kept_dt() const { return 1.0 / (sample_rate * oversample); }

    void validate() const {
        if (!(t_end > 0.0)) throw std::invalid_argument("SimConfig: t_end must be > 0");
        if (!(sample_rate > 0.0))
            throw std::invalid_argument("SimConfig: sample_rate must be > 0");
        if (oversample < 1) throw std::invalid_argument("SimConfig: oversample must be >= 1");
        if (steps_per_rate < 20)
            throw std::invalid_argument(
                "SimConfig: steps_per_rate must be >= 20 (dt <= 1/(20 rate_max))");
        if (!(truncation_threshold > 0.0))
            throw std::invalid_argument("SimConfig: truncation_threshold must be > 0");
        if (!(dark_lifetime > 0.0))
            throw std::invalid_argument("SimConfig: dark_lifetime must be > 0");
    }
};

// One homodyne trajectory sampled on the kept grid t_k = k * kept_dt.
// y_cond/x_cond/n_cond are conditional expectations at t_k; dW[k] is the
// Wiener increment of the *measured* record accumulated over
// [t_k, t_k + kept_dt).  The ideal photocurrent sample is
//   y[k] = y_cond[k] + dW[k] / (kept_dt * sqrt(8 eta kappa)).
struct TrajectoryRecord {
    SystemParams params;
    double kept_dt = 0.0;
    double t_end = 0.0;
    std::uint64_t seed = 0;       // child seed actually used
    std::uint64_t index = 0;      // position in the ensemble
    int n_max = 0;
    std::vector<double> y_cond, x_cond, n_cond, dW;
    std::vector<double> jump_times;
    double dark_time = std::numeric_limits<double>::infinity();
    double settle_time = 0.0;          // suggested transient guard, 10/kappa
    double max_top_population = 0.0;   // running max of the top-two Fock weights
    double time(std::size_t k) const { return static_cast<double>(k) * kept_dt; }
    std::size_t size() const { return y_cond.size(); }
};

// True when the trajectory never pushed significant weight against the
// truncation boundary.
inline bool truncation_ok(const TrajectoryRecord& rec, double threshold = 1e-6) {
    return rec.max_top_population <= threshold;
}

namespace detail {

// Pentadiagonal complex matrix in row-band storage: row i couples to
// i-2 .. i+2.  All composite-space operators used by the integrator have
// this shape because the atom index varies fastest.
struct Banded {
    int dim = 0;
    std::vector<Complex> d0, u1, u2, l1, l2;  // u*[i] = A(i, i+k), l*[i] = A(i, i-k)

    static Banded from_dense(const Operator& a) {
        Banded b;
        b.dim = static_cast<int>(a.rows());
        b.d0.resize(b.dim);
        b.u1.assign(b.dim, 0.0);
        b.u2.assign(b.dim, 0.0);
        b.l1.assign(b.dim, 0.0);
        b.l2.assign(b.dim, 0.0);
        for (int i = 0; i < b.dim; ++i) {
            b.d0[i] = a(i, i);
            if (i + 1 < b.dim) b.u1[i] = a(i, i + 1);
            if (i + 2 < b.dim) b.u2[i] = a(i, i + 2);
            if (i - 1 >= 0) b.l1[i] = a(i, i - 1);
            if (i - 2 >= 0) b.l2[i] = a(i, i - 2);
        }
        for (int i = 0; i < b.dim; ++i)
            for (int j = 0; j < b.dim; ++j)
                if (std::abs(j - i) > 2 && a(i, j) != Complex(0.0, 0.0))
                    throw std::invalid_argument("Banded: matrix is not pentadiagonal");
        return b;
    }

    void multiply(const Complex* x, Complex* out) const {
        for (int i = 0; i < dim; ++i) {
            Complex acc = d0[i] * x[i];
            if (i + 1 < dim) acc += u1[i] * x[i + 1];
            if (i + 2 < dim) acc += u2[i] * x[i + 2];
            if (i - 1 >= 0) acc += l1[i] * x[i - 1];
            if (i - 2 >= 0) acc += l2[i] * x[i - 2];
            out[i] = acc;
        }
    }
};

}  // namespace detail

// Hybrid stochastic unraveling of the master equation: the cavity decay
// channel sqrt(2 kappa) a is monitored by homodyne detection of the Y
// quadrature (measurement operator -i sqrt(2 kappa) a, efficiency eta), the
// atomic channel sqrt(2 gamma_perp) sm by photon counting.  Per substep dt:
//
//   dq  = 2 sqrt(2 kappa eta) <Y> dt + dW
//   psi <- psi + dt (-iH - kappa a^dag a - gamma_perp sp sm) psi
//              - i sqrt(2 kappa eta) (a psi) dq
//              - i sqrt(2 kappa (1-eta)) (a psi) dW0        [eta < 1 only]
//   jump with probability 2 gamma_perp <sp sm> dt: psi <- sm psi
//   renormalize
//
// which agrees with the nonlinear diffusive/jump stochastic master equation
// to O(dt) and averages to the Lindblad evolution.  Random-number order per
// trajectory is fixed (dark-time first, then per substep: dW, dW0 when
// eta < 1, jump uniform), so records are reproducible from (seed, index)
// alone.  Model changes at the recorded dark time: the coupling g is set to
// zero and the run continues, leaving the empty-cavity branch in the record.
inline TrajectoryRecord simulate_trajectory(const SystemParams& p, const SimConfig& cfg,
                                            std::uint64_t index = 0) {
    p.validate();
    cfg.validate();
    if (!(p.kappa > 0.0))
        throw std::invalid_argument("simulate_trajectory: homodyne channel needs kappa > 0");

    const double target_n = std::pow(p.drive / p.kappa, 2.0);
    const int n_max = cfg.n_max > 0 ? cfg.n_max : suggest_n_max(target_n);
    const Space sp = build_space(n_max);
    const int dim = sp.dim();
    const OperatorSet ops = operator_set(sp);

    // Effective drift matrix -iH - kappa a^dag a - gamma_perp sp sm, banded.
    const auto make_drift = [&](const SystemParams& q) {
        Operator m = Complex(0.0, -1.0) * hamiltonian(q, sp);
        m -= p.kappa * ops.n_photon;
        m -= p.gamma_perp * (ops.sp * ops.sm);
        return detail::Banded::from_dense(m);
    };
    const detail::Banded drift = make_drift(p);
    detail::Banded drift_dark;  // built lazily only if a dark transition can occur
    const detail::Banded a_band = detail::Banded::from_dense(ops.a);

    const double rate_max =
        std::max({p.kappa, p.gamma_perp, p.drive, std::abs(p.delta_atom),
                  std::abs(p.delta_cavity), p.g * std::sqrt(double(n_max))});
    const double kept_dt = cfg.kept_dt();
    const int k_sub = std::max(1, static_cast<int>(std::ceil(kept_dt * cfg.steps_per_rate * rate_max)));
    const double dt = kept_dt / k_sub;
    if (!(dt <= 1.0 / (20.0 * rate_max)))
        throw std::invalid_argument("simulate_trajectory: dt exceeds 1/(20 rate_max)");

    const std::size_t n_kept = static_cast<std::size_t>(std::llround(cfg.t_end / kept_dt));
    if (n_kept < 2) throw std::invalid_argument("simulate_trajectory: t_end shorter than two samples");

    TrajectoryRecord rec;
    rec.params = p;
    rec.kept_dt = kept_dt;
    rec.t_end = static_cast<double>(n_kept) * kept_dt;
    rec.seed = child_seed(cfg.seed, index);
    rec.index = index;
    rec.n_max = n_max;
    rec.settle_time = 10.0 / p.kappa;
    rec.y_cond.resize(n_kept);
    rec.x_cond.resize(n_kept);
    rec.n_cond.resize(n_kept);
    rec.dW.resize(n_kept);

    Rng rng(rec.seed);
    double t_dark = std::numeric_limits<double>::infinity();
    if (std::isfinite(cfg.dark_lifetime)) {
        t_dark = -cfg.dark_lifetime * std::log(1.0 - rng.uniform());
        drift_dark = make_drift([&] {
            SystemParams q = p;
            q.g = 0.0;
            return q;
        }());
    }

    std::vector<Complex> psi(dim, 0.0), apsi(dim), hpsi(dim);
    if (cfg.initial.size() > 0) {
        if (static_cast<int>(cfg.initial.size()) != dim)
            throw std::invalid_argument("simulate_trajectory: initial state dimension mismatch");
        for (int i = 0; i < dim; ++i) psi[i] = cfg.initial(i);
        double nrm = 0.0;
        for (const Complex& c : psi) nrm += std::norm(c);
        if (!(nrm > 0.0)) throw std::invalid_argument("simulate_trajectory: zero initial state");
        const double inv = 1.0 / std::sqrt(nrm);
        for (Complex& c : psi) c *= inv;
    } else {
        psi[sp.index(0, 0)] = 1.0;
    }

    const double sq_eta = std::sqrt(2.0 * p.kappa * p.eta);
    const double sq_rest = p.eta < 1.0 ? std::sqrt(2.0 * p.kappa * (1.0 - p.eta)) : 0.0;
    const double sqrt_dt = std::sqrt(dt);
    const bool leak = p.eta < 1.0;
    const detail::Banded* active_drift = &drift;
    bool dark = false;

    double t = 0.0;
    for (std::size_t k = 0; k < n_kept; ++k) {
        // Conditional expectations at the kept instant, all from a psi:
        // <a> = psi . (a psi), <n> = |a psi|^2.
        a_band.multiply(psi.data(), apsi.data());
        Complex a_exp = 0.0;
        double n_exp = 0.0;
        for (int i = 0; i < dim; ++i) {
            a_exp += std::conj(psi[i]) * apsi[i];
            n_exp += std::norm(apsi[i]);
        }
        rec.y_cond[k] = a_exp.imag();
        rec.x_cond[k] = a_exp.real();
        rec.n_cond[k] = n_exp;

        double w_acc = 0.0;
        for (int s = 0; s < k_sub; ++s) {
            if (!dark && t >= t_dark) {
                dark = true;
                active_drift = &drift_dark;
                rec.dark_time = t_dark;
            }
            if (s > 0) a_band.multiply(psi.data(), apsi.data());

            Complex a_now = 0.0;
            double pe = 0.0;  // <sp sm> = excited-state weight
            for (int i = 1; i < dim; i += 2) pe += std::norm(psi[i]);
            for (int i = 0; i < dim; ++i) a_now += std::conj(psi[i]) * apsi[i];

            const double dWs = rng.normal() * sqrt_dt;
            w_acc += dWs;
            const double dq = 2.0 * sq_eta * a_now.imag() * dt + dWs;
            const Complex gain(0.0, -sq_eta);
            const Complex gain0(0.0, -sq_rest);
            const double dW0 = leak ? rng.normal() * sqrt_dt : 0.0;

            active_drift->multiply(psi.data(), hpsi.data());
            for (int i = 0; i < dim; ++i)
                psi[i] += dt * hpsi[i] + gain * apsi[i] * dq + (leak ? gain0 * apsi[i] * dW0 : Complex(0.0, 0.0));

            const double u = rng.uniform();
            if (u < 2.0 * p.gamma_perp * pe * dt) {
                // collapse: psi <- sm psi (shift excited amplitudes to ground)
                for (int i = 0; i + 1 < dim; i += 2) {
                    psi[i] = psi[i + 1];
                    psi[i + 1] = 0.0;
                }
                rec.jump_times.push_back(t + dt);
            }

            double nrm = 0.0;
            for (const Complex& c : psi) nrm += std::norm(c);
            if (!(nrm > 1e-300))
                throw numerical_degeneracy("simulate_trajectory: state norm vanished");
            const double inv = 1.0 / std::sqrt(nrm);
            for (Complex& c : psi) c *= inv;

            t += dt;
        }
        rec.dW[k] = w_acc;

        const double top = std::norm(psi[dim - 1]) + std::norm(psi[dim - 2]) +
                           std::norm(psi[dim - 3]) + std::norm(psi[dim - 4]);
        rec.max_top_population = std::max(rec.max_top_population, top);
        if (top > 0.5)
            throw truncation_error(
                "simulate_trajectory: truncation overflow, top Fock levels hold " +
                std::to_string(top));
    }
    return rec;
}

// Fixed-assignment parallel ensemble: trajectory i runs with child seed
// (seed, i) on worker i mod n_workers, so the result is byte-identical for
// any worker count.
inline std::vector<TrajectoryRecord> ensemble_run(const SystemParams& p, const SimConfig& cfg,
                                                  int n_traj, int n_workers = 0) {
    if (n_traj < 1) throw std::invalid_argument("ensemble_run: n_traj must be >= 1");
    if (n_workers < 0) throw std::invalid_argument("ensemble_run: n_workers must be >= 0");
    if (n_workers == 0) {
        const unsigned hw = std::thread::hardware_concurrency();
        n_workers = hw > 0 ? static_cast<int>(hw) : 1;
    }
    n_workers = std::min(n_workers, n_traj);

    std::vector<TrajectoryRecord> out(n_traj);
    std::vector<std::exception_ptr> errors(n_workers, nullptr);

    const auto work = [&](int w) {
        try {
            for (int i = w; i < n_traj; i += n_workers)
                out[i] = simulate_trajectory(p, cfg, static_cast<std::uint64_t>(i));
        } catch (...) {
            errors[w] = std::current_exception();
        }
    };
    if (n_workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_workers);
        for (int w = 0; w < n_workers; ++w) pool.emplace_back(work, w);
        for (auto& th : pool) th.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

// Streaming ensemble: `consume(TrajectoryRecord)` is called exactly once per
// record, in index order, from the calling thread.  At most `window` records
// (default 2 * n_workers) are alive at once, so long ensembles run in bounded
// memory.  Because record i depends only on child_seed(cfg.seed, i), the
// stream of records handed to the consumer is identical for every worker
// count.
template <typename Consumer>
void ensemble_stream(const SystemParams& p, const SimConfig& cfg, int n_traj, Consumer&& consume,
                     int n_workers = 0, int window = 0) {
    if (n_traj < 1) throw std::invalid_argument("ensemble_stream: n_traj must be >= 1");
    if (n_workers < 0) throw std::invalid_argument("ensemble_stream: n_workers must be >= 0");
    if (n_workers == 0) {
        const unsigned hw = std::thread::hardware_concurrency();
        n_workers = hw > 0 ? static_cast<int>(hw) : 1;
    }
    n_workers = std::min(n_workers, n_traj);
    if (window <= 0) window = 2 * n_workers;

    if (n_workers == 1) {
        for (int i = 0; i < n_traj; ++i)
            consume(simulate_trajectory(p, cfg, static_cast<std::uint64_t>(i)));
        return;
    }

    std::mutex mu;
    std::condition_variable cv_space, cv_ready;
    std::map<int, TrajectoryRecord> ready;
    int next_consume = 0;
    bool failed = false;
    std::exception_ptr first_error = nullptr;

    const auto work = [&](int w) {
        try {
            for (int i = w; i < n_traj; i += n_workers) {
                {
                    std::unique_lock<std::mutex> lk(mu);
                    cv_space.wait(lk, [&] { return failed || i < next_consume + window; });
                    if (failed) return;
                }
                TrajectoryRecord rec = simulate_trajectory(p, cfg, static_cast<std::uint64_t>(i));
                {
                    std::lock_guard<std::mutex> lk(mu);
                    if (failed) return;
                    ready.emplace(i, std::move(rec));
                }
                cv_ready.notify_all();
            }
        } catch (...) {
            {
                std::lock_guard<std::mutex> lk(mu);
                if (!first_error) first_error = std::current_exception();
                failed = true;
            }
            cv_ready.notify_all();
            cv_space.notify_all();
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(work, w);

    while (true) {
        TrajectoryRecord rec;
        {
            std::unique_lock<std::mutex> lk(mu);
            cv_ready.wait(lk, [&] { return failed || ready.count(next_consume) > 0; });
            if (failed) break;
            auto it = ready.find(next_consume);
            rec = std::move(it->second);
            ready.erase(it);
        }
        try {
            consume(std::move(rec));
        } catch (...) {
            std::lock_guard<std::mutex> lk(mu);
            if (!first_error) first_error = std::current_exception();
            failed = true;
        }
        {
            std::lock_guard<std::mutex> lk(mu);
            if (!failed) ++next_consume;
            if (!failed && next_consume >= n_traj) break;
        }
        cv_space.notify_all();
        if (failed) break;
    }
    cv_space.notify_all();
    cv_ready.notify_all();
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace jctraj
