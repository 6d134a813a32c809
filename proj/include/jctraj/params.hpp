#pragma once

#include <cmath>
#include <stdexcept>

namespace jctraj {

// Angular-frequency convention: every rate and detuning in this library is
// in rad/s.  mhz() converts a value quoted as frequency/2pi in MHz.
inline constexpr double mhz(double f) { return 2.0 * M_PI * 1e6 * f; }

// Parameters of the driven damped atom-cavity model in the frame rotating at
// the probe frequency:
//
//   H = delta_atom sp sm + delta_cavity a_dag a
//       + g (a_dag sm + sp a) + i drive (a_dag - a)
//
// with collapse operators sqrt(2 kappa) a and sqrt(2 gamma_perp) sm.  kappa
// is the cavity field (HWHM) decay rate, gamma_perp the transverse atomic
// decay rate, and delta_x = omega_x - omega_probe.  Defaults are the
// strong-coupling single-atom operating point used throughout the test
// suite: g/2pi = 16 MHz, kappa/2pi = 8 MHz, gamma_perp/2pi = 2.6 MHz,
// resonant and undriven.
struct SystemParams {
    double g = mhz(16.0);
    double kappa = mhz(8.0);
    double gamma_perp = mhz(2.6);
    double delta_atom = 0.0;
    double delta_cavity = 0.0;
    double drive = 0.0;  // E, rad/s
    double eta = 1.0;    // homodyne detection efficiency

    void validate() const {
        if (!(g >= 0.0) || !std::isfinite(g))
            throw std::invalid_argument("SystemParams: g must be finite and >= 0");
        if (!(kappa >= 0.0) || !std::isfinite(kappa))
            throw std::invalid_argument("SystemParams: kappa must be finite and >= 0");
        if (!(gamma_perp >= 0.0) || !std::isfinite(gamma_perp))
            throw std::invalid_argument("SystemParams: gamma_perp must be finite and >= 0");
        if (!std::isfinite(delta_atom) || !std::isfinite(delta_cavity))
            throw std::invalid_argument("SystemParams: detunings must be finite");
        if (!(drive >= 0.0) || !std::isfinite(drive))
            throw std::invalid_argument("SystemParams: drive must be finite and >= 0");
        if (!(eta > 0.0) || !(eta <= 1.0))
            throw std::invalid_argument("SystemParams: eta must lie in (0, 1]");
    }

    // Largest rate in the problem; used to nondimensionalize generators and
    // to choose integrator steps.
    double rate_scale() const {
        return std::max({g, kappa, gamma_perp, drive, std::abs(delta_atom),
                         std::abs(delta_cavity)});
    }
};

// Single-atom cooperativity C = g^2 / (2 kappa gamma_perp).
inline double cooperativity(const SystemParams& p) {
    if (!(p.kappa > 0.0) || !(p.gamma_perp > 0.0))
        throw std::invalid_argument("cooperativity: needs kappa > 0 and gamma_perp > 0");
    return p.g * p.g / (2.0 * p.kappa * p.gamma_perp);
}

// Drive strength E that would put N photons in an empty resonant cavity:
// |<a>|^2 = (E/kappa)^2 = N.
inline double drive_from_photon_number(const SystemParams& p, double N) {
    if (!(N >= 0.0)) throw std::invalid_argument("drive_from_photon_number: N must be >= 0");
    if (!(p.kappa > 0.0)) throw std::invalid_argument("drive_from_photon_number: kappa must be > 0");
    return p.kappa * std::sqrt(N);
}

// Truncation heuristic for a drive targeting N photons: the displaced
// thermal-ish occupation plus Poisson tail needs n_max >= N + 8 sqrt(N) + 10.
inline int suggest_n_max(double N) {
    if (!(N >= 0.0)) throw std::invalid_argument("suggest_n_max: N must be >= 0");
    return static_cast<int>(std::ceil(N + 8.0 * std::sqrt(N) + 10.0));
}

}  // namespace jctraj
