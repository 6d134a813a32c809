#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "errors.hpp"

namespace jctraj {

// Second-order IIR section, direct form II transposed, a0 normalized to 1.
struct Biquad {
    double b0 = 1.0, b1 = 0.0, b2 = 0.0;
    double a1 = 0.0, a2 = 0.0;

    std::complex<double> response(double omega) const {  // omega: rad/sample
        const std::complex<double> z1 = std::polar(1.0, -omega);
        const std::complex<double> z2 = z1 * z1;
        return (b0 + b1 * z1 + b2 * z2) / (1.0 + a1 * z1 + a2 * z2);
    }
};

// Cascade of biquads designed for one sample rate.  Filtering is causal and
// stateful per call (state starts at zero).
struct FilterChain {
    std::vector<Biquad> sections;
    double sample_rate = 0.0;  // S/s the design is valid for
    std::string description;

    bool empty() const { return sections.empty(); }

    std::complex<double> response(double omega) const {
        std::complex<double> h = 1.0;
        for (const Biquad& s : sections) h *= s.response(omega);
        return h;
    }

    std::complex<double> response_hz(double f) const {
        return response(2.0 * M_PI * f / sample_rate);
    }

    void apply_in_place(std::vector<double>& x) const {
        for (const Biquad& s : sections) {
            double s1 = 0.0, s2 = 0.0;
            for (double& v : x) {
                const double y = s.b0 * v + s1;
                s1 = s.b1 * v - s.a1 * y + s2;
                s2 = s.b2 * v - s.a2 * y;
                v = y;
            }
        }
    }

    std::vector<double> apply(std::vector<double> x) const {
        apply_in_place(x);
        return x;
    }
};

namespace detail {

// Analog Butterworth pole pairs for even order n, unit cutoff, left half
// plane: s_k = exp(i pi (2k + n + 1) / (2n)), k = 0 .. n/2 - 1 picks one of
// each conjugate pair.
inline std::vector<std::complex<double>> butterworth_pole_pairs(int order) {
    if (order < 2 || order % 2 != 0)
        throw std::invalid_argument("butterworth design: order must be even and >= 2");
    std::vector<std::complex<double>> poles;
    for (int k = 0; k < order / 2; ++k) {
        const double theta = M_PI * (2.0 * k + order + 1.0) / (2.0 * order);
        poles.push_back(std::polar(1.0, theta));
    }
    return poles;
}

inline void check_cutoff(double fc, double fs) {
    if (!(fs > 0.0)) throw std::invalid_argument("butterworth design: sample rate must be > 0");
    if (!(fc > 0.0) || !(fc < 0.5 * fs))
        throw std::invalid_argument("butterworth design: cutoff must lie in (0, fs/2)");
}

inline void check_stable(const FilterChain& c) {
    for (const Biquad& s : c.sections) {
        // roots of z^2 + a1 z + a2 inside the unit circle iff
        // |a2| < 1 and |a1| < 1 + a2
        if (!(std::abs(s.a2) < 1.0) || !(std::abs(s.a1) < 1.0 + s.a2))
            throw convergence_error("butterworth design: unstable section");
    }
}

}  // namespace detail

// Order-n Butterworth lowpass via bilinear transform with prewarped analog
// cutoff; -3 dB at fc.  Sections are normalized to unit DC gain.
inline FilterChain butterworth_lowpass(double fs, double fc, int order = 4) {
    detail::check_cutoff(fc, fs);
    const double warp = 2.0 * fs * std::tan(M_PI * fc / fs);
    FilterChain chain;
    chain.sample_rate = fs;
    for (const std::complex<double>& p0 : detail::butterworth_pole_pairs(order)) {
        const std::complex<double> s = warp * p0;
        const std::complex<double> z = (2.0 * fs + s) / (2.0 * fs - s);
        Biquad q;
        q.a1 = -2.0 * z.real();
        q.a2 = std::norm(z);
        // H(z=1) = 1; 1 + a1 + a2 = |1 - z|^2, the cancellation-free form
        const double g = std::norm(1.0 - z) / 4.0;
        q.b0 = g;
        q.b1 = 2.0 * g;
        q.b2 = g;
        chain.sections.push_back(q);
    }
    detail::check_stable(chain);
    chain.description = "butterworth lowpass";
    return chain;
}

// Order-n Butterworth highpass (analog transform s -> warp/s); -3 dB at fc,
// unit gain at Nyquist.
inline FilterChain butterworth_highpass(double fs, double fc, int order = 4) {
    detail::check_cutoff(fc, fs);
    const double warp = 2.0 * fs * std::tan(M_PI * fc / fs);
    FilterChain chain;
    chain.sample_rate = fs;
    for (const std::complex<double>& p0 : detail::butterworth_pole_pairs(order)) {
        const std::complex<double> s = warp / p0;
        const std::complex<double> z = (2.0 * fs + s) / (2.0 * fs - s);
        Biquad q;
        q.a1 = -2.0 * z.real();
        q.a2 = std::norm(z);
        // H(z=-1) = 1; 1 - a1 + a2 = |1 + z|^2, the cancellation-free form
        const double g = std::norm(1.0 + z) / 4.0;
        q.b0 = g;
        q.b1 = -2.0 * g;
        q.b2 = g;
        chain.sections.push_back(q);
    }
    detail::check_stable(chain);
    chain.description = "butterworth highpass";
    return chain;
}

// Bandpass as a highpass/lowpass cascade; band edges are the -3 dB points of
// the respective sections.
inline FilterChain butterworth_bandpass(double fs, double f_lo, double f_hi, int order = 4) {
    if (!(f_lo < f_hi))
        throw std::invalid_argument("butterworth design: band edges must satisfy f_lo < f_hi");
    FilterChain hp = butterworth_highpass(fs, f_lo, order);
    const FilterChain lp = butterworth_lowpass(fs, f_hi, order);
    hp.sections.insert(hp.sections.end(), lp.sections.begin(), lp.sections.end());
    hp.description = "butterworth bandpass";
    return hp;
}

// White-noise power gain (1/pi) \int_0^pi |H(w)|^2 dw by midpoint quadrature.
// Filtered white noise of per-sample variance v has variance v * gain.
inline double noise_power_gain(const FilterChain& chain, int n_grid = 262144) {
    double acc = 0.0;
    for (int i = 0; i < n_grid; ++i) {
        const double w = M_PI * (i + 0.5) / n_grid;
        acc += std::norm(chain.response(w));
    }
    return acc / n_grid;
}

// Group delay in seconds at frequency -> 0, from the phase slope.
inline double group_delay_dc(const FilterChain& chain) {
    if (chain.empty()) return 0.0;
    const double w1 = 1e-5, w2 = 2e-5;
    double tau = 0.0;
    for (const Biquad& s : chain.sections) {
        const double ph1 = std::arg(s.response(w1));
        const double ph2 = std::arg(s.response(w2));
        tau += -(ph2 - ph1) / (w2 - w1);
    }
    return tau / chain.sample_rate;
}

}  // namespace jctraj
