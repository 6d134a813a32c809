#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace jctraj {

// SplitMix64 finalizer.  Used as a seed mixer and to derive per-trajectory
// child seeds from an ensemble master seed.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Child seed for trajectory `index` under `master`.  The rule is a pure
// function of (master, index), so ensemble results cannot depend on how
// trajectories are scheduled across workers.
constexpr std::uint64_t child_seed(std::uint64_t master, std::uint64_t index) {
    return splitmix64(master + (index + 1) * 0x9e3779b97f4a7c15ull);
}

// Deterministic uniform/normal source.  The engine is mt19937_64, but
// Gaussian variates use an explicit Box-Muller transform rather than
// std::normal_distribution, whose output sequence is not pinned by the
// standard; byte-identical reruns across toolchains require owning it.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(splitmix64(seed)) {}

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller; caches the second variate.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    std::uint64_t raw() { return eng_(); }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace jctraj
