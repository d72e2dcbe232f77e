#include "sinomap/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace sinomap {

double EntryRng::normal() {
    double u1 = uniform_pos();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

namespace {

// Sequential inversion; fine for small means.
std::uint64_t poisson_inversion(EntryRng& rng, double mean) {
    const double threshold = rng.uniform();
    double p = std::exp(-mean);
    double cdf = p;
    std::uint64_t k = 0;
    while (cdf < threshold && k < 4096) {
        ++k;
        p *= mean / static_cast<double>(k);
        cdf += p;
    }
    return k;
}

// Hormann's PTRS transformed-rejection sampler, exact for mean >= 10.
std::uint64_t poisson_ptrs(EntryRng& rng, double mean) {
    const double b = 0.931 + 2.53 * std::sqrt(mean);
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    const double log_mean = std::log(mean);

    for (;;) {
        double u = rng.uniform() - 0.5;
        double v = rng.uniform();
        double us = 0.5 - std::fabs(u);
        double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
        if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(kf);
        if (kf < 0.0 || (us < 0.013 && v > us)) continue;
        if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
            kf * log_mean - mean - std::lgamma(kf + 1.0))
            return static_cast<std::uint64_t>(kf);
    }
}

}  // namespace

std::uint64_t EntryRng::poisson(double mean) {
    if (!(mean >= 0.0) || !std::isfinite(mean))
        throw std::invalid_argument("poisson: mean must be finite and >= 0");
    if (mean == 0.0) return 0;
    if (mean < 10.0) return poisson_inversion(*this, mean);
    return poisson_ptrs(*this, mean);
}

}  // namespace sinomap
