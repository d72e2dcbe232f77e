#include "sinomap/noise_sim.hpp"

#include <cmath>
#include <stdexcept>

#include "sinomap/rng.hpp"

namespace sinomap {

void PhotonData::validate() const {
    require_same_shape(I, G, "PhotonData");
    for (std::size_t i = 0; i < G.size(); ++i) {
        double g = G[i];
        if (!(g >= 0.0) || g != std::floor(g))
            throw std::invalid_argument("PhotonData: G entries must be integers >= 0");
        if (!std::isfinite(I[i]))
            throw std::invalid_argument("PhotonData: I entries must be finite");
    }
}

Grid attenuate(const Sinogram& y, const ScanConfig& scan) {
    require_finite(y, "attenuate");
    scan.require_matches(y);
    Grid out(y.rows(), y.cols());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = scan.i0(i) * std::exp(-y[i]);
    return out;
}

std::pair<PhotonData, Sinogram> sample_low_dose(const Sinogram& y, const ScanConfig& scan,
                                                std::uint64_t seed) {
    Grid mean = attenuate(y, scan);
    const double sigma = scan.sigma();

    PhotonData pd;
    pd.G = Grid(y.rows(), y.cols());
    pd.I = Grid(y.rows(), y.cols());

#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(y.size()); ++i) {
        auto idx = static_cast<std::size_t>(i);
        EntryRng rng(seed, idx);
        double g = static_cast<double>(rng.poisson(mean[idx]));
        pd.G[idx] = g;
        pd.I[idx] = sigma > 0.0 ? g + sigma * rng.normal() : g;
    }

    return {pd, log_transform(pd.I, scan)};
}

Sinogram log_transform(const Grid& counts, const ScanConfig& scan) {
    scan.require_matches(counts);
    Sinogram x(counts.rows(), counts.cols());
    for (std::size_t i = 0; i < counts.size(); ++i)
        x[i] = std::log(scan.i0(i) / std::max(counts[i], kCountFloor));
    return x;
}

}  // namespace sinomap
