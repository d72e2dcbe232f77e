#pragma once

#include <cstdint>
#include <utility>

#include "sinomap/grid.hpp"

namespace sinomap {

/// Acquisition statistics: incident fluence per ray and electronic-noise
/// standard deviation (photons). I0 is either a uniform scalar or a full
/// per-ray field.
class ScanConfig {
public:
    ScanConfig() = default;
    ScanConfig(double i0_uniform, double sigma) : i0_uniform_(i0_uniform), sigma_(sigma) {
        validate();
    }
    ScanConfig(Grid i0_field, double sigma)
        : i0_uniform_(0.0), i0_field_(std::move(i0_field)), sigma_(sigma) {
        validate();
    }

    double sigma() const { return sigma_; }
    bool uniform() const { return i0_field_.empty(); }

    double i0(std::size_t index) const {
        return i0_field_.empty() ? i0_uniform_ : i0_field_[index];
    }

    /// Shape check against a sinogram; no-op for uniform fluence.
    void require_matches(const Grid& sino) const {
        if (!i0_field_.empty()) require_same_shape(i0_field_, sino, "ScanConfig.I0");
    }

    void validate() const {
        if (i0_field_.empty()) {
            if (!(i0_uniform_ > 0.0)) throw std::invalid_argument("ScanConfig: I0 must be > 0");
        } else {
            for (std::size_t i = 0; i < i0_field_.size(); ++i)
                if (!(i0_field_[i] > 0.0))
                    throw std::invalid_argument("ScanConfig: all I0 entries must be > 0");
        }
        if (!(sigma_ >= 0.0)) throw std::invalid_argument("ScanConfig: sigma must be >= 0");
    }

private:
    double i0_uniform_ = 1.0;
    Grid i0_field_;
    double sigma_ = 0.0;
};

/// Measured and latent photon counts for one scan. I is real-valued
/// (Gaussian electronics on top of counts); G holds non-negative integers
/// stored as doubles.
struct PhotonData {
    Grid I;
    Grid G;

    void validate() const;
};

/// Measured counts are clamped here before the logarithm so the transform
/// stays finite.
inline constexpr double kCountFloor = 1.0;

/// Noiseless attenuated photons: I0 .* exp(-y), entrywise.
Grid attenuate(const Sinogram& y, const ScanConfig& scan);

/// Draw one low-dose realization of a clean sinogram: G ~ Poisson(I0 e^-y),
/// I = G + N(0, sigma^2), x = log(I0 / max(I, floor)). The random stream is
/// counter-based per entry, keyed by seed.
std::pair<PhotonData, Sinogram> sample_low_dose(const Sinogram& y, const ScanConfig& scan,
                                                std::uint64_t seed);

/// x_j = log(I0_j / max(I_j, floor)); always finite.
Sinogram log_transform(const Grid& counts, const ScanConfig& scan);

}  // namespace sinomap
