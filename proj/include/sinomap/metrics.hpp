#pragma once

#include <string>
#include <vector>

#include "sinomap/grid.hpp"

namespace sinomap {

/// PSNR is capped here for identical inputs (MSE = 0).
inline constexpr double kPsnrCap = 99.0;

/// 10 log10(peak^2 / MSE), capped at 99 dB.
double psnr(const Grid& a, const Grid& b, double peak);

/// Mean local SSIM with an 11x11 Gaussian window (std 1.5),
/// C1 = (0.01 peak)^2, C2 = (0.03 peak)^2. Both fields must be at least
/// 11x11.
double ssim(const Grid& a, const Grid& b, double peak);

/// Per-sample quality summary for one method in one domain.
struct MetricReport {
    std::string domain;  // "sinogram" or "image"
    double peak = 0.0;
    std::vector<double> psnr_values;
    std::vector<double> ssim_values;

    double mean_psnr() const;
    double mean_ssim() const;
};

}  // namespace sinomap
