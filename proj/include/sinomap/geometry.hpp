#pragma once

#include <cstdint>
#include <vector>

#include "sinomap/grid.hpp"

namespace sinomap {

/// One additive ellipse of a phantom. Coordinates live in the normalized
/// canvas [-1, 1]^2; value is the attenuation added inside the ellipse.
struct Ellipse {
    double value = 0.0;
    double axis_a = 0.0;   // semi-axis along the ellipse x direction
    double axis_b = 0.0;   // semi-axis along the ellipse y direction
    double center_x = 0.0;
    double center_y = 0.0;
    double rotation = 0.0;  // radians, counter-clockwise
};

struct PhantomSpec {
    std::vector<Ellipse> ellipses;
    std::size_t canvas_size = 128;     // square canvas, pixels
    double attenuation_scale = 1.0;    // multiplies every ellipse value
    double jitter = 0.0;               // relative perturbation amplitude; 0 = none
};

/// The classic ten-ellipse head phantom (modified contrast values).
PhantomSpec head_phantom_spec(std::size_t canvas_size, double attenuation_scale = 1.0,
                              double jitter = 0.0);

/// Parallel-beam acquisition geometry.
struct Geometry {
    std::size_t n_angles = 0;
    std::vector<double> angles;        // radians, strictly increasing in [0, pi)
    std::size_t n_detectors = 0;
    double detector_spacing = 1.0;     // in pixel units
    std::size_t image_size = 0;        // square image, pixels

    /// Uniform angles over [0, pi); detector spacing chosen so the array
    /// spans the image diagonal when spacing <= 0.
    static Geometry make_uniform(std::size_t n_angles, std::size_t n_detectors,
                                 std::size_t image_size, double detector_spacing = 0.0);

    void validate() const;
};

/// Rasterize a phantom spec; the seed drives the jitter perturbations (unused
/// when jitter == 0). Pixels are clamped at 0.
Image make_phantom(const PhantomSpec& spec, std::uint64_t seed);

/// Line integrals of img along every (angle, detector) ray, by fixed-step
/// sampling at half-pixel steps with bilinear interpolation.
Sinogram forward_project(const Image& img, const Geometry& geom);

/// Ram-Lak filtered backprojection: frequency-domain ramp on each projection
/// row (zero-padded to the next power of two), then bilinear backprojection.
Image fbp_reconstruct(const Sinogram& sino, const Geometry& geom);

}  // namespace sinomap
