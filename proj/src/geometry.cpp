#include "sinomap/geometry.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>

#include "sinomap/fft.hpp"
#include "sinomap/rng.hpp"

namespace sinomap {

PhantomSpec head_phantom_spec(std::size_t canvas_size, double attenuation_scale,
                              double jitter) {
    // value, a, b, x0, y0, rotation (degrees)
    static const double table[10][6] = {
        {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
        {-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
        {-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0},
        {-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0},
        {0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0},
        {0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0},
        {0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0},
        {0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0},
        {0.1, 0.0230, 0.0230, 0.0, -0.605, 0.0},
        {0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0},
    };
    PhantomSpec spec;
    spec.canvas_size = canvas_size;
    spec.attenuation_scale = attenuation_scale;
    spec.jitter = jitter;
    for (const auto& row : table) {
        Ellipse e;
        e.value = row[0];
        e.axis_a = row[1];
        e.axis_b = row[2];
        e.center_x = row[3];
        e.center_y = row[4];
        e.rotation = row[5] * M_PI / 180.0;
        spec.ellipses.push_back(e);
    }
    return spec;
}

Geometry Geometry::make_uniform(std::size_t n_angles, std::size_t n_detectors,
                                std::size_t image_size, double detector_spacing) {
    Geometry g;
    g.n_angles = n_angles;
    g.n_detectors = n_detectors;
    g.image_size = image_size;
    if (detector_spacing <= 0.0) {
        double diagonal = std::sqrt(2.0) * static_cast<double>(image_size);
        g.detector_spacing = diagonal / static_cast<double>(n_detectors > 1 ? n_detectors - 1 : 1);
    } else {
        g.detector_spacing = detector_spacing;
    }
    g.angles.resize(n_angles);
    for (std::size_t a = 0; a < n_angles; ++a)
        g.angles[a] = M_PI * static_cast<double>(a) / static_cast<double>(n_angles);
    g.validate();
    return g;
}

void Geometry::validate() const {
    if (n_angles < 1) throw std::invalid_argument("Geometry: n_angles must be >= 1");
    if (angles.size() != n_angles)
        throw std::invalid_argument("Geometry: angle list length mismatch");
    for (std::size_t a = 0; a < n_angles; ++a) {
        if (angles[a] < 0.0 || angles[a] >= M_PI)
            throw std::invalid_argument("Geometry: angles must lie in [0, pi)");
        if (a > 0 && angles[a] <= angles[a - 1])
            throw std::invalid_argument("Geometry: angles must be strictly increasing");
    }
    if (n_detectors < 1) throw std::invalid_argument("Geometry: n_detectors must be >= 1");
    if (detector_spacing <= 0.0)
        throw std::invalid_argument("Geometry: detector_spacing must be > 0");
    if (image_size < 1) throw std::invalid_argument("Geometry: image_size must be >= 1");
    double span = detector_spacing * static_cast<double>(n_detectors - 1);
    double diagonal = std::sqrt(2.0) * static_cast<double>(image_size - 1);
    if (span + 1e-9 < diagonal)
        throw std::invalid_argument("Geometry: detector array must span the image diagonal");
}

namespace {

struct PlacedEllipse {
    double value, axis_a, axis_b, center_x, center_y, cos_rot, sin_rot;
};

PlacedEllipse place(const Ellipse& e, double scale) {
    PlacedEllipse p;
    p.value = e.value * scale;
    p.axis_a = e.axis_a;
    p.axis_b = e.axis_b;
    p.center_x = e.center_x;
    p.center_y = e.center_y;
    p.cos_rot = std::cos(e.rotation);
    p.sin_rot = std::sin(e.rotation);
    return p;
}

bool fits_canvas(const Ellipse& e) {
    double c = std::cos(e.rotation), s = std::sin(e.rotation);
    double hw = std::sqrt(e.axis_a * e.axis_a * c * c + e.axis_b * e.axis_b * s * s);
    double hh = std::sqrt(e.axis_a * e.axis_a * s * s + e.axis_b * e.axis_b * c * c);
    return std::fabs(e.center_x) + hw <= 1.0 + 1e-12 && std::fabs(e.center_y) + hh <= 1.0 + 1e-12;
}

void check_inside_canvas(const Ellipse& e) {
    if (!fits_canvas(e))
        throw std::invalid_argument("make_phantom: ellipse extends outside the canvas");
    if (e.axis_a <= 0.0 || e.axis_b <= 0.0)
        throw std::invalid_argument("make_phantom: ellipse axes must be positive");
}

}  // namespace

Image make_phantom(const PhantomSpec& spec, std::uint64_t seed) {
    const std::size_t n = spec.canvas_size;
    if (n < 1) throw std::invalid_argument("make_phantom: canvas_size must be >= 1");

    std::vector<Ellipse> ellipses = spec.ellipses;
    for (const auto& e : ellipses) check_inside_canvas(e);
    if (spec.jitter > 0.0) {
        SeqRng rng(derive_seed(seed, 0x706861 /*"pha"*/));
        for (auto& e : ellipses) {
            const double j = spec.jitter;
            // redraw when the perturbation lands outside the canvas so every
            // seed yields a valid phantom; the walk stays deterministic
            for (int attempt = 0;; ++attempt) {
                Ellipse t = e;
                t.center_x += rng.uniform(-j, j) * 0.5 * t.axis_a;
                t.center_y += rng.uniform(-j, j) * 0.5 * t.axis_b;
                t.axis_a *= 1.0 + rng.uniform(-j, j);
                t.axis_b *= 1.0 + rng.uniform(-j, j);
                t.rotation += rng.uniform(-j, j);
                t.value *= 1.0 + 0.5 * rng.uniform(-j, j);
                if (fits_canvas(t)) {
                    e = t;
                    break;
                }
                if (attempt >= 100)
                    throw std::invalid_argument(
                        "make_phantom: jitter too large for the canvas margin");
            }
        }
    }

    std::vector<PlacedEllipse> placed;
    placed.reserve(ellipses.size());
    for (const auto& e : ellipses) {
        check_inside_canvas(e);
        placed.push_back(place(e, spec.attenuation_scale));
    }

    // 4x4 subsamples per pixel give area-weighted edges
    const int ss = 4;
    Image img(n, n, 0.0);
    const double pixel = 2.0 / static_cast<double>(n);
    const double sub = pixel / static_cast<double>(ss);
    for (std::size_t r = 0; r < n; ++r) {
        // canvas y grows upward, rows grow downward
        double y0 = static_cast<double>(n - 1 - r) * pixel - 1.0;
        for (std::size_t c = 0; c < n; ++c) {
            double x0 = static_cast<double>(c) * pixel - 1.0;
            double acc = 0.0;
            for (int sy = 0; sy < ss; ++sy)
                for (int sx = 0; sx < ss; ++sx) {
                    double x = x0 + (static_cast<double>(sx) + 0.5) * sub;
                    double y = y0 + (static_cast<double>(sy) + 0.5) * sub;
                    double v = 0.0;
                    for (const auto& e : placed) {
                        double dx = x - e.center_x;
                        double dy = y - e.center_y;
                        double u = dx * e.cos_rot + dy * e.sin_rot;
                        double w = -dx * e.sin_rot + dy * e.cos_rot;
                        double q = (u * u) / (e.axis_a * e.axis_a) +
                                   (w * w) / (e.axis_b * e.axis_b);
                        if (q <= 1.0) v += e.value;
                    }
                    acc += v > 0.0 ? v : 0.0;
                }
            img(r, c) = acc / static_cast<double>(ss * ss);
        }
    }
    return img;
}

namespace {

inline double bilinear(const Image& img, double x, double y) {
    // x, y in continuous pixel coordinates; zero outside the image
    const double w = static_cast<double>(img.cols());
    const double h = static_cast<double>(img.rows());
    if (x < 0.0 || y < 0.0 || x > w - 1.0 || y > h - 1.0) return 0.0;
    std::size_t x0 = static_cast<std::size_t>(x);
    std::size_t y0 = static_cast<std::size_t>(y);
    if (x0 >= img.cols() - 1) x0 = img.cols() >= 2 ? img.cols() - 2 : 0;
    if (y0 >= img.rows() - 1) y0 = img.rows() >= 2 ? img.rows() - 2 : 0;
    double fx = x - static_cast<double>(x0);
    double fy = y - static_cast<double>(y0);
    std::size_t x1 = img.cols() >= 2 ? x0 + 1 : x0;
    std::size_t y1 = img.rows() >= 2 ? y0 + 1 : y0;
    return (1.0 - fy) * ((1.0 - fx) * img(y0, x0) + fx * img(y0, x1)) +
           fy * ((1.0 - fx) * img(y1, x0) + fx * img(y1, x1));
}

}  // namespace

Sinogram forward_project(const Image& img, const Geometry& geom) {
    geom.validate();
    if (img.rows() != geom.image_size || img.cols() != geom.image_size)
        throw std::invalid_argument("forward_project: image does not match geometry");

    const std::size_t na = geom.n_angles;
    const std::size_t nd = geom.n_detectors;
    const double half = (static_cast<double>(geom.image_size) - 1.0) / 2.0;
    const double half_diag = std::sqrt(2.0) * static_cast<double>(geom.image_size) / 2.0;
    const double step = 0.5;  // half-pixel sampling
    // midpoint grid symmetric about t = 0, so a ray and its reverse sample
    // the same points
    const long n_half = static_cast<long>(std::ceil(half_diag / step)) + 1;

    Sinogram sino(na, nd, 0.0);
#pragma omp parallel for schedule(static)
    for (long a = 0; a < static_cast<long>(na); ++a) {
        const double cs = std::cos(geom.angles[static_cast<std::size_t>(a)]);
        const double sn = std::sin(geom.angles[static_cast<std::size_t>(a)]);
        for (std::size_t d = 0; d < nd; ++d) {
            const double s =
                (static_cast<double>(d) - (static_cast<double>(nd) - 1.0) / 2.0) *
                geom.detector_spacing;
            double sum = 0.0;
            for (long i = 0; i < n_half; ++i) {
                double t = (static_cast<double>(i) + 0.5) * step;
                sum += bilinear(img, s * cs - t * sn + half, s * sn + t * cs + half);
                sum += bilinear(img, s * cs + t * sn + half, s * sn - t * cs + half);
            }
            sino(static_cast<std::size_t>(a), d) = sum * step;
        }
    }
    return sino;
}

Image fbp_reconstruct(const Sinogram& sino, const Geometry& geom) {
    geom.validate();
    if (geom.n_angles < 2)
        throw std::invalid_argument("fbp_reconstruct: need at least 2 angles");
    if (geom.n_detectors < 2)
        throw std::invalid_argument("fbp_reconstruct: need at least 2 detectors");
    if (sino.rows() != geom.n_angles || sino.cols() != geom.n_detectors)
        throw std::invalid_argument("fbp_reconstruct: sinogram does not match geometry");

    const std::size_t na = geom.n_angles;
    const std::size_t nd = geom.n_detectors;
    const std::size_t padded = next_pow2(2 * nd);
    const double ds = geom.detector_spacing;

    // Ram-Lak ramp as the transform of the discrete impulse response
    // (Kak & Slaney): h(0) = 1/(4 ds^2), h(odd n) = -1/(pi n ds)^2, else 0.
    // Avoids the low-frequency bias of sampling |f| directly.
    std::vector<std::complex<double>> kernel(padded, 0.0);
    kernel[0] = 1.0 / (4.0 * ds * ds);
    for (std::size_t m = 1; m < padded / 2; m += 2) {
        double v = -1.0 / (M_PI * M_PI * static_cast<double>(m * m) * ds * ds);
        kernel[m] = v;
        kernel[padded - m] = v;
    }
    fft(kernel);
    std::vector<double> ramp(padded);
    for (std::size_t k = 0; k < padded; ++k) ramp[k] = kernel[k].real() * ds;

    Grid filtered(na, nd, 0.0);
#pragma omp parallel for schedule(static)
    for (long a = 0; a < static_cast<long>(na); ++a) {
        std::vector<std::complex<double>> buf(padded, 0.0);
        for (std::size_t d = 0; d < nd; ++d)
            buf[d] = sino(static_cast<std::size_t>(a), d);
        fft(buf);
        for (std::size_t k = 0; k < padded; ++k) buf[k] *= ramp[k];
        ifft(buf);
        for (std::size_t d = 0; d < nd; ++d)
            filtered(static_cast<std::size_t>(a), d) = buf[d].real();
    }

    const std::size_t n = geom.image_size;
    const double half = (static_cast<double>(n) - 1.0) / 2.0;
    const double det_center = (static_cast<double>(nd) - 1.0) / 2.0;
    const double weight = M_PI / static_cast<double>(na);

    std::vector<double> cs_tab(na), sn_tab(na);
    for (std::size_t a = 0; a < na; ++a) {
        cs_tab[a] = std::cos(geom.angles[a]);
        sn_tab[a] = std::sin(geom.angles[a]);
    }

    Image img(n, n, 0.0);
#pragma omp parallel for schedule(static)
    for (long r = 0; r < static_cast<long>(n); ++r) {
        const double y = static_cast<double>(r) - half;
        for (std::size_t c = 0; c < n; ++c) {
            const double x = static_cast<double>(c) - half;
            double acc = 0.0;
            for (std::size_t a = 0; a < na; ++a) {
                double s = x * cs_tab[a] + y * sn_tab[a];
                double u = s / ds + det_center;
                if (u < 0.0 || u > static_cast<double>(nd) - 1.0) continue;
                std::size_t u0 = static_cast<std::size_t>(u);
                if (u0 >= nd - 1) u0 = nd - 2;
                double fu = u - static_cast<double>(u0);
                acc += (1.0 - fu) * filtered(a, u0) + fu * filtered(a, u0 + 1);
            }
            img(static_cast<std::size_t>(r), c) = acc * weight;
        }
    }
    return img;
}

}  // namespace sinomap
