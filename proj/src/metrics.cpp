#include "sinomap/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace sinomap {

double psnr(const Grid& a, const Grid& b, double peak) {
    require_same_shape(a, b, "psnr");
    if (!(peak > 0.0)) throw std::invalid_argument("psnr: peak must be > 0");
    if (a.size() == 0) throw std::invalid_argument("psnr: empty fields");

    double mse = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.size());
    if (mse == 0.0) return kPsnrCap;
    double value = 10.0 * std::log10(peak * peak / mse);
    return std::min(value, kPsnrCap);
}

namespace {

constexpr int kWindow = 11;
constexpr double kWindowStd = 1.5;

const double* gaussian_window() {
    static const auto table = [] {
        static double w[kWindow * kWindow];
        double sum = 0.0;
        for (int y = 0; y < kWindow; ++y)
            for (int x = 0; x < kWindow; ++x) {
                double dy = y - (kWindow - 1) / 2.0;
                double dx = x - (kWindow - 1) / 2.0;
                w[y * kWindow + x] =
                    std::exp(-(dx * dx + dy * dy) / (2.0 * kWindowStd * kWindowStd));
                sum += w[y * kWindow + x];
            }
        for (double& v : w) v /= sum;
        return w;
    }();
    return table;
}

}  // namespace

double ssim(const Grid& a, const Grid& b, double peak) {
    require_same_shape(a, b, "ssim");
    if (!(peak > 0.0)) throw std::invalid_argument("ssim: peak must be > 0");
    if (a.rows() < kWindow || a.cols() < kWindow)
        throw std::invalid_argument("ssim: fields smaller than the 11x11 window");

    const double c1 = (0.01 * peak) * (0.01 * peak);
    const double c2 = (0.03 * peak) * (0.03 * peak);
    const double* w = gaussian_window();

    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t y0 = 0; y0 + kWindow <= a.rows(); ++y0) {
        for (std::size_t x0 = 0; x0 + kWindow <= a.cols(); ++x0) {
            double mu_a = 0.0, mu_b = 0.0;
            for (int y = 0; y < kWindow; ++y) {
                const double* ra = a.row(y0 + static_cast<std::size_t>(y)) + x0;
                const double* rb = b.row(y0 + static_cast<std::size_t>(y)) + x0;
                const double* wr = w + y * kWindow;
                for (int x = 0; x < kWindow; ++x) {
                    mu_a += wr[x] * ra[x];
                    mu_b += wr[x] * rb[x];
                }
            }
            double var_a = 0.0, var_b = 0.0, cov = 0.0;
            for (int y = 0; y < kWindow; ++y) {
                const double* ra = a.row(y0 + static_cast<std::size_t>(y)) + x0;
                const double* rb = b.row(y0 + static_cast<std::size_t>(y)) + x0;
                const double* wr = w + y * kWindow;
                for (int x = 0; x < kWindow; ++x) {
                    double da = ra[x] - mu_a;
                    double db = rb[x] - mu_b;
                    var_a += wr[x] * da * da;
                    var_b += wr[x] * db * db;
                    cov += wr[x] * da * db;
                }
            }
            double num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
            double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
            total += num / den;
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

double MetricReport::mean_psnr() const {
    double s = 0.0;
    for (double v : psnr_values) s += v;
    return psnr_values.empty() ? 0.0 : s / static_cast<double>(psnr_values.size());
}

double MetricReport::mean_ssim() const {
    double s = 0.0;
    for (double v : ssim_values) s += v;
    return ssim_values.empty() ? 0.0 : s / static_cast<double>(ssim_values.size());
}

}  // namespace sinomap
