#include "sinomap/map_model.hpp"

#include <cmath>
#include <stdexcept>

namespace sinomap {

Grid second_diff(const Grid& f, Axis axis) {
    const std::size_t len = axis == Axis::Detector ? f.cols() : f.rows();
    if (len < 3) throw std::invalid_argument("second_diff: axis length must be >= 3");

    Grid out(f.rows(), f.cols(), 0.0);
    if (axis == Axis::Detector) {
        for (std::size_t r = 0; r < f.rows(); ++r)
            for (std::size_t c = 1; c + 1 < f.cols(); ++c)
                out(r, c) = f(r, c - 1) - 2.0 * f(r, c) + f(r, c + 1);
    } else {
        for (std::size_t r = 1; r + 1 < f.rows(); ++r)
            for (std::size_t c = 0; c < f.cols(); ++c)
                out(r, c) = f(r - 1, c) - 2.0 * f(r, c) + f(r + 1, c);
    }
    return out;
}

Grid second_diff_adjoint(const Grid& g, Axis axis) {
    const std::size_t len = axis == Axis::Detector ? g.cols() : g.rows();
    if (len < 3) throw std::invalid_argument("second_diff_adjoint: axis length must be >= 3");

    // scatter the interior stencil: out[j-1] += g[j], out[j] -= 2 g[j], out[j+1] += g[j]
    Grid out(g.rows(), g.cols(), 0.0);
    if (axis == Axis::Detector) {
        for (std::size_t r = 0; r < g.rows(); ++r)
            for (std::size_t c = 1; c + 1 < g.cols(); ++c) {
                double v = g(r, c);
                out(r, c - 1) += v;
                out(r, c) -= 2.0 * v;
                out(r, c + 1) += v;
            }
    } else {
        for (std::size_t r = 1; r + 1 < g.rows(); ++r)
            for (std::size_t c = 0; c < g.cols(); ++c) {
                double v = g(r, c);
                out(r - 1, c) += v;
                out(r, c) -= 2.0 * v;
                out(r + 1, c) += v;
            }
    }
    return out;
}

double prior_energy(const Grid& f, const PriorConfig& cfg) {
    cfg.validate();
    if (cfg.k == 0.0) return 0.0;
    double sum = 0.0;
    for (Axis axis : {Axis::Detector, Axis::Angle}) {
        Grid d = second_diff(f, axis);
        for (std::size_t i = 0; i < d.size(); ++i)
            sum += std::log1p(std::fabs(d[i]) / cfg.eps_prior);
    }
    return cfg.k * sum;
}

Grid prior_grad(const Grid& f, const PriorConfig& cfg) {
    cfg.validate();
    Grid grad(f.rows(), f.cols(), 0.0);
    if (cfg.k == 0.0) return grad;
    for (Axis axis : {Axis::Detector, Axis::Angle}) {
        Grid d = second_diff(f, axis);
        for (std::size_t i = 0; i < d.size(); ++i) {
            double s = d[i] > 0.0 ? 1.0 : (d[i] < 0.0 ? -1.0 : 0.0);
            d[i] = s / (std::fabs(d[i]) + cfg.eps_prior);
        }
        Grid adj = second_diff_adjoint(d, axis);
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += cfg.k * adj[i];
    }
    return grad;
}

double log_factorial(std::int64_t n) {
    if (n < 0) throw std::invalid_argument("log_factorial: n must be >= 0");
    static const double table[21] = {
        std::log(1.0),
        std::log(1.0),
        std::log(2.0),
        std::log(6.0),
        std::log(24.0),
        std::log(120.0),
        std::log(720.0),
        std::log(5040.0),
        std::log(40320.0),
        std::log(362880.0),
        std::log(3628800.0),
        std::log(39916800.0),
        std::log(479001600.0),
        std::log(6227020800.0),
        std::log(87178291200.0),
        std::log(1307674368000.0),
        std::log(20922789888000.0),
        std::log(355687428096000.0),
        std::log(6402373705728000.0),
        std::log(121645100408832000.0),
        std::log(2432902008176640000.0),
    };
    if (n <= 20) return table[n];
    return std::lgamma(static_cast<double>(n) + 1.0);
}

namespace {

void check_likelihood_inputs(const Grid& f, const PhotonData& pd, const ScanConfig& scan) {
    require_same_shape(f, pd.I, "data_energy");
    require_same_shape(f, pd.G, "data_energy");
    scan.require_matches(f);
    if (scan.sigma() <= 0.0)
        throw std::invalid_argument("data_energy: sigma must be > 0 (Gaussian term undefined)");
}

inline double lfact(double g) { return log_factorial(static_cast<std::int64_t>(g)); }

}  // namespace

double data_energy(const Grid& f, const PhotonData& pd, const ScanConfig& scan) {
    check_likelihood_inputs(f, pd, scan);
    const double inv_two_var = 1.0 / (2.0 * scan.sigma() * scan.sigma());
    double sum = 0.0;
    for (std::size_t j = 0; j < f.size(); ++j) {
        double di = pd.I[j] - pd.G[j];
        sum += di * di * inv_two_var - pd.G[j] * std::log(scan.i0(j)) + pd.G[j] * f[j] +
               lfact(pd.G[j]) + scan.i0(j) * std::exp(-f[j]);
    }
    return sum;
}

Grid data_grad_f(const Grid& f, const PhotonData& pd, const ScanConfig& scan) {
    check_likelihood_inputs(f, pd, scan);
    Grid grad(f.rows(), f.cols());
    for (std::size_t j = 0; j < f.size(); ++j)
        grad[j] = pd.G[j] - scan.i0(j) * std::exp(-f[j]);
    return grad;
}

std::pair<LossBreakdown, Grid> unsup_loss_and_grad(const Grid& f, const PhotonData& pd,
                                                   const ScanConfig& scan,
                                                   const PriorConfig& cfg) {
    LossBreakdown loss;
    loss.data_term = data_energy(f, pd, scan);
    loss.prior_term = prior_energy(f, cfg);
    loss.total = loss.data_term + loss.prior_term;

    Grid grad = data_grad_f(f, pd, scan);
    Grid pg = prior_grad(f, cfg);
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += pg[i];
    return {loss, grad};
}

double g_subproblem_value(double g, double intensity, double i0, double f, double sigma) {
    double d = intensity - g;
    return d * d / (2.0 * sigma * sigma) - g * std::log(i0) + g * f +
           log_factorial(static_cast<std::int64_t>(g));
}

PhotonData update_G(const Grid& f, const PhotonData& pd, const ScanConfig& scan) {
    check_likelihood_inputs(f, pd, scan);
    const double sigma = scan.sigma();

    PhotonData out = pd;
#pragma omp parallel for schedule(static)
    for (long j = 0; j < static_cast<long>(f.size()); ++j) {
        auto idx = static_cast<std::size_t>(j);
        const double intensity = pd.I[idx];
        const double i0 = scan.i0(idx);
        const double fj = f[idx];

        double g = pd.G[idx];
        double h = g_subproblem_value(g, intensity, i0, fj, sigma);
        for (;;) {
            double h_up = g_subproblem_value(g + 1.0, intensity, i0, fj, sigma);
            if (!(h > h_up)) break;
            g += 1.0;
            h = h_up;
        }
        while (g >= 1.0) {
            double h_down = g_subproblem_value(g - 1.0, intensity, i0, fj, sigma);
            if (!(h > h_down)) break;
            g -= 1.0;
            h = h_down;
        }
        out.G[idx] = g;
    }
    return out;
}

}  // namespace sinomap
