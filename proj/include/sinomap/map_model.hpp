#pragma once

#include <cstdint>

#include "sinomap/grid.hpp"
#include "sinomap/noise_sim.hpp"

namespace sinomap {

/// Flats-combination prior settings: weight k (zero collapses to the pure
/// data term) and the stabilizer inside the logarithm. The default weight
/// came from a {1e-3..10} grid on held-out phantoms at the 10 mAs dose.
struct PriorConfig {
    double k = 3.0;
    double eps_prior = 1e-3;

    void validate() const {
        if (!(k >= 0.0)) throw std::invalid_argument("PriorConfig: k must be >= 0");
        if (!(eps_prior > 0.0)) throw std::invalid_argument("PriorConfig: eps_prior must be > 0");
    }
};

struct LossBreakdown {
    double data_term = 0.0;
    double prior_term = 0.0;
    double total = 0.0;
};

enum class Axis { Detector, Angle };

/// Second-order difference along one sinogram axis. Interior entries get
/// f[j-1] - 2 f[j] + f[j+1]; boundary entries are 0. Output shape matches
/// the input.
Grid second_diff(const Grid& f, Axis axis);

/// Adjoint of second_diff under the standard inner product.
Grid second_diff_adjoint(const Grid& g, Axis axis);

/// k * sum over both axes of log(1 + |D2 f| / eps); zero for fields that are
/// affine along both axes.
double prior_energy(const Grid& f, const PriorConfig& cfg);

/// Gradient of prior_energy with respect to f; sign(0) treated as 0.
Grid prior_grad(const Grid& f, const PriorConfig& cfg);

/// Negative log-likelihood of the measured counts given network output f:
/// sum_j (I_j - G_j)^2 / (2 sigma^2) - G_j log I0_j + G_j f_j + log(G_j!)
///      + I0_j exp(-f_j).
double data_energy(const Grid& f, const PhotonData& pd, const ScanConfig& scan);

/// d(data_energy)/df, entrywise: G_j - I0_j exp(-f_j).
Grid data_grad_f(const Grid& f, const PhotonData& pd, const ScanConfig& scan);

/// Full unsupervised objective and its gradient with respect to f.
std::pair<LossBreakdown, Grid> unsup_loss_and_grad(const Grid& f, const PhotonData& pd,
                                                   const ScanConfig& scan,
                                                   const PriorConfig& cfg);

/// log(n!) = lgamma(n + 1); table-exact for n <= 20.
double log_factorial(std::int64_t n);

/// Per-ray subproblem value h(g) = (I - g)^2 / (2 sigma^2) - g log I0
///                               + g f + log(g!).
double g_subproblem_value(double g, double intensity, double i0, double f, double sigma);

/// Integer minimizer of h per ray by the unit-step walk (increment while h
/// decreases, then decrement while it decreases), warm-started from pd.G.
/// h is convex in g, so the walk lands on the global integer minimum.
PhotonData update_G(const Grid& f, const PhotonData& pd, const ScanConfig& scan);

}  // namespace sinomap
