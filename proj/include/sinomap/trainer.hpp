#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sinomap/map_model.hpp"
#include "sinomap/net.hpp"
#include "sinomap/noise_sim.hpp"

namespace sinomap {

enum class TrainMode { Supervised, Unsupervised, Semi };

std::string to_string(TrainMode mode);

struct AdamHyper {
    double rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct TrainConfig {
    TrainMode mode = TrainMode::Unsupervised;
    double lambda = 0.0;      // trade-off weight; must be >= 0
    bool lambda_auto = true;  // resolve to |C2| / (|C1| + |C2|) at run time
    std::size_t epochs = 100;
    std::size_t batch_size = 10;
    std::size_t g_update_period = 1;  // epochs between latent-count sweeps
    std::uint64_t seed = 0;

    ScanConfig scan;
    PriorConfig prior;
    NetSpec net;
    AdamHyper adam;

    double early_stop_rel = 1e-5;
    std::size_t early_stop_window = 5;

    std::size_t checkpoint_every = 0;  // epochs; 0 disables
    std::string checkpoint_dir;

    std::ostream* log = nullptr;  // optional plain-text training log sink

    void validate() const;
};

struct StepRecord {
    std::size_t epoch = 0;
    std::size_t step = 0;
    double data_term = 0.0;
    double prior_term = 0.0;
    double sup_term = 0.0;  // raw sum of squared errors over the batch
    double total = 0.0;
};

struct GSweepRecord {
    std::size_t epoch = 0;
    std::size_t sample = 0;
    double before = 0.0;
    double after = 0.0;
};

struct TrainState {
    NetworkParams params;
    AdamState adam;
    std::vector<Grid> latent_G;  // one per unsupervised sample
    std::size_t epochs_run = 0;
    bool early_stopped = false;
    double lambda = 0.0;  // resolved trade-off weight
    std::vector<StepRecord> loss_history;
    std::vector<GSweepRecord> sweep_history;
    std::vector<double> epoch_totals;
};

struct SupPair {
    Sinogram x;
    Sinogram y;
};

/// Unlabeled sample: the low-dose sinogram and its measured counts. The
/// latent counts are warm-started inside the trainer as round(max(I, 1)).
struct UnsupSample {
    Sinogram x;
    PhotonData photons;
};

/// Mini-batch Adam on the mean squared error over the pairs.
TrainState train_supervised(const std::vector<SupPair>& pairs, const TrainConfig& cfg);

/// Alternating optimization: latent-count sweeps every g_update_period
/// epochs, network steps on the MAP gradient in between.
TrainState train_unsupervised(const std::vector<UnsupSample>& samples, const TrainConfig& cfg);

/// Combined loss: MAP bracket over the unlabeled set plus lambda times the
/// squared error over the pairs; batches interleave both sets each epoch.
TrainState train_semi(const std::vector<SupPair>& sup_pairs,
                      const std::vector<UnsupSample>& unsup_samples, const TrainConfig& cfg);

/// Forward pass only; reports wall time when `seconds` is non-null.
Sinogram enhance(const NetworkParams& params, const Sinogram& x, double* seconds = nullptr);

}  // namespace sinomap
