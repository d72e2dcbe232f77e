#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sinomap/geometry.hpp"
#include "sinomap/map_model.hpp"
#include "sinomap/net.hpp"
#include "sinomap/noise_sim.hpp"
#include "sinomap/trainer.hpp"

namespace sinomap {

/// One simulated dose setting; fluence scales with the mAs-equivalent.
struct DoseLevel {
    double mas = 0.0;
    double i0 = 0.0;
    std::string name;  // directory token, e.g. "mas12.5"
};

/// Everything an experiment needs, parsed from a line-oriented
/// [section] key = value file. Unknown keys are rejected.
struct ExperimentConfig {
    // [experiment]
    std::string output_dir;
    std::size_t n_train = 50;
    std::size_t n_sup = 20;
    std::size_t n_heldout = 5;
    std::vector<std::string> methods = {"fbp", "sup", "unsup", "semi"};

    // [phantom]
    std::size_t canvas = 128;
    double attenuation_scale = 0.35;
    double jitter = 0.08;

    // [geometry]
    std::size_t angles = 90;
    std::size_t detectors = 128;
    double spacing = 0.0;  // 0 = span the image diagonal

    // [scan]
    double i0_reference = 2e5;
    double mas_reference = 200.0;
    std::vector<double> mas_levels = {10.0, 12.5, 20.0};
    double sigma = 10.0;

    // [prior]
    PriorConfig prior;

    // [net]
    NetSpec net;

    // [train]
    std::size_t epochs = 100;
    std::size_t batch = 10;
    std::size_t g_period = 1;
    AdamHyper adam;
    double lambda = 0.0;
    bool lambda_auto = true;
    double early_stop_rel = 1e-5;
    std::size_t early_stop_window = 5;
    std::size_t checkpoint_every = 0;

    // [seeds]
    std::uint64_t seed = 1;

    void validate() const;

    bool has_method(const std::string& m) const;

    Geometry geometry() const;
    PhantomSpec phantom() const;
    std::vector<DoseLevel> dose_levels() const;
    ScanConfig scan_at(double i0) const;

    /// Fields that determine artifacts, serialized one per line in a fixed
    /// order; the output directory is excluded on purpose.
    std::string canonical_text() const;
    std::uint64_t config_hash() const;
};

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin);
ExperimentConfig parse_config(const std::string& path);

}  // namespace sinomap
