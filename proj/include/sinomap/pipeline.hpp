#pragma once

#include <ostream>
#include <string>

#include "sinomap/config.hpp"

namespace sinomap {

/// Swallows everything; used as the log sink under --quiet.
std::ostream& null_stream();

struct CliOptions {
    bool quiet = false;
    bool dump = false;  // also write PGM previews of produced fields
};

/// Pipeline stages. Each returns a process exit status (0 = success,
/// 2 = completed with warnings) and throws on errors: invalid_argument for
/// validation problems, runtime_error for missing or corrupt artifacts.
int cmd_simulate(const ExperimentConfig& cfg, const CliOptions& opt);
int cmd_train(const ExperimentConfig& cfg, const CliOptions& opt);

/// With a checkpoint and input path: enhance that one file (out_path
/// optional). With both empty: run over every trained method, dose level
/// and held-out sample of the experiment.
int cmd_enhance(const ExperimentConfig& cfg, const std::string& checkpoint,
                const std::string& input, const std::string& out_path, const CliOptions& opt);

int cmd_evaluate(const ExperimentConfig& cfg, const CliOptions& opt);
int cmd_report(const ExperimentConfig& cfg, const CliOptions& opt);

}  // namespace sinomap
