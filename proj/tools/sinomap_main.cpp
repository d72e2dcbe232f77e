#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "sinomap/pipeline.hpp"

namespace {

struct Args {
    std::string config;
    std::string out;
    std::string checkpoint;
    std::string input;
    std::uint64_t seed = 0;
    bool seed_given = false;
    bool quiet = false;
    bool dump = false;
};

void add_common(CLI::App* cmd, Args& args) {
    cmd->add_option("--config", args.config, "experiment config file")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", args.out, "override the output directory");
    cmd->add_option("--seed", args.seed, "override the config seed")
        ->each([&args](const std::string&) { args.seed_given = true; });
    cmd->add_flag("--quiet", args.quiet, "suppress progress output");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"low-dose CT sinogram enhancement pipeline"};
    app.require_subcommand(1);
    Args args;

    CLI::App* sim = app.add_subcommand("simulate", "generate phantoms and low-dose sinograms");
    add_common(sim, args);
    sim->add_flag("--dump", args.dump, "also write PGM previews");

    CLI::App* train = app.add_subcommand("train", "train the configured methods per dose level");
    add_common(train, args);

    CLI::App* enh = app.add_subcommand("enhance", "run the network over sinograms");
    add_common(enh, args);
    enh->add_option("--checkpoint", args.checkpoint, "network checkpoint for single-file mode");
    enh->add_option("input", args.input, "sinogram file (single-file mode)");
    enh->add_flag("--dump", args.dump, "also write PGM previews");

    CLI::App* eval = app.add_subcommand("evaluate", "score held-out sinograms and reconstructions");
    add_common(eval, args);

    CLI::App* rep = app.add_subcommand("report", "aggregate scores into a markdown table");
    add_common(rep, args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    if (enh->parsed() && args.checkpoint.empty() != args.input.empty()) {
        std::cerr << "error: --checkpoint and the input path go together\n";
        return 1;
    }

    try {
        sinomap::ExperimentConfig cfg = sinomap::parse_config(args.config);
        if (!args.out.empty()) cfg.output_dir = args.out;
        if (args.seed_given) cfg.seed = args.seed;

        sinomap::CliOptions opt;
        opt.quiet = args.quiet;
        opt.dump = args.dump;

        if (sim->parsed()) return sinomap::cmd_simulate(cfg, opt);
        if (train->parsed()) return sinomap::cmd_train(cfg, opt);
        if (enh->parsed()) {
            std::string out_path = args.out.empty() ? "" : args.out;
            if (!args.checkpoint.empty())
                return sinomap::cmd_enhance(cfg, args.checkpoint, args.input, out_path, opt);
            return sinomap::cmd_enhance(cfg, "", "", "", opt);
        }
        if (eval->parsed()) return sinomap::cmd_evaluate(cfg, opt);
        if (rep->parsed()) return sinomap::cmd_report(cfg, opt);
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
