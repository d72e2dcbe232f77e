#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "sinomap/config.hpp"
#include "sinomap/net.hpp"
#include "sinomap/rng.hpp"
#include "sinomap/sino_io.hpp"

using namespace sinomap;
namespace fs = std::filesystem;

namespace {

Grid random_grid(std::size_t rows, std::size_t cols, std::uint64_t seed, double lo, double hi) {
    Grid g(rows, cols);
    SeqRng rng(seed);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = rng.uniform(lo, hi);
    return g;
}

std::vector<std::uint8_t> slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

std::string slurp_text(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const char* name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

int run_cli(const std::string& args) {
    std::string cmd = std::string(SINOMAP_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    REQUIRE(WIFEXITED(rc));
    return WEXITSTATUS(rc);
}

const char* kTinyConfig = R"(# tiny end-to-end run
[experiment]
output_dir = %OUT%
n_train = 2
n_sup = 1
n_heldout = 1
methods = fbp, sup, unsup, semi

[phantom]
canvas = 32
attenuation_scale = 0.35
jitter = 0.08

[geometry]
angles = 24
detectors = 48

[scan]
mas_levels = 20
sigma = 4

[prior]
k = 0.1
eps = 1e-3

[net]
layers = 2
channels = 3

[train]
epochs = 2
batch = 2
rate = 1e-3

[seeds]
master = 7
)";

std::string write_tiny_config(const TempDir& dir, const std::string& out_subdir) {
    std::string text = kTinyConfig;
    std::string out = (dir.path / out_subdir).string();
    text.replace(text.find("%OUT%"), 5, out);
    fs::path cfg_path = dir.path / (out_subdir + ".cfg");
    std::ofstream(cfg_path) << text;
    return cfg_path.string();
}

}  // namespace

TEST_CASE("sinogram files round trip bit exactly") {
    TempDir dir("sinomap_test_sino");
    for (SinoKind kind : {SinoKind::Log, SinoKind::Counts}) {
        Grid g = random_grid(90, 128, 17 + static_cast<std::uint64_t>(kind), -3.0, 300.0);
        fs::path p = dir.path / "a.sino";
        write_sinogram(p.string(), g, kind);
        SinoFile sf = read_sinogram(p.string());
        CHECK(sf.kind == kind);
        REQUIRE(sf.data.rows() == 90);
        REQUIRE(sf.data.cols() == 128);
        for (std::size_t i = 0; i < g.size(); ++i) CHECK(sf.data[i] == g[i]);
    }
}

TEST_CASE("sinogram reader rejects damaged files") {
    TempDir dir("sinomap_test_sino_bad");
    fs::path p = dir.path / "a.sino";
    Grid g = random_grid(6, 8, 23, 0.0, 1.0);
    write_sinogram(p.string(), g, SinoKind::Log);
    std::vector<std::uint8_t> good = slurp(p);

    auto mutate = [&](auto fn) {
        std::vector<std::uint8_t> bytes = good;
        fn(bytes);
        spit(p, bytes);
    };

    mutate([](auto& b) { b[0] = 'X'; });  // XINO
    CHECK_THROWS_AS(read_sinogram(p.string()), SinoBadMagic);

    mutate([](auto& b) { b[4] = 2; });  // version
    CHECK_THROWS_AS(read_sinogram(p.string()), SinoBadVersion);

    mutate([](auto& b) { b[8] = 9; });  // kind
    CHECK_THROWS_AS(read_sinogram(p.string()), SinoFormatError);

    mutate([](auto& b) { b.resize(b.size() - 8); });
    CHECK_THROWS_AS(read_sinogram(p.string()), SinoTruncated);

    mutate([](auto& b) { b.resize(b.size() + 4, 0); });
    CHECK_THROWS_AS(read_sinogram(p.string()), SinoFormatError);

    mutate([](auto& b) { b.resize(3); });
    CHECK_THROWS_AS(read_sinogram(p.string()), SinoBadMagic);

    CHECK_THROWS_AS(read_sinogram((dir.path / "missing.sino").string()), std::runtime_error);
}

TEST_CASE("pgm export carries the window and clamps") {
    TempDir dir("sinomap_test_pgm");
    Grid g(2, 3);
    g(0, 0) = 0.0;
    g(0, 1) = 0.5;
    g(0, 2) = 1.0;
    g(1, 0) = -5.0;  // clamps to lo
    g(1, 1) = 7.0;   // clamps to hi
    g(1, 2) = 0.25;
    fs::path p = dir.path / "a.pgm";
    write_pgm(p.string(), g, 0.0, 1.0);

    std::vector<std::uint8_t> bytes = slurp(p);
    std::string head(bytes.begin(), bytes.begin() + 40);
    CHECK(head.rfind("P5\n# window 0 1\n3 2\n65535\n", 0) == 0);
    std::size_t off = std::string("P5\n# window 0 1\n3 2\n65535\n").size();
    REQUIRE(bytes.size() == off + 2 * g.size());
    auto sample = [&](std::size_t i) {
        return static_cast<unsigned>(bytes[off + 2 * i]) * 256u +
               static_cast<unsigned>(bytes[off + 2 * i + 1]);
    };
    CHECK(sample(0) == 0u);
    CHECK(sample(1) == 32768u);
    CHECK(sample(2) == 65535u);
    CHECK(sample(3) == 0u);
    CHECK(sample(4) == 65535u);
    CHECK(sample(5) == 16384u);

    CHECK(slurp_text(p.string() + ".window.txt") == "window 0 1\n");
}

TEST_CASE("minimal config fills defaults") {
    ExperimentConfig cfg = parse_config_text("[experiment]\noutput_dir = /tmp/x\n", "mini");
    CHECK(cfg.output_dir == "/tmp/x");
    CHECK(cfg.n_train == 50);
    CHECK(cfg.n_sup == 20);
    CHECK(cfg.n_heldout == 5);
    CHECK(cfg.canvas == 128);
    CHECK(cfg.angles == 90);
    CHECK(cfg.detectors == 128);
    CHECK(cfg.sigma == 10.0);
    CHECK(cfg.epochs == 100);
    CHECK(cfg.lambda_auto);
    CHECK(cfg.methods.size() == 4);
    auto doses = cfg.dose_levels();
    REQUIRE(doses.size() == 3);
    CHECK(doses[0].name == "mas10");
    CHECK(doses[0].i0 == doctest::Approx(1e4).epsilon(1e-12));
    CHECK(doses[1].name == "mas12.5");
    CHECK(doses[1].i0 == doctest::Approx(1.25e4).epsilon(1e-12));
    CHECK(doses[2].name == "mas20");
    CHECK(doses[2].i0 == doctest::Approx(2e4).epsilon(1e-12));
}

TEST_CASE("config parser reads every section") {
    std::string text = R"([experiment]
output_dir = /tmp/exp
n_train = 3
n_sup = 2
n_heldout = 2
methods = fbp, unsup

[phantom]
canvas = 64
attenuation_scale = 0.4
jitter = 0.1

[geometry]
angles = 45
detectors = 64
spacing = 1.5

[scan]
i0_reference = 1e5
mas_reference = 100
mas_levels = 10, 25
sigma = 8

[prior]
k = 0.2
eps = 5e-3

[net]
layers = 4
channels = 12
residual = true

[train]
lambda = 0.25
epochs = 9
batch = 3
g_period = 2
rate = 5e-4
beta1 = 0.8
beta2 = 0.99
adam_eps = 1e-7
early_stop_rel = 1e-6
early_stop_window = 4
checkpoint_every = 3

[seeds]
master = 99
)";
    ExperimentConfig cfg = parse_config_text(text, "full");
    CHECK(cfg.n_train == 3);
    CHECK(cfg.methods == std::vector<std::string>{"fbp", "unsup"});
    CHECK(cfg.canvas == 64);
    CHECK(cfg.jitter == 0.1);
    CHECK(cfg.angles == 45);
    CHECK(cfg.spacing == 1.5);
    CHECK(cfg.i0_reference == 1e5);
    CHECK(cfg.mas_levels == std::vector<double>{10.0, 25.0});
    CHECK(cfg.prior.k == 0.2);
    CHECK(cfg.net.n_layers == 4);
    CHECK(cfg.net.channels == 12);
    CHECK_FALSE(cfg.lambda_auto);
    CHECK(cfg.lambda == 0.25);
    CHECK(cfg.epochs == 9);
    CHECK(cfg.g_period == 2);
    CHECK(cfg.adam.rate == 5e-4);
    CHECK(cfg.adam.beta1 == 0.8);
    CHECK(cfg.early_stop_window == 4);
    CHECK(cfg.checkpoint_every == 3);
    CHECK(cfg.seed == 99);

    auto doses = cfg.dose_levels();
    REQUIRE(doses.size() == 2);
    CHECK(doses[0].i0 == doctest::Approx(1e4));   // 1e5 * 10 / 100
    CHECK(doses[1].i0 == doctest::Approx(2.5e4));
}

TEST_CASE("lambda accepts auto") {
    std::string text = "[experiment]\noutput_dir = /tmp/x\n[train]\nlambda = auto\n";
    ExperimentConfig cfg = parse_config_text(text, "auto");
    CHECK(cfg.lambda_auto);
    std::string bad = "[experiment]\noutput_dir = /tmp/x\n[train]\nlambda = -2\n";
    CHECK_THROWS_AS(parse_config_text(bad, "neg"), std::invalid_argument);
}

TEST_CASE("config errors carry the origin and line") {
    std::string dup =
        "[experiment]\noutput_dir = /tmp/x\nn_train = 4\nn_train = 5\n";
    try {
        parse_config_text(dup, "my.cfg");
        FAIL("expected a duplicate-key error");
    } catch (const std::invalid_argument& e) {
        std::string msg = e.what();
        CHECK(msg.find("my.cfg:4") != std::string::npos);
        CHECK(msg.find("duplicate") != std::string::npos);
    }

    CHECK_THROWS_AS(parse_config_text("[experiment]\noutput_dir = /t\n[nope]\n", "x"),
                    std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text("[experiment]\noutput_dir = /t\nbogus_key = 1\n", "x"),
                    std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text("key_before_section = 1\n", "x"),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        parse_config_text("[experiment]\noutput_dir = /t\n[scan]\nsigma = banana\n", "x"),
        std::invalid_argument);
    CHECK_THROWS_AS(
        parse_config_text("[experiment]\noutput_dir = /t\n[scan]\nsigma = -1\n", "x"),
        std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text("[experiment]\n", "x"), std::invalid_argument);
    CHECK_THROWS_AS(
        parse_config_text("[experiment]\noutput_dir = /t\nmethods = fbp, dnn\n", "x"),
        std::invalid_argument);
}

TEST_CASE("config hash ignores the output directory") {
    ExperimentConfig a = parse_config_text("[experiment]\noutput_dir = /tmp/a\n", "a");
    ExperimentConfig b = parse_config_text("[experiment]\noutput_dir = /tmp/b\n", "b");
    CHECK(a.config_hash() == b.config_hash());

    ExperimentConfig c =
        parse_config_text("[experiment]\noutput_dir = /tmp/a\n[scan]\nsigma = 9\n", "c");
    CHECK(a.config_hash() != c.config_hash());
}

TEST_CASE("cli usage errors") {
    CHECK(run_cli("") == 1);
    CHECK(run_cli("frobnicate --config /tmp/nope.cfg") == 1);
    CHECK(run_cli("simulate") == 1);                                // --config required
    CHECK(run_cli("simulate --config /tmp/definitely_missing.cfg") == 1);
}

TEST_CASE("cli pipeline runs end to end and is idempotent") {
    TempDir dir("sinomap_test_cli");
    std::string cfg_path = write_tiny_config(dir, "out");
    fs::path out = dir.path / "out";

    REQUIRE(run_cli("simulate --config " + cfg_path) == 0);
    CHECK(fs::exists(out / "manifest.txt"));
    CHECK(fs::exists(out / "data" / "clean" / "train_0000.sino"));
    CHECK(fs::exists(out / "data" / "clean" / "held_0000.sino"));
    CHECK(fs::exists(out / "data" / "mas20" / "train_0001.x.sino"));
    CHECK(fs::exists(out / "data" / "mas20" / "train_0001.counts.sino"));

    // idempotence: a second run rewrites byte-identical data
    std::vector<std::uint8_t> before = slurp(out / "data" / "mas20" / "train_0000.x.sino");
    std::string manifest_before = slurp_text(out / "manifest.txt");
    REQUIRE(run_cli("simulate --config " + cfg_path) == 0);
    CHECK(slurp(out / "data" / "mas20" / "train_0000.x.sino") == before);
    CHECK(slurp_text(out / "manifest.txt") == manifest_before);

    // a different seed conflicts with the existing manifest
    CHECK(run_cli("simulate --config " + cfg_path + " --seed 999") == 2);

    // enhance before train is a missing-artifact failure
    CHECK(run_cli("enhance --config " + cfg_path) == 3);
    CHECK(run_cli("evaluate --config " + cfg_path) == 3);

    REQUIRE(run_cli("train --config " + cfg_path + " --quiet") == 0);
    CHECK(fs::exists(out / "train" / "sup_mas20" / "final.netp"));
    CHECK(fs::exists(out / "train" / "unsup_mas20" / "train.log"));
    CHECK(fs::exists(out / "train" / "semi_mas20" / "final.netp"));

    REQUIRE(run_cli("enhance --config " + cfg_path + " --quiet") == 0);
    CHECK(fs::exists(out / "enhance" / "unsup_mas20" / "held_0000.sino"));
    CHECK(fs::exists(out / "enhance" / "unsup_mas20" / "times.txt"));

    REQUIRE(run_cli("evaluate --config " + cfg_path + " --quiet") == 0);
    CHECK(fs::exists(out / "eval" / "fbp_mas20.txt"));
    CHECK(fs::exists(out / "eval" / "semi_mas20.txt"));
    std::string eval_text = slurp_text(out / "eval" / "unsup_mas20.txt");
    CHECK(eval_text.find("psnr_sino = ") != std::string::npos);
    CHECK(eval_text.find("ssim_image = ") != std::string::npos);
    CHECK(eval_text.find("time_s = ") != std::string::npos);
    CHECK(eval_text.find("# sample 0 ") != std::string::npos);

    REQUIRE(run_cli("report --config " + cfg_path + " --quiet") == 0);
    std::string report = slurp_text(out / "report.md");
    CHECK(report.find("| method") != std::string::npos);
    CHECK(report.find("fbp") != std::string::npos);
    CHECK(report.find("semi") != std::string::npos);
    CHECK(report.find("n/a") == std::string::npos);

    // training logs are deterministic artifacts; re-running train reproduces them
    std::string log_before = slurp_text(out / "train" / "unsup_mas20" / "train.log");
    REQUIRE(run_cli("train --config " + cfg_path + " --quiet") == 0);
    CHECK(slurp_text(out / "train" / "unsup_mas20" / "train.log") == log_before);
}

TEST_CASE("cli report marks missing methods and warns") {
    TempDir dir("sinomap_test_cli_na");
    std::string cfg_path = write_tiny_config(dir, "out");
    // drop two methods so their eval files never exist
    std::string text = slurp_text(cfg_path);
    text.replace(text.find("methods = fbp, sup, unsup, semi"),
                 std::string("methods = fbp, sup, unsup, semi").size(),
                 "methods = fbp, unsup");
    std::ofstream(cfg_path, std::ios::trunc) << text;

    REQUIRE(run_cli("simulate --config " + cfg_path) == 0);
    REQUIRE(run_cli("train --config " + cfg_path + " --quiet") == 0);
    REQUIRE(run_cli("enhance --config " + cfg_path + " --quiet") == 0);
    REQUIRE(run_cli("evaluate --config " + cfg_path + " --quiet") == 0);
    CHECK(run_cli("report --config " + cfg_path + " --quiet") == 2);
    std::string report = slurp_text(dir.path / "out" / "report.md");
    CHECK(report.find("n/a") != std::string::npos);
    CHECK(report.find("unsup") != std::string::npos);
}

TEST_CASE("cli single file enhance with an identity checkpoint") {
    TempDir dir("sinomap_test_cli_one");
    std::string cfg_path = write_tiny_config(dir, "out");
    REQUIRE(run_cli("simulate --config " + cfg_path) == 0);
    fs::path x_path = dir.path / "out" / "data" / "mas20" / "held_0000.x.sino";
    REQUIRE(fs::exists(x_path));

    NetSpec spec;
    spec.n_layers = 2;
    spec.channels = 3;
    NetworkParams params = init_params(spec, 5);  // zero final layer: identity
    fs::path ckpt = dir.path / "id.netp";
    save_checkpoint(ckpt.string(), params, init_adam(params));

    fs::path out_path = dir.path / "enhanced.sino";
    REQUIRE(run_cli("enhance --config " + cfg_path + " --checkpoint " + ckpt.string() + " " +
                    x_path.string() + " --out " + out_path.string()) == 0);

    // identity network: output file equals the input byte for byte
    CHECK(slurp(out_path) == slurp(x_path));
    CHECK(fs::exists(out_path.string() + ".time.txt"));

    // counts files are not valid enhance inputs
    fs::path counts = dir.path / "out" / "data" / "mas20" / "held_0000.counts.sino";
    CHECK(run_cli("enhance --config " + cfg_path + " --checkpoint " + ckpt.string() + " " +
                  counts.string()) == 2);

    // checkpoint and positional input go together
    CHECK(run_cli("enhance --config " + cfg_path + " --checkpoint " + ckpt.string()) == 1);
    CHECK(run_cli("enhance --config " + cfg_path + " " + x_path.string()) == 1);
}

TEST_CASE("cli dump writes previews") {
    TempDir dir("sinomap_test_cli_dump");
    std::string cfg_path = write_tiny_config(dir, "out");
    REQUIRE(run_cli("simulate --config " + cfg_path + " --dump") == 0);
    fs::path pgm = dir.path / "out" / "data" / "clean" / "train_0000.sino.pgm";
    CHECK(fs::exists(pgm));
    CHECK(fs::exists(pgm.string() + ".window.txt"));
    std::vector<std::uint8_t> bytes = slurp(pgm);
    CHECK(bytes.size() > 2);
    CHECK(bytes[0] == 'P');
    CHECK(bytes[1] == '5');
}
