#include "sinomap/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <sstream>

#include "sinomap/fsutil.hpp"

namespace sinomap {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

[[noreturn]] void fail(const std::string& origin, std::size_t line, const std::string& msg) {
    throw std::invalid_argument(origin + ":" + std::to_string(line) + ": " + msg);
}

double parse_f64(const std::string& origin, std::size_t line, const std::string& v) {
    errno = 0;
    char* end = nullptr;
    double x = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0' || errno == ERANGE)
        fail(origin, line, "malformed number '" + v + "'");
    return x;
}

std::uint64_t parse_u64(const std::string& origin, std::size_t line, const std::string& v) {
    errno = 0;
    char* end = nullptr;
    unsigned long long x = std::strtoull(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0' || errno == ERANGE || v[0] == '-')
        fail(origin, line, "malformed unsigned integer '" + v + "'");
    return static_cast<std::uint64_t>(x);
}

bool parse_bool(const std::string& origin, std::size_t line, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    fail(origin, line, "malformed boolean '" + v + "' (want true/false)");
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

bool ExperimentConfig::has_method(const std::string& m) const {
    return std::find(methods.begin(), methods.end(), m) != methods.end();
}

Geometry ExperimentConfig::geometry() const {
    return Geometry::make_uniform(angles, detectors, canvas, spacing);
}

PhantomSpec ExperimentConfig::phantom() const {
    return head_phantom_spec(canvas, attenuation_scale, jitter);
}

std::vector<DoseLevel> ExperimentConfig::dose_levels() const {
    std::vector<DoseLevel> out;
    for (double mas : mas_levels) {
        DoseLevel d;
        d.mas = mas;
        d.i0 = i0_reference * mas / mas_reference;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "mas%g", mas);
        d.name = buf;
        out.push_back(d);
    }
    return out;
}

ScanConfig ExperimentConfig::scan_at(double i0) const { return ScanConfig(i0, sigma); }

void ExperimentConfig::validate() const {
    auto bad = [](const std::string& msg) { throw std::invalid_argument("config: " + msg); };

    if (output_dir.empty()) bad("experiment.output_dir must not be empty");
    if (n_train < 1) bad("experiment.n_train must be >= 1");
    if (n_heldout < 1) bad("experiment.n_heldout must be >= 1");
    if (methods.empty()) bad("experiment.methods must not be empty");
    for (const auto& m : methods) {
        if (m != "fbp" && m != "sup" && m != "unsup" && m != "semi")
            bad("unknown method '" + m + "' (want fbp, sup, unsup, semi)");
        if (std::count(methods.begin(), methods.end(), m) != 1)
            bad("method '" + m + "' listed twice");
    }
    if ((has_method("sup") || has_method("semi")) && n_sup < 1)
        bad("experiment.n_sup must be >= 1 for supervised or semi training");

    if (canvas < 16) bad("phantom.canvas must be >= 16");
    if (!(attenuation_scale > 0.0)) bad("phantom.attenuation_scale must be > 0");
    if (!(jitter >= 0.0 && jitter <= 0.5)) bad("phantom.jitter must be in [0, 0.5]");

    geometry().validate();

    if (!(i0_reference > 0.0)) bad("scan.i0_reference must be > 0");
    if (!(mas_reference > 0.0)) bad("scan.mas_reference must be > 0");
    if (mas_levels.empty()) bad("scan.mas_levels must not be empty");
    for (double m : mas_levels)
        if (!(m > 0.0)) bad("scan.mas_levels entries must be > 0");
    {
        std::set<std::string> names;
        for (const auto& d : dose_levels())
            if (!names.insert(d.name).second) bad("duplicate dose level " + d.name);
    }
    if (!(sigma >= 0.0)) bad("scan.sigma must be >= 0");
    if ((has_method("unsup") || has_method("semi")) && !(sigma > 0.0))
        bad("scan.sigma must be > 0 for the unsupervised objective");

    prior.validate();
    net.validate();

    if (epochs < 1) bad("train.epochs must be >= 1");
    if (batch < 1) bad("train.batch must be >= 1");
    if (g_period < 1) bad("train.g_period must be >= 1");
    if (!(adam.rate > 0.0)) bad("train.rate must be > 0");
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) bad("train.beta1 must be in [0, 1)");
    if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) bad("train.beta2 must be in [0, 1)");
    if (!(adam.eps > 0.0)) bad("train.adam_eps must be > 0");
    if (!lambda_auto && !(std::isfinite(lambda) && lambda >= 0.0))
        bad("train.lambda must be >= 0 or 'auto'");
    if (!(early_stop_rel >= 0.0)) bad("train.early_stop_rel must be >= 0");
}

std::string ExperimentConfig::canonical_text() const {
    std::ostringstream os;
    char buf[64];
    auto f = [&](const char* key, double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        os << key << "=" << buf << "\n";
    };
    auto u = [&](const char* key, std::uint64_t v) { os << key << "=" << v << "\n"; };

    u("experiment.n_train", n_train);
    u("experiment.n_sup", n_sup);
    u("experiment.n_heldout", n_heldout);
    os << "experiment.methods=";
    for (std::size_t i = 0; i < methods.size(); ++i) os << (i ? "," : "") << methods[i];
    os << "\n";
    u("phantom.canvas", canvas);
    f("phantom.attenuation_scale", attenuation_scale);
    f("phantom.jitter", jitter);
    u("geometry.angles", angles);
    u("geometry.detectors", detectors);
    f("geometry.spacing", spacing);
    f("scan.i0_reference", i0_reference);
    f("scan.mas_reference", mas_reference);
    os << "scan.mas_levels=";
    for (std::size_t i = 0; i < mas_levels.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", mas_levels[i]);
        os << (i ? "," : "") << buf;
    }
    os << "\n";
    f("scan.sigma", sigma);
    f("prior.k", prior.k);
    f("prior.eps", prior.eps_prior);
    u("net.layers", net.n_layers);
    u("net.channels", net.channels);
    u("net.residual", net.residual ? 1 : 0);
    u("train.epochs", epochs);
    u("train.batch", batch);
    u("train.g_period", g_period);
    f("train.rate", adam.rate);
    f("train.beta1", adam.beta1);
    f("train.beta2", adam.beta2);
    f("train.adam_eps", adam.eps);
    os << "train.lambda=" << (lambda_auto ? std::string("auto") : [&] {
        std::snprintf(buf, sizeof(buf), "%.17g", lambda);
        return std::string(buf);
    }()) << "\n";
    f("train.early_stop_rel", early_stop_rel);
    u("train.early_stop_window", early_stop_window);
    u("train.checkpoint_every", checkpoint_every);
    u("seeds.master", seed);
    return os.str();
}

std::uint64_t ExperimentConfig::config_hash() const {
    std::string text = canonical_text();
    std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
    ExperimentConfig cfg;
    std::set<std::string> seen;
    std::string section;

    std::istringstream is(text);
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(is, raw)) {
        ++lineno;
        std::size_t hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        std::string line = trim(raw);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') fail(origin, lineno, "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section != "experiment" && section != "phantom" && section != "geometry" &&
                section != "scan" && section != "prior" && section != "net" &&
                section != "train" && section != "seeds")
                fail(origin, lineno, "unknown section [" + section + "]");
            continue;
        }

        std::size_t eq = line.find('=');
        if (eq == std::string::npos) fail(origin, lineno, "expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) fail(origin, lineno, "empty key");
        if (section.empty()) fail(origin, lineno, "key '" + key + "' outside any section");

        std::string full = section + "." + key;
        if (!seen.insert(full).second)
            fail(origin, lineno, "duplicate key '" + full + "'");

        auto f64 = [&] { return parse_f64(origin, lineno, value); };
        auto u64 = [&] { return parse_u64(origin, lineno, value); };
        auto boolean = [&] { return parse_bool(origin, lineno, value); };

        if (full == "experiment.output_dir") cfg.output_dir = value;
        else if (full == "experiment.n_train") cfg.n_train = u64();
        else if (full == "experiment.n_sup") cfg.n_sup = u64();
        else if (full == "experiment.n_heldout") cfg.n_heldout = u64();
        else if (full == "experiment.methods") cfg.methods = split_list(value);
        else if (full == "phantom.canvas") cfg.canvas = u64();
        else if (full == "phantom.attenuation_scale") cfg.attenuation_scale = f64();
        else if (full == "phantom.jitter") cfg.jitter = f64();
        else if (full == "geometry.angles") cfg.angles = u64();
        else if (full == "geometry.detectors") cfg.detectors = u64();
        else if (full == "geometry.spacing") cfg.spacing = f64();
        else if (full == "scan.i0_reference") cfg.i0_reference = f64();
        else if (full == "scan.mas_reference") cfg.mas_reference = f64();
        else if (full == "scan.mas_levels") {
            cfg.mas_levels.clear();
            for (const auto& item : split_list(value))
                cfg.mas_levels.push_back(parse_f64(origin, lineno, item));
        } else if (full == "scan.sigma") cfg.sigma = f64();
        else if (full == "prior.k") cfg.prior.k = f64();
        else if (full == "prior.eps") cfg.prior.eps_prior = f64();
        else if (full == "net.layers") cfg.net.n_layers = u64();
        else if (full == "net.channels") cfg.net.channels = u64();
        else if (full == "net.residual") cfg.net.residual = boolean();
        else if (full == "train.epochs") cfg.epochs = u64();
        else if (full == "train.batch") cfg.batch = u64();
        else if (full == "train.g_period") cfg.g_period = u64();
        else if (full == "train.rate") cfg.adam.rate = f64();
        else if (full == "train.beta1") cfg.adam.beta1 = f64();
        else if (full == "train.beta2") cfg.adam.beta2 = f64();
        else if (full == "train.adam_eps") cfg.adam.eps = f64();
        else if (full == "train.lambda") {
            if (value == "auto") {
                cfg.lambda_auto = true;
            } else {
                cfg.lambda = f64();
                cfg.lambda_auto = false;
            }
        } else if (full == "train.early_stop_rel") cfg.early_stop_rel = f64();
        else if (full == "train.early_stop_window") cfg.early_stop_window = u64();
        else if (full == "train.checkpoint_every") cfg.checkpoint_every = u64();
        else if (full == "seeds.master") cfg.seed = u64();
        else fail(origin, lineno, "unknown key '" + full + "'");
    }

    cfg.validate();
    return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
    std::vector<std::uint8_t> bytes = read_file_bytes(path);
    return parse_config_text(std::string(bytes.begin(), bytes.end()), path);
}

}  // namespace sinomap
