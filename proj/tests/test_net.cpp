#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <limits>

#include "doctest.h"
#include "sinomap/net.hpp"
#include "sinomap/rng.hpp"

using namespace sinomap;

namespace {

Sinogram random_sino(std::size_t rows, std::size_t cols, std::uint64_t seed, double lo,
                     double hi) {
    Sinogram x(rows, cols);
    SeqRng rng(seed);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(lo, hi);
    return x;
}

void randomize(NetworkParams& params, std::uint64_t seed, double scale) {
    SeqRng rng(seed);
    for (auto& layer : params.layers) {
        for (auto& w : layer.w) w = rng.uniform(-scale, scale);
        for (auto& b : layer.b) b = rng.uniform(-scale, scale);
    }
}

double inner(const Grid& a, const Grid& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

struct TempFile {
    std::string path;
    explicit TempFile(const char* name) : path(std::string("/tmp/sinomap_test_") + name) {}
    ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("net spec validation") {
    NetSpec spec;
    spec.n_layers = 1;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec.n_layers = 2;
    spec.channels = 0;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec.channels = 1;
    CHECK_NOTHROW(spec.validate());
}

TEST_CASE("zero initialized residual net is the identity") {
    NetSpec spec;
    spec.n_layers = 3;
    spec.channels = 4;
    NetworkParams params;
    params.spec = spec;
    for (std::size_t l = 0; l < spec.n_layers; ++l) {
        std::size_t in = l == 0 ? 1 : spec.channels;
        std::size_t out = l + 1 == spec.n_layers ? 1 : spec.channels;
        params.layers.emplace_back(in, out);
    }
    Sinogram x = random_sino(12, 17, 5, -2.0, 2.0);
    Sinogram y = net_apply(params, x);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);
}

TEST_CASE("init params starts at the identity and is seeded") {
    NetSpec spec;
    spec.n_layers = 3;
    spec.channels = 6;
    NetworkParams a = init_params(spec, 42);
    NetworkParams b = init_params(spec, 42);
    NetworkParams c = init_params(spec, 43);
    CHECK(a.count() == b.count());
    bool same = true, diff = false;
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        for (std::size_t i = 0; i < a.layers[l].w.size(); ++i) {
            same = same && a.layers[l].w[i] == b.layers[l].w[i];
            diff = diff || a.layers[l].w[i] != c.layers[l].w[i];
        }
    }
    CHECK(same);
    CHECK(diff);
    CHECK(a.all_finite());

    // zero final layer makes the residual net open at identity
    const ConvLayer& last = a.layers.back();
    for (double w : last.w) CHECK(w == 0.0);
    for (double b2 : last.b) CHECK(b2 == 0.0);
    Sinogram x = random_sino(9, 9, 7, -1.0, 1.0);
    Sinogram y = net_apply(a, x);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);

    // hidden layers are not zero, so training can move
    double wsum = 0.0;
    for (double w : a.layers[0].w) wsum += std::fabs(w);
    CHECK(wsum > 0.0);
}

TEST_CASE("forward preserves shape") {
    NetSpec spec;
    spec.n_layers = 2;
    spec.channels = 3;
    NetworkParams params = init_params(spec, 11);
    randomize(params, 12, 0.2);
    for (auto [rows, cols] : {std::pair<std::size_t, std::size_t>{64, 64}, {90, 128}}) {
        Sinogram x = random_sino(rows, cols, 13, -1.0, 1.0);
        Sinogram y = net_apply(params, x);
        CHECK(y.rows() == rows);
        CHECK(y.cols() == cols);
        CHECK(y.all_finite());
    }
}

TEST_CASE("forward is deterministic") {
    NetSpec spec;
    spec.n_layers = 4;
    spec.channels = 8;
    NetworkParams params = init_params(spec, 21);
    randomize(params, 22, 0.3);
    Sinogram x = random_sino(20, 24, 23, -1.5, 1.5);
    Sinogram y1 = net_apply(params, x);
    Sinogram y2 = net_apply(params, x);
    for (std::size_t i = 0; i < y1.size(); ++i) CHECK(y1[i] == y2[i]);

    auto [y3, cache] = net_forward(params, x);
    for (std::size_t i = 0; i < y1.size(); ++i) CHECK(y1[i] == y3[i]);
}

TEST_CASE("forward rejects non-finite input") {
    NetSpec spec;
    spec.n_layers = 2;
    spec.channels = 2;
    NetworkParams params = init_params(spec, 31);
    Sinogram x(5, 5, 0.0);
    x(2, 2) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(net_apply(params, x), std::invalid_argument);
    x(2, 2) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(net_forward(params, x), std::invalid_argument);
}

TEST_CASE("backward rejects a mismatched cache") {
    NetSpec spec;
    spec.n_layers = 2;
    spec.channels = 2;
    NetworkParams params = init_params(spec, 41);
    randomize(params, 42, 0.2);
    Sinogram x = random_sino(8, 8, 43, -1.0, 1.0);
    auto [y, cache] = net_forward(params, x);

    Grid bad_shape(7, 8, 1.0);
    CHECK_THROWS_AS(net_backward(params, cache, bad_shape), std::invalid_argument);

    NetSpec other = spec;
    other.n_layers = 3;
    NetworkParams wrong = init_params(other, 44);
    Grid g(8, 8, 1.0);
    CHECK_THROWS_AS(net_backward(wrong, cache, g), std::invalid_argument);
}

TEST_CASE("zero upstream gradient gives zero parameter gradients") {
    NetSpec spec;
    spec.n_layers = 3;
    spec.channels = 4;
    NetworkParams params = init_params(spec, 51);
    randomize(params, 52, 0.3);
    Sinogram x = random_sino(10, 10, 53, -1.0, 1.0);
    auto [y, cache] = net_forward(params, x);
    NetworkGrads grads = net_backward(params, cache, Grid(10, 10, 0.0));
    for (const auto& layer : grads) {
        for (double w : layer.w) CHECK(w == 0.0);
        for (double b : layer.b) CHECK(b == 0.0);
    }
}

TEST_CASE("backward matches finite differences") {
    NetSpec spec;
    spec.n_layers = 2;
    spec.channels = 4;
    NetworkParams params = init_params(spec, 61);
    randomize(params, 62, 0.4);
    Sinogram x = random_sino(16, 16, 63, -1.0, 1.0);
    Grid grad_out = random_sino(16, 16, 64, -1.0, 1.0);

    auto [y, cache] = net_forward(params, x);
    NetworkGrads grads = net_backward(params, cache, grad_out);

    auto scalar = [&](const NetworkParams& p) { return inner(grad_out, net_apply(p, x)); };

    const double h = 1e-6;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        // stride through the weights; every (oc, ic) block gets sampled
        for (std::size_t i = 0; i < params.layers[l].w.size(); i += 5) {
            NetworkParams pp = params, pm = params;
            pp.layers[l].w[i] += h;
            pm.layers[l].w[i] -= h;
            double fd = (scalar(pp) - scalar(pm)) / (2.0 * h);
            double got = grads[l].w[i];
            CHECK(got == doctest::Approx(fd).epsilon(1e-4));
        }
        for (std::size_t i = 0; i < params.layers[l].b.size(); ++i) {
            NetworkParams pp = params, pm = params;
            pp.layers[l].b[i] += h;
            pm.layers[l].b[i] -= h;
            double fd = (scalar(pp) - scalar(pm)) / (2.0 * h);
            CHECK(grads[l].b[i] == doctest::Approx(fd).epsilon(1e-4));
        }
    }
}

TEST_CASE("backward matches finite differences on a deeper net") {
    NetSpec spec;
    spec.n_layers = 4;
    spec.channels = 3;
    NetworkParams params = init_params(spec, 71);
    randomize(params, 72, 0.35);
    Sinogram x = random_sino(9, 11, 73, -1.0, 1.0);
    Grid grad_out = random_sino(9, 11, 74, -1.0, 1.0);

    auto [y, cache] = net_forward(params, x);
    NetworkGrads grads = net_backward(params, cache, grad_out);
    auto scalar = [&](const NetworkParams& p) { return inner(grad_out, net_apply(p, x)); };

    const double h = 1e-6;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        for (std::size_t i = 0; i < params.layers[l].w.size(); i += 11) {
            NetworkParams pp = params, pm = params;
            pp.layers[l].w[i] += h;
            pm.layers[l].w[i] -= h;
            double fd = (scalar(pp) - scalar(pm)) / (2.0 * h);
            CHECK(grads[l].w[i] == doctest::Approx(fd).epsilon(1e-4));
        }
    }
}

TEST_CASE("backward is linear in the upstream gradient") {
    NetSpec spec;
    spec.n_layers = 3;
    spec.channels = 4;
    NetworkParams params = init_params(spec, 81);
    randomize(params, 82, 0.3);
    Sinogram x = random_sino(12, 12, 83, -1.0, 1.0);
    Grid g = random_sino(12, 12, 84, -1.0, 1.0);
    Grid g2 = g;
    for (std::size_t i = 0; i < g2.size(); ++i) g2[i] *= 2.0;

    auto [y, cache] = net_forward(params, x);
    NetworkGrads a = net_backward(params, cache, g);
    NetworkGrads b = net_backward(params, cache, g2);
    for (std::size_t l = 0; l < a.size(); ++l) {
        for (std::size_t i = 0; i < a[l].w.size(); ++i)
            CHECK(b[l].w[i] == doctest::Approx(2.0 * a[l].w[i]).epsilon(1e-12));
        for (std::size_t i = 0; i < a[l].b.size(); ++i)
            CHECK(b[l].b[i] == doctest::Approx(2.0 * a[l].b[i]).epsilon(1e-12));
    }
}

TEST_CASE("grad helpers accumulate and scale") {
    NetSpec spec;
    spec.n_layers = 2;
    spec.channels = 2;
    NetworkParams params = init_params(spec, 91);
    NetworkGrads a = zero_grads(params);
    NetworkGrads b = zero_grads(params);
    a[0].w[3] = 1.5;
    b[0].w[3] = 2.0;
    b[1].b[0] = -4.0;
    accumulate_grads(a, b);
    CHECK(a[0].w[3] == 3.5);
    CHECK(a[1].b[0] == -4.0);
    scale_grads(a, 0.5);
    CHECK(a[0].w[3] == 1.75);
    CHECK(a[1].b[0] == -2.0);
}

TEST_CASE("adam first step has closed form magnitude") {
    // single parameter, fresh state: m_hat = g, v_hat = g^2, so the update
    // is rate * g / (|g| + eps'), essentially rate * sign(g)
    NetSpec spec;
    spec.n_layers = 2;
    spec.channels = 1;
    NetworkParams params = init_params(spec, 101);
    for (auto& layer : params.layers) {
        for (auto& w : layer.w) w = 0.0;
        for (auto& b : layer.b) b = 0.0;
    }
    AdamState state = init_adam(params, 0.1);
    NetworkGrads grads = zero_grads(params);
    grads[0].w[4] = 1.0;
    grads[1].w[4] = -3.0;

    adam_step(params, grads, state);
    CHECK(state.step == 1);
    CHECK(params.layers[0].w[4] == doctest::Approx(-0.1).epsilon(1e-6));
    CHECK(params.layers[1].w[4] == doctest::Approx(0.1).epsilon(1e-6));
    CHECK(params.layers[0].w[0] == 0.0);  // untouched entries stay put
}

TEST_CASE("adam ignores zero gradients on a fresh state") {
    NetSpec spec;
    spec.n_layers = 2;
    spec.channels = 2;
    NetworkParams params = init_params(spec, 111);
    randomize(params, 112, 0.2);
    NetworkParams before = params;
    AdamState state = init_adam(params);
    adam_step(params, zero_grads(params), state);
    CHECK(state.step == 1);
    for (std::size_t l = 0; l < params.layers.size(); ++l)
        for (std::size_t i = 0; i < params.layers[l].w.size(); ++i)
            CHECK(params.layers[l].w[i] == before.layers[l].w[i]);
}

TEST_CASE("adam runs are deterministic") {
    NetSpec spec;
    spec.n_layers = 3;
    spec.channels = 3;
    auto run = [&]() {
        NetworkParams params = init_params(spec, 121);
        AdamState state = init_adam(params, 1e-2);
        Sinogram x = random_sino(8, 8, 122, -1.0, 1.0);
        Grid g = random_sino(8, 8, 123, -1.0, 1.0);
        for (int step = 0; step < 5; ++step) {
            auto [y, cache] = net_forward(params, x);
            NetworkGrads grads = net_backward(params, cache, g);
            adam_step(params, grads, state);
        }
        return params;
    };
    NetworkParams a = run();
    NetworkParams b = run();
    for (std::size_t l = 0; l < a.layers.size(); ++l)
        for (std::size_t i = 0; i < a.layers[l].w.size(); ++i)
            CHECK(a.layers[l].w[i] == b.layers[l].w[i]);
}

TEST_CASE("checkpoint round trip is bit exact") {
    NetSpec spec;
    spec.n_layers = 3;
    spec.channels = 5;
    spec.residual = true;
    NetworkParams params = init_params(spec, 131);
    randomize(params, 132, 0.7);
    AdamState state = init_adam(params, 3e-4, 0.85, 0.995, 1e-7);

    // push some history into the moments so they are nonzero
    Sinogram x = random_sino(10, 10, 133, -1.0, 1.0);
    Grid g = random_sino(10, 10, 134, -1.0, 1.0);
    for (int step = 0; step < 3; ++step) {
        auto [y, cache] = net_forward(params, x);
        adam_step(params, net_backward(params, cache, g), state);
    }

    TempFile tmp("roundtrip.netp");
    save_checkpoint(tmp.path, params, state);
    auto [p2, s2] = load_checkpoint(tmp.path);

    CHECK(p2.spec == params.spec);
    CHECK(s2.rate == state.rate);
    CHECK(s2.beta1 == state.beta1);
    CHECK(s2.beta2 == state.beta2);
    CHECK(s2.eps == state.eps);
    CHECK(s2.step == state.step);
    REQUIRE(p2.layers.size() == params.layers.size());
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        for (std::size_t i = 0; i < params.layers[l].w.size(); ++i)
            CHECK(p2.layers[l].w[i] == params.layers[l].w[i]);
        for (std::size_t i = 0; i < params.layers[l].b.size(); ++i)
            CHECK(p2.layers[l].b[i] == params.layers[l].b[i]);
        for (std::size_t i = 0; i < state.m[l].w.size(); ++i)
            CHECK(s2.m[l].w[i] == state.m[l].w[i]);
        for (std::size_t i = 0; i < state.v[l].w.size(); ++i)
            CHECK(s2.v[l].w[i] == state.v[l].w[i]);
    }

    // the loaded state keeps optimizing identically
    NetworkParams pa = params;
    AdamState sa = state;
    auto [ya, ca] = net_forward(pa, x);
    adam_step(pa, net_backward(pa, ca, g), sa);
    auto [yb, cb] = net_forward(p2, x);
    adam_step(p2, net_backward(p2, cb, g), s2);
    for (std::size_t l = 0; l < pa.layers.size(); ++l)
        for (std::size_t i = 0; i < pa.layers[l].w.size(); ++i)
            CHECK(pa.layers[l].w[i] == p2.layers[l].w[i]);
}

TEST_CASE("checkpoint load rejects damage") {
    NetSpec spec;
    spec.n_layers = 2;
    spec.channels = 2;
    NetworkParams params = init_params(spec, 141);
    AdamState state = init_adam(params);
    TempFile tmp("damage.netp");
    save_checkpoint(tmp.path, params, state);

    auto clobber = [&](long offset, char value, long truncate_to) {
        FILE* f = std::fopen(tmp.path.c_str(), "rb");
        REQUIRE(f != nullptr);
        std::fseek(f, 0, SEEK_END);
        long n = std::ftell(f);
        std::fseek(f, 0, SEEK_SET);
        std::string buf(static_cast<std::size_t>(n), '\0');
        REQUIRE(std::fread(buf.data(), 1, buf.size(), f) == buf.size());
        std::fclose(f);
        if (offset >= 0) buf[static_cast<std::size_t>(offset)] = value;
        if (truncate_to >= 0) buf.resize(static_cast<std::size_t>(truncate_to));
        f = std::fopen(tmp.path.c_str(), "wb");
        std::fwrite(buf.data(), 1, buf.size(), f);
        std::fclose(f);
    };

    clobber(0, 'X', -1);  // bad magic
    CHECK_THROWS_AS(load_checkpoint(tmp.path), std::runtime_error);

    save_checkpoint(tmp.path, params, state);
    clobber(4, 0x7f, -1);  // absurd version
    CHECK_THROWS_AS(load_checkpoint(tmp.path), std::runtime_error);

    save_checkpoint(tmp.path, params, state);
    clobber(-1, 0, 40);  // truncated payload
    CHECK_THROWS_AS(load_checkpoint(tmp.path), std::runtime_error);

    CHECK_THROWS_AS(load_checkpoint("/tmp/sinomap_test_does_not_exist.netp"),
                    std::runtime_error);
}

TEST_CASE("forward is translation equivariant on the interior") {
    NetSpec spec;
    spec.n_layers = 3;
    spec.channels = 4;
    NetworkParams params = init_params(spec, 151);
    randomize(params, 152, 0.3);

    Sinogram x = random_sino(16, 24, 153, -1.0, 1.0);
    Sinogram xs(16, 24, 0.0);  // x shifted one detector bin to the right
    for (std::size_t r = 0; r < 16; ++r)
        for (std::size_t c = 1; c < 24; ++c) xs(r, c) = x(r, c - 1);

    Sinogram y = net_apply(params, x);
    Sinogram ys = net_apply(params, xs);

    // receptive field of the 3-layer net is 7, so stay 4+ columns from edges
    for (std::size_t r = 4; r < 12; ++r)
        for (std::size_t c = 5; c < 20; ++c)
            CHECK(ys(r, c) == doctest::Approx(y(r, c - 1)).epsilon(1e-12));
}
