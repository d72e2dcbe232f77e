#include "sinomap/net.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "sinomap/fsutil.hpp"
#include "sinomap/rng.hpp"

namespace sinomap {

bool NetworkParams::all_finite() const {
    for (const auto& l : layers) {
        for (double v : l.w)
            if (!std::isfinite(v)) return false;
        for (double v : l.b)
            if (!std::isfinite(v)) return false;
    }
    return true;
}

NetworkParams init_params(const NetSpec& spec, std::uint64_t seed) {
    spec.validate();
    NetworkParams p;
    p.spec = spec;
    p.layers.reserve(spec.n_layers);
    SeqRng rng(derive_seed(seed, 0x6e6574 /*"net"*/));
    for (std::size_t l = 0; l < spec.n_layers; ++l) {
        std::size_t in_ch = l == 0 ? 1 : spec.channels;
        std::size_t out_ch = l + 1 == spec.n_layers ? 1 : spec.channels;
        ConvLayer layer(in_ch, out_ch);
        if (l + 1 < spec.n_layers) {
            double limit = std::sqrt(3.0 / static_cast<double>(in_ch * 9));
            for (auto& w : layer.w) w = rng.uniform(-limit, limit);
        }
        // final layer stays zero so the residual net starts as the identity
        p.layers.push_back(std::move(layer));
    }
    return p;
}

AdamState init_adam(const NetworkParams& params, double rate, double beta1, double beta2,
                    double eps) {
    AdamState s;
    s.rate = rate;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.eps = eps;
    s.step = 0;
    for (const auto& l : params.layers) {
        s.m.emplace_back(l.in_ch, l.out_ch);
        s.v.emplace_back(l.in_ch, l.out_ch);
    }
    return s;
}

namespace {

// out[oc] = b[oc] + sum_ic kernel(oc,ic) * in[ic], 3x3 same-padding.
void conv_forward(const Tensor3& in, const ConvLayer& layer, Tensor3& out) {
    const std::size_t H = in.rows(), W = in.cols();
#pragma omp parallel for schedule(static)
    for (long occ = 0; occ < static_cast<long>(layer.out_ch); ++occ) {
        auto oc = static_cast<std::size_t>(occ);
        double* oplane = out.plane(oc);
        const double bias = layer.b[oc];
        for (std::size_t i = 0; i < H * W; ++i) oplane[i] = bias;
        for (std::size_t ic = 0; ic < layer.in_ch; ++ic) {
            const double* wp = layer.kernel(oc, ic);
            for (int ky = 0; ky < 3; ++ky) {
                const double w0 = wp[ky * 3 + 0];
                const double w1 = wp[ky * 3 + 1];
                const double w2 = wp[ky * 3 + 2];
                const std::size_t y_begin = ky == 0 ? 1 : 0;
                const std::size_t y_end = ky == 2 ? H - 1 : H;
                for (std::size_t y = y_begin; y < y_end; ++y) {
                    const double* irow = in.row(ic, y + static_cast<std::size_t>(ky) - 1);
                    double* orow = oplane + y * W;
                    if (W == 1) {
                        orow[0] += w1 * irow[0];
                        continue;
                    }
                    orow[0] += w1 * irow[0] + w2 * irow[1];
                    for (std::size_t x = 1; x + 1 < W; ++x)
                        orow[x] += w0 * irow[x - 1] + w1 * irow[x] + w2 * irow[x + 1];
                    orow[W - 1] += w0 * irow[W - 2] + w1 * irow[W - 1];
                }
            }
        }
    }
}

// din[ic] = sum_oc flip(kernel(oc,ic)) * dz[oc]; adjoint of conv_forward.
void conv_backward_input(const Tensor3& dz, const ConvLayer& layer, Tensor3& din) {
    const std::size_t H = dz.rows(), W = dz.cols();
#pragma omp parallel for schedule(static)
    for (long icc = 0; icc < static_cast<long>(layer.in_ch); ++icc) {
        auto ic = static_cast<std::size_t>(icc);
        double* iplane = din.plane(ic);
        std::memset(iplane, 0, H * W * sizeof(double));
        for (std::size_t oc = 0; oc < layer.out_ch; ++oc) {
            const double* wp = layer.kernel(oc, ic);
            for (int ky = 0; ky < 3; ++ky) {
                const double w0 = wp[ky * 3 + 0];
                const double w1 = wp[ky * 3 + 1];
                const double w2 = wp[ky * 3 + 2];
                // din[y][x] gets w[ky][kx] * dz[y - (ky-1)][x - (kx-1)]
                const std::size_t y_begin = ky == 2 ? 1 : 0;
                const std::size_t y_end = ky == 0 ? H - 1 : H;
                for (std::size_t y = y_begin; y < y_end; ++y) {
                    const double* zrow = dz.row(oc, y + 1 - static_cast<std::size_t>(ky));
                    double* irow = iplane + y * W;
                    if (W == 1) {
                        irow[0] += w1 * zrow[0];
                        continue;
                    }
                    irow[0] += w1 * zrow[0] + w0 * zrow[1];
                    for (std::size_t x = 1; x + 1 < W; ++x)
                        irow[x] += w2 * zrow[x - 1] + w1 * zrow[x] + w0 * zrow[x + 1];
                    irow[W - 1] += w2 * zrow[W - 2] + w1 * zrow[W - 1];
                }
            }
        }
    }
}

// Weight and bias gradients for one layer.
void conv_backward_params(const Tensor3& in, const Tensor3& dz, ConvLayer& grad) {
    const std::size_t H = dz.rows(), W = dz.cols();
#pragma omp parallel for schedule(static)
    for (long occ = 0; occ < static_cast<long>(grad.out_ch); ++occ) {
        auto oc = static_cast<std::size_t>(occ);
        double db = 0.0;
        const double* zplane = dz.plane(oc);
        for (std::size_t i = 0; i < H * W; ++i) db += zplane[i];
        grad.b[oc] = db;

        for (std::size_t ic = 0; ic < grad.in_ch; ++ic) {
            double* wp = grad.kernel(oc, ic);
            for (int ky = 0; ky < 3; ++ky) {
                double s0 = 0.0, s1 = 0.0, s2 = 0.0;
                const std::size_t y_begin = ky == 0 ? 1 : 0;
                const std::size_t y_end = ky == 2 ? H - 1 : H;
                for (std::size_t y = y_begin; y < y_end; ++y) {
                    const double* irow = in.row(ic, y + static_cast<std::size_t>(ky) - 1);
                    const double* zrow = zplane + y * W;
                    if (W == 1) {
                        s1 += zrow[0] * irow[0];
                        continue;
                    }
                    for (std::size_t x = 1; x < W; ++x) s0 += zrow[x] * irow[x - 1];
                    for (std::size_t x = 0; x < W; ++x) s1 += zrow[x] * irow[x];
                    for (std::size_t x = 0; x + 1 < W; ++x) s2 += zrow[x] * irow[x + 1];
                }
                wp[ky * 3 + 0] = s0;
                wp[ky * 3 + 1] = s1;
                wp[ky * 3 + 2] = s2;
            }
        }
    }
}

void relu(const Tensor3& z, Tensor3& a) {
    const double* src = z.data();
    double* dst = a.data();
    for (std::size_t i = 0; i < z.size(); ++i) dst[i] = src[i] > 0.0 ? src[i] : 0.0;
}

Tensor3 grid_to_tensor(const Grid& g) {
    Tensor3 t(1, g.rows(), g.cols());
    std::memcpy(t.data(), g.data(), g.size() * sizeof(double));
    return t;
}

void check_params(const NetworkParams& params) {
    params.spec.validate();
    if (params.layers.size() != params.spec.n_layers)
        throw std::invalid_argument("NetworkParams: layer count does not match spec");
}

// Shared forward; cache may be null for inference.
Sinogram run_forward(const NetworkParams& params, const Sinogram& x, ActivationCache* cache) {
    check_params(params);
    if (!x.all_finite()) throw std::invalid_argument("net forward: non-finite input");
    const std::size_t L = params.layers.size();
    const std::size_t H = x.rows(), W = x.cols();

    Tensor3 cur = grid_to_tensor(x);
    if (cache) {
        cache->input = cur;
        cache->pre.clear();
        cache->pre.reserve(L);
    }

    Tensor3 z;
    for (std::size_t l = 0; l < L; ++l) {
        const ConvLayer& layer = params.layers[l];
        if (layer.in_ch != cur.channels())
            throw std::invalid_argument("net forward: layer channel mismatch");
        z = Tensor3(layer.out_ch, H, W);
        conv_forward(cur, layer, z);
        if (cache) cache->pre.push_back(z);
        if (l + 1 < L) {
            cur = Tensor3(layer.out_ch, H, W);
            relu(z, cur);
        }
    }

    Sinogram out(H, W);
    std::memcpy(out.data(), z.plane(0), H * W * sizeof(double));
    if (params.spec.residual)
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += x[i];
    return out;
}

}  // namespace

Sinogram net_apply(const NetworkParams& params, const Sinogram& x) {
    return run_forward(params, x, nullptr);
}

std::pair<Sinogram, ActivationCache> net_forward(const NetworkParams& params, const Sinogram& x) {
    ActivationCache cache;
    Sinogram out = run_forward(params, x, &cache);
    return {std::move(out), std::move(cache)};
}

NetworkGrads zero_grads(const NetworkParams& params) {
    NetworkGrads grads;
    grads.reserve(params.layers.size());
    for (const auto& l : params.layers) grads.emplace_back(l.in_ch, l.out_ch);
    return grads;
}

void accumulate_grads(NetworkGrads& into, const NetworkGrads& from) {
    if (into.size() != from.size())
        throw std::invalid_argument("accumulate_grads: layer count mismatch");
    for (std::size_t l = 0; l < into.size(); ++l) {
        for (std::size_t i = 0; i < into[l].w.size(); ++i) into[l].w[i] += from[l].w[i];
        for (std::size_t i = 0; i < into[l].b.size(); ++i) into[l].b[i] += from[l].b[i];
    }
}

void scale_grads(NetworkGrads& grads, double factor) {
    for (auto& l : grads) {
        for (auto& w : l.w) w *= factor;
        for (auto& b : l.b) b *= factor;
    }
}

NetworkGrads net_backward(const NetworkParams& params, const ActivationCache& cache,
                          const Grid& grad_out) {
    check_params(params);
    const std::size_t L = params.layers.size();
    if (cache.pre.size() != L)
        throw std::invalid_argument("net_backward: cache does not match the network");
    const std::size_t H = cache.input.rows(), W = cache.input.cols();
    if (grad_out.rows() != H || grad_out.cols() != W)
        throw std::invalid_argument("net_backward: grad_out shape mismatch");
    for (std::size_t l = 0; l < L; ++l)
        if (cache.pre[l].channels() != params.layers[l].out_ch ||
            cache.pre[l].rows() != H || cache.pre[l].cols() != W)
            throw std::invalid_argument("net_backward: cache does not match the network");

    NetworkGrads grads = zero_grads(params);

    // residual skip passes grad_out straight into the final layer
    Tensor3 dz = grid_to_tensor(grad_out);
    for (std::size_t l = L; l-- > 0;) {
        const ConvLayer& layer = params.layers[l];
        Tensor3 input;
        if (l == 0) {
            input = cache.input;
        } else {
            input = Tensor3(layer.in_ch, H, W);
            relu(cache.pre[l - 1], input);
        }
        conv_backward_params(input, dz, grads[l]);
        if (l > 0) {
            Tensor3 din(layer.in_ch, H, W);
            conv_backward_input(dz, layer, din);
            const double* pre = cache.pre[l - 1].data();
            double* d = din.data();
            for (std::size_t i = 0; i < din.size(); ++i)
                if (pre[i] <= 0.0) d[i] = 0.0;
            dz = std::move(din);
        }
    }
    return grads;
}

void adam_step(NetworkParams& params, const NetworkGrads& grads, AdamState& state) {
    if (grads.size() != params.layers.size() || state.m.size() != params.layers.size())
        throw std::invalid_argument("adam_step: layer count mismatch");
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);

    auto update = [&](double& p, double g, double& m, double& v) {
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g * g;
        p -= state.rate * (m / bc1) / (std::sqrt(v / bc2) + state.eps);
    };

    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        auto& layer = params.layers[l];
        for (std::size_t i = 0; i < layer.w.size(); ++i)
            update(layer.w[i], grads[l].w[i], state.m[l].w[i], state.v[l].w[i]);
        for (std::size_t i = 0; i < layer.b.size(); ++i)
            update(layer.b[i], grads[l].b[i], state.m[l].b[i], state.v[l].b[i]);
    }
}

namespace {

constexpr char kMagic[4] = {'N', 'E', 'T', 'P'};
constexpr std::uint32_t kVersion = 1;

void put_layers(std::vector<std::uint8_t>& buf, const std::vector<ConvLayer>& layers) {
    for (const auto& l : layers) {
        for (double v : l.w) put_f64(buf, v);
        for (double v : l.b) put_f64(buf, v);
    }
}

void get_layers(const std::vector<std::uint8_t>& buf, std::size_t& pos,
                std::vector<ConvLayer>& layers) {
    for (auto& l : layers) {
        for (auto& v : l.w) v = get_f64(buf, pos);
        for (auto& v : l.b) v = get_f64(buf, pos);
    }
}

}  // namespace

void save_checkpoint(const std::string& path, const NetworkParams& params,
                     const AdamState& state) {
    check_params(params);
    std::vector<std::uint8_t> buf;
    buf.insert(buf.end(), kMagic, kMagic + 4);
    put_u32(buf, kVersion);
    put_u32(buf, static_cast<std::uint32_t>(params.spec.n_layers));
    put_u32(buf, static_cast<std::uint32_t>(params.spec.channels));
    put_u32(buf, params.spec.residual ? 1 : 0);
    put_u32(buf, 0);  // activation: rectifier
    put_layers(buf, params.layers);
    put_f64(buf, state.rate);
    put_f64(buf, state.beta1);
    put_f64(buf, state.beta2);
    put_f64(buf, state.eps);
    put_f64(buf, static_cast<double>(state.step));
    put_layers(buf, state.m);
    put_layers(buf, state.v);
    write_file_atomic(path, buf.data(), buf.size());
}

std::pair<NetworkParams, AdamState> load_checkpoint(const std::string& path) {
    std::vector<std::uint8_t> buf = read_file_bytes(path);
    if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    std::size_t pos = 4;
    std::uint32_t version = get_u32(buf, pos);
    if (version != kVersion)
        throw std::runtime_error("checkpoint: unsupported version in " + path);

    NetSpec spec;
    spec.n_layers = get_u32(buf, pos);
    spec.channels = get_u32(buf, pos);
    spec.residual = get_u32(buf, pos) != 0;
    std::uint32_t activation = get_u32(buf, pos);
    if (activation != 0) throw std::runtime_error("checkpoint: unknown activation in " + path);
    spec.validate();

    NetworkParams params;
    params.spec = spec;
    for (std::size_t l = 0; l < spec.n_layers; ++l) {
        std::size_t in_ch = l == 0 ? 1 : spec.channels;
        std::size_t out_ch = l + 1 == spec.n_layers ? 1 : spec.channels;
        params.layers.emplace_back(in_ch, out_ch);
    }
    get_layers(buf, pos, params.layers);

    AdamState state = init_adam(params);
    state.rate = get_f64(buf, pos);
    state.beta1 = get_f64(buf, pos);
    state.beta2 = get_f64(buf, pos);
    state.eps = get_f64(buf, pos);
    state.step = static_cast<std::uint64_t>(get_f64(buf, pos));
    get_layers(buf, pos, state.m);
    get_layers(buf, pos, state.v);
    if (pos != buf.size()) throw std::runtime_error("checkpoint: trailing bytes in " + path);
    return {std::move(params), std::move(state)};
}

}  // namespace sinomap
