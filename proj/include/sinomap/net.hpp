#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sinomap/grid.hpp"

namespace sinomap {

/// Architecture description: n_layers 3x3 convolutions, rectifier between
/// layers, linear final layer, optional global residual skip.
struct NetSpec {
    std::size_t n_layers = 5;
    std::size_t channels = 32;
    bool residual = true;

    void validate() const {
        if (n_layers < 2) throw std::invalid_argument("NetSpec: n_layers must be >= 2");
        if (channels < 1) throw std::invalid_argument("NetSpec: channels must be >= 1");
    }

    bool operator==(const NetSpec&) const = default;
};

/// Contiguous channel stack (channels x rows x cols) of feature maps.
class Tensor3 {
public:
    Tensor3() = default;
    Tensor3(std::size_t channels, std::size_t rows, std::size_t cols, double fill = 0.0)
        : channels_(channels), rows_(rows), cols_(cols), data_(channels * rows * cols, fill) {}

    std::size_t channels() const { return channels_; }
    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double* plane(std::size_t c) { return data_.data() + c * rows_ * cols_; }
    const double* plane(std::size_t c) const { return data_.data() + c * rows_ * cols_; }
    double* row(std::size_t c, std::size_t r) { return plane(c) + r * cols_; }
    const double* row(std::size_t c, std::size_t r) const { return plane(c) + r * cols_; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

private:
    std::size_t channels_ = 0, rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

/// One 3x3 convolution layer; weights laid out [out][in][ky][kx].
struct ConvLayer {
    std::size_t in_ch = 0;
    std::size_t out_ch = 0;
    std::vector<double> w;
    std::vector<double> b;

    ConvLayer() = default;
    ConvLayer(std::size_t in, std::size_t out)
        : in_ch(in), out_ch(out), w(out * in * 9, 0.0), b(out, 0.0) {}

    double* kernel(std::size_t oc, std::size_t ic) { return w.data() + (oc * in_ch + ic) * 9; }
    const double* kernel(std::size_t oc, std::size_t ic) const {
        return w.data() + (oc * in_ch + ic) * 9;
    }
};

struct NetworkParams {
    NetSpec spec;
    std::vector<ConvLayer> layers;

    std::size_t count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.w.size() + l.b.size();
        return n;
    }
    bool all_finite() const;
};

/// Gradients share the layer layout of the parameters.
using NetworkGrads = std::vector<ConvLayer>;

/// Everything backward needs: the input and each layer's pre-activation.
struct ActivationCache {
    Tensor3 input;
    std::vector<Tensor3> pre;
};

struct AdamState {
    double rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t step = 0;
    std::vector<ConvLayer> m;
    std::vector<ConvLayer> v;
};

/// Fan-in-scaled uniform weights, zero biases; the final layer starts at
/// zero so a residual net begins as the identity map.
NetworkParams init_params(const NetSpec& spec, std::uint64_t seed);

AdamState init_adam(const NetworkParams& params, double rate = 1e-3, double beta1 = 0.9,
                    double beta2 = 0.999, double eps = 1e-8);

/// Forward pass without caching; for inference.
Sinogram net_apply(const NetworkParams& params, const Sinogram& x);

/// Forward pass that also returns the activation cache for backward.
std::pair<Sinogram, ActivationCache> net_forward(const NetworkParams& params, const Sinogram& x);

/// Exact gradient of <grad_out, forward(params, x)> with respect to every
/// parameter, given the cache of the matching forward call.
NetworkGrads net_backward(const NetworkParams& params, const ActivationCache& cache,
                          const Grid& grad_out);

NetworkGrads zero_grads(const NetworkParams& params);
void accumulate_grads(NetworkGrads& into, const NetworkGrads& from);
void scale_grads(NetworkGrads& grads, double factor);

/// Bias-corrected Adam update, in place; increments the step counter.
void adam_step(NetworkParams& params, const NetworkGrads& grads, AdamState& state);

/// Checkpoint: magic "NETP", version, spec fields, then parameters and
/// optimizer state as little-endian 64-bit floats in declaration order.
void save_checkpoint(const std::string& path, const NetworkParams& params,
                     const AdamState& state);
std::pair<NetworkParams, AdamState> load_checkpoint(const std::string& path);

}  // namespace sinomap
