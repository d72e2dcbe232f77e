#include "sinomap/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <ostream>
#include <stdexcept>

#include "sinomap/rng.hpp"

namespace sinomap {

std::string to_string(TrainMode mode) {
    switch (mode) {
        case TrainMode::Supervised: return "supervised";
        case TrainMode::Unsupervised: return "unsupervised";
        case TrainMode::Semi: return "semi";
    }
    return "?";
}

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (g_update_period < 1)
        throw std::invalid_argument("TrainConfig: g_update_period must be >= 1");
    if (!lambda_auto && (!std::isfinite(lambda) || lambda < 0.0))
        throw std::invalid_argument("TrainConfig: lambda must be finite and >= 0");
    net.validate();
    prior.validate();
    scan.validate();
}

namespace {

struct Batch {
    bool supervised = false;
    std::vector<std::size_t> indices;
};

// Interleave unsupervised and supervised batches evenly across the epoch.
std::vector<Batch> make_schedule(std::size_t n_unsup, std::size_t n_sup, std::size_t batch_size,
                                 SeqRng& rng) {
    auto chop = [batch_size](std::vector<std::size_t> order, bool supervised) {
        std::vector<Batch> batches;
        for (std::size_t i = 0; i < order.size(); i += batch_size) {
            Batch b;
            b.supervised = supervised;
            for (std::size_t j = i; j < std::min(i + batch_size, order.size()); ++j)
                b.indices.push_back(order[j]);
            batches.push_back(std::move(b));
        }
        return batches;
    };

    std::vector<Batch> unsup_batches, sup_batches;
    if (n_unsup > 0) {
        std::vector<std::size_t> order(n_unsup);
        for (std::size_t i = 0; i < n_unsup; ++i) order[i] = i;
        rng.shuffle(order);
        unsup_batches = chop(std::move(order), false);
    }
    if (n_sup > 0) {
        std::vector<std::size_t> order(n_sup);
        for (std::size_t i = 0; i < n_sup; ++i) order[i] = i;
        rng.shuffle(order);
        sup_batches = chop(std::move(order), true);
    }

    // Bresenham-style merge keeps both kinds spread through the epoch.
    std::vector<Batch> schedule;
    std::size_t iu = 0, is = 0;
    const std::size_t nu = unsup_batches.size(), ns = sup_batches.size();
    while (iu < nu || is < ns) {
        bool take_unsup;
        if (iu >= nu)
            take_unsup = false;
        else if (is >= ns)
            take_unsup = true;
        else
            take_unsup = (iu + 1) * ns <= (is + 1) * nu;
        if (take_unsup)
            schedule.push_back(std::move(unsup_batches[iu++]));
        else
            schedule.push_back(std::move(sup_batches[is++]));
    }
    return schedule;
}

void log_line(std::ostream* log, const char* fmt, ...) {
    if (!log) return;
    char buf[512];
    va_list args;
    va_start(args, fmt);
    std::vsnprintf(buf, sizeof(buf), fmt, args);
    va_end(args);
    (*log) << buf << '\n';
}

struct ShapeInfo {
    std::size_t rows = 0, cols = 0;
};

TrainState train_core(const std::vector<SupPair>& sup, const std::vector<UnsupSample>& unsup,
                      const TrainConfig& cfg) {
    cfg.validate();

    if (cfg.mode == TrainMode::Supervised && sup.empty())
        throw std::invalid_argument("train: supervised set is empty");
    if (cfg.mode == TrainMode::Unsupervised && unsup.empty())
        throw std::invalid_argument("train: unsupervised set is empty");
    if (cfg.mode == TrainMode::Semi && unsup.empty())
        throw std::invalid_argument("train: semi mode needs unlabeled data");

    ShapeInfo shape;
    if (!unsup.empty()) {
        shape.rows = unsup[0].x.rows();
        shape.cols = unsup[0].x.cols();
    } else {
        shape.rows = sup[0].x.rows();
        shape.cols = sup[0].x.cols();
    }
    const double rays = static_cast<double>(shape.rows * shape.cols);
    if (rays == 0.0) throw std::invalid_argument("train: empty sinograms");

    for (const auto& s : unsup) {
        if (s.x.rows() != shape.rows || s.x.cols() != shape.cols)
            throw std::invalid_argument("train: inconsistent sample shapes");
        if (s.photons.I.size() == 0)
            throw std::invalid_argument("train: unsupervised sample missing photon data");
        require_same_shape(s.x, s.photons.I, "train: photon data");
    }
    for (const auto& p : sup) {
        if (p.x.rows() != shape.rows || p.x.cols() != shape.cols)
            throw std::invalid_argument("train: inconsistent sample shapes");
        require_same_shape(p.x, p.y, "train: supervised pair");
    }

    double lambda = cfg.lambda;
    if (cfg.mode == TrainMode::Supervised) {
        lambda = 1.0;  // plain squared-error objective; no trade-off applies
    } else if (cfg.mode == TrainMode::Unsupervised) {
        lambda = 0.0;
    } else if (cfg.lambda_auto) {
        lambda = static_cast<double>(sup.size()) /
                 static_cast<double>(sup.size() + unsup.size());
    }
    if (cfg.mode == TrainMode::Semi && sup.empty() && lambda != 0.0)
        throw std::invalid_argument("train: semi mode needs pairs unless lambda = 0");
    const bool use_unsup = cfg.mode != TrainMode::Supervised;
    const bool use_sup = cfg.mode != TrainMode::Unsupervised && !sup.empty();

    if (use_unsup && cfg.scan.sigma() <= 0.0)
        throw std::invalid_argument("train: sigma must be > 0 for the MAP objective");

    TrainState state;
    state.lambda = lambda;
    state.params = init_params(cfg.net, derive_seed(cfg.seed, 0x696e6974 /*"init"*/));
    state.adam =
        init_adam(state.params, cfg.adam.rate, cfg.adam.beta1, cfg.adam.beta2, cfg.adam.eps);

    if (use_unsup) {
        state.latent_G.reserve(unsup.size());
        for (const auto& s : unsup) {
            Grid g(s.photons.I.rows(), s.photons.I.cols());
            for (std::size_t i = 0; i < g.size(); ++i)
                g[i] = std::round(std::max(s.photons.I[i], 1.0));
            state.latent_G.push_back(std::move(g));
        }
    }

    SeqRng shuffle_rng(derive_seed(cfg.seed, 0x73687566 /*"shuf"*/));
    std::size_t step_counter = 0;

    log_line(cfg.log, "train mode=%s lambda=%.17g epochs=%zu batch=%zu samples_unsup=%zu samples_sup=%zu",
             to_string(cfg.mode).c_str(), lambda, cfg.epochs, cfg.batch_size, unsup.size(),
             sup.size());

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        // latent-count sweeps (Algorithm 1) at fixed network parameters
        if (use_unsup && epoch % cfg.g_update_period == 0) {
            for (std::size_t i = 0; i < unsup.size(); ++i) {
                Sinogram f = net_apply(state.params, unsup[i].x);
                PhotonData pd{unsup[i].photons.I, state.latent_G[i]};
                double before =
                    data_energy(f, pd, cfg.scan) + prior_energy(f, cfg.prior);
                pd = update_G(f, pd, cfg.scan);
                state.latent_G[i] = pd.G;
                double after = data_energy(f, pd, cfg.scan) + prior_energy(f, cfg.prior);
                state.sweep_history.push_back({epoch, i, before, after});
                log_line(cfg.log, "gsweep epoch=%zu sample=%zu before=%.17g after=%.17g", epoch,
                         i, before, after);
            }
        }

        auto schedule = make_schedule(use_unsup ? unsup.size() : 0,
                                      use_sup ? sup.size() : 0, cfg.batch_size, shuffle_rng);

        double epoch_total = 0.0;
        for (const auto& batch : schedule) {
            NetworkGrads grads = zero_grads(state.params);
            StepRecord rec;
            rec.epoch = epoch;
            rec.step = step_counter;

            for (std::size_t idx : batch.indices) {
                if (!batch.supervised) {
                    const auto& s = unsup[idx];
                    auto [f, cache] = net_forward(state.params, s.x);
                    PhotonData pd{s.photons.I, state.latent_G[idx]};
                    auto [loss, gfield] = unsup_loss_and_grad(f, pd, cfg.scan, cfg.prior);
                    rec.data_term += loss.data_term;
                    rec.prior_term += loss.prior_term;
                    accumulate_grads(grads, net_backward(state.params, cache, gfield));
                } else {
                    const auto& p = sup[idx];
                    auto [f, cache] = net_forward(state.params, p.x);
                    Grid gfield(f.rows(), f.cols());
                    double sq = 0.0;
                    for (std::size_t i = 0; i < f.size(); ++i) {
                        double e = f[i] - p.y[i];
                        sq += e * e;
                        gfield[i] = 2.0 * lambda * e;
                    }
                    rec.sup_term += sq;
                    accumulate_grads(grads, net_backward(state.params, cache, gfield));
                }
            }

            // mean gradient per sample and per ray, so rates transfer across sizes
            scale_grads(grads, 1.0 / (static_cast<double>(batch.indices.size()) * rays));
            adam_step(state.params, grads, state.adam);

            rec.total = rec.data_term + rec.prior_term + lambda * rec.sup_term;
            epoch_total += rec.total;
            log_line(cfg.log,
                     "step epoch=%zu step=%zu mode=%s data=%.17g prior=%.17g sup=%.17g total=%.17g",
                     rec.epoch, rec.step, to_string(cfg.mode).c_str(), rec.data_term,
                     rec.prior_term, rec.sup_term, rec.total);
            state.loss_history.push_back(rec);
            ++step_counter;
        }

        state.epoch_totals.push_back(epoch_total);
        state.epochs_run = epoch + 1;

        if (cfg.checkpoint_every > 0 && !cfg.checkpoint_dir.empty() &&
            (epoch + 1) % cfg.checkpoint_every == 0) {
            char name[64];
            std::snprintf(name, sizeof(name), "/epoch_%04zu.netp", epoch + 1);
            save_checkpoint(cfg.checkpoint_dir + name, state.params, state.adam);
        }

        if (cfg.early_stop_window > 0 && state.epoch_totals.size() > cfg.early_stop_window) {
            double ref = state.epoch_totals[state.epoch_totals.size() - 1 - cfg.early_stop_window];
            double cur = state.epoch_totals.back();
            double rel = std::fabs(cur - ref) / std::max(std::fabs(ref), 1e-300);
            if (rel < cfg.early_stop_rel) {
                state.early_stopped = true;
                log_line(cfg.log, "early_stop epoch=%zu rel_change=%.3g", epoch, rel);
                break;
            }
        }
    }
    return state;
}

}  // namespace

TrainState train_supervised(const std::vector<SupPair>& pairs, const TrainConfig& cfg) {
    TrainConfig c = cfg;
    c.mode = TrainMode::Supervised;
    return train_core(pairs, {}, c);
}

TrainState train_unsupervised(const std::vector<UnsupSample>& samples, const TrainConfig& cfg) {
    TrainConfig c = cfg;
    c.mode = TrainMode::Unsupervised;
    return train_core({}, samples, c);
}

TrainState train_semi(const std::vector<SupPair>& sup_pairs,
                      const std::vector<UnsupSample>& unsup_samples, const TrainConfig& cfg) {
    TrainConfig c = cfg;
    c.mode = TrainMode::Semi;
    return train_core(sup_pairs, unsup_samples, c);
}

Sinogram enhance(const NetworkParams& params, const Sinogram& x, double* seconds) {
    auto t0 = std::chrono::steady_clock::now();
    Sinogram out = net_apply(params, x);
    auto t1 = std::chrono::steady_clock::now();
    if (seconds)
        *seconds = std::chrono::duration_cast<std::chrono::duration<double>>(t1 - t0).count();
    return out;
}

}  // namespace sinomap
