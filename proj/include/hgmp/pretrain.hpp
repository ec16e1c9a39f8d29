#pragma once

// Graph-level contrastive pre-training.
//
// A batch of N graphs yields 2N views laid out as [g0.v1, g0.v2, g1.v1, ...];
// views 2i and 2i+1 form the positive pair. Every view serves as an anchor:
//
//   l_a = -log( exp(cos(z_a, z_pos(a)) / T) / sum_{b != a} exp(cos(z_a, z_b) / T) )
//   L   = (1 / 2N) * sum_a l_a

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "hgmp/augment.hpp"
#include "hgmp/encoder.hpp"
#include "hgmp/optim.hpp"
#include "hgmp/taskbuilder.hpp"

namespace hgmp {

struct ContrastiveResult {
    double loss = 0.0;
    std::vector<RowVector> grad;  ///< dL/dz per latent
};

inline ContrastiveResult contrastive_loss_and_grad(std::span<const RowVector> latents, double temperature,
                                                   bool want_grad = true) {
    if (!(temperature > 0.0)) throw DomainError("temperature must be positive");
    const std::size_t m = latents.size();
    if (m == 0 || m % 2 != 0) throw DomainError("contrastive loss needs 2N latents");
    std::vector<RowVector> unit(m);
    std::vector<double> norms(m);
    for (std::size_t a = 0; a < m; ++a) {
        norms[a] = latents[a].norm();
        if (!(norms[a] > 0.0) || !std::isfinite(norms[a]))
            throw DomainError("contrastive loss: zero-norm or non-finite latent at index " + std::to_string(a));
        unit[a] = latents[a] / norms[a];
    }
    Matrix sim(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = 0; b < m; ++b)
            sim(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = unit[a].dot(unit[b]);

    const double scale = 1.0 / static_cast<double>(m);
    ContrastiveResult out;
    Matrix coef = Matrix::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));  // dL/dsim(a,b)
    std::vector<double> logits(m);
    for (std::size_t a = 0; a < m; ++a) {
        const std::size_t pos = a ^ 1U;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t b = 0; b < m; ++b) {
            if (b == a) continue;
            logits[b] = sim(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) / temperature;
            mx = std::max(mx, logits[b]);
        }
        double sum = 0.0;
        for (std::size_t b = 0; b < m; ++b)
            if (b != a) sum += std::exp(logits[b] - mx);
        const double lse = mx + std::log(sum);
        out.loss += scale * (lse - logits[pos]);
        if (!want_grad) continue;
        for (std::size_t b = 0; b < m; ++b) {
            if (b == a) continue;
            const double p = std::exp(logits[b] - lse);
            coef(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) +=
                scale * (p - (b == pos ? 1.0 : 0.0)) / temperature;
        }
    }
    if (!want_grad) return out;
    out.grad.resize(m);
    for (std::size_t a = 0; a < m; ++a) {
        RowVector du = RowVector::Zero(latents[a].size());
        for (std::size_t b = 0; b < m; ++b) {
            if (b == a) continue;
            du += (coef(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) +
                   coef(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a))) *
                  unit[b];
        }
        // through u = z / |z|
        out.grad[a] = (du - du.dot(unit[a]) * unit[a]) / norms[a];
    }
    return out;
}

inline double contrastive_loss(std::span<const RowVector> latents, double temperature) {
    return contrastive_loss_and_grad(latents, temperature, false).loss;
}

struct PretrainConfig {
    double temperature = 0.5;
    std::size_t batch_size = 32;
    std::size_t epochs = 10;
    OptimizerConfig optimizer{};
    AugmentConfig augment{};
    std::uint64_t seed = 0;
};

struct PretrainResult {
    EncoderParams encoder;             ///< frozen
    std::vector<double> epoch_losses;  ///< mean batch loss per epoch
};

/// Loss and parameter gradients for one batch of graphs. Views are seeded
/// from `view_seeds[i]`. Pairs with a zero-norm latent are left out.
inline double contrastive_batch(std::span<const HetGraph* const> batch, std::span<const std::uint64_t> view_seeds,
                                const EncoderParams& enc, const PretrainConfig& cfg, EncoderParams* grad) {
    std::vector<EncoderTrace> traces;
    std::vector<HeadTrace> heads;
    std::vector<RowVector> latents;
    traces.reserve(2 * batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        AugmentConfig acfg = cfg.augment;
        acfg.seed = view_seeds[i];
        auto [v1, v2] = make_views(*batch[i], acfg);
        auto t1 = encoder_forward(v1.graph, enc), t2 = encoder_forward(v2.graph, enc);
        auto h1 = head_forward(t1.z, enc), h2 = head_forward(t2.z, enc);
        // a view whose latent collapses to zero has no direction; drop the pair
        if (!(h1.out.norm() > 0.0) || !(h2.out.norm() > 0.0)) continue;
        latents.push_back(h1.out);
        latents.push_back(h2.out);
        traces.push_back(std::move(t1));
        traces.push_back(std::move(t2));
        heads.push_back(std::move(h1));
        heads.push_back(std::move(h2));
    }
    if (latents.empty()) return 0.0;
    auto res = contrastive_loss_and_grad(latents, cfg.temperature, grad != nullptr);
    if (grad) {
        for (std::size_t k = 0; k < latents.size(); ++k) {
            const RowVector dz = head_backward(heads[k], enc, res.grad[k], grad);
            encoder_backward(traces[k], enc, dz, grad, nullptr);
        }
    }
    return res.loss;
}

/// Trains encoder and projection head on the corpus and returns them frozen.
inline PretrainResult pretrain(std::span<const HetGraph* const> corpus, EncoderParams encoder,
                               const PretrainConfig& cfg) {
    if (corpus.empty()) throw DomainError("pretrain: empty corpus");
    if (encoder.frozen) throw DomainError("pretrain: encoder is frozen");
    if (cfg.batch_size < 1) throw DomainError("pretrain: batch size must be >= 1");
    if (!(cfg.temperature > 0.0)) throw DomainError("pretrain: temperature must be positive");

    PretrainResult result;
    Optimizer opt(cfg.optimizer);
    std::vector<Matrix*> params;
    for_each_param(encoder, [&](const std::string&, Matrix& m) { params.push_back(&m); });

    std::vector<std::size_t> order(corpus.size());
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng = make_rng(derive_seed(cfg.seed, {epoch, 0}));
        shuffle_in_place(order, rng);
        double total = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            std::vector<const HetGraph*> batch;
            std::vector<std::uint64_t> seeds;
            for (std::size_t i = start; i < end; ++i) {
                batch.push_back(corpus[order[i]]);
                seeds.push_back(derive_seed(cfg.seed, {epoch, 1, i}));
            }
            EncoderParams grad = zeros_like(encoder);
            total += contrastive_batch(batch, seeds, encoder, cfg, &grad);
            ++batches;
            std::vector<const Matrix*> grads;
            for_each_param(grad, [&](const std::string&, const Matrix& m) { grads.push_back(&m); });
            opt.step(params, grads);
        }
        result.epoch_losses.push_back(total / static_cast<double>(batches));
    }
    result.encoder = freeze(std::move(encoder));
    return result;
}

inline PretrainResult pretrain(std::span<const InducedSubgraph> corpus, EncoderParams encoder,
                               const PretrainConfig& cfg) {
    std::vector<const HetGraph*> graphs;
    graphs.reserve(corpus.size());
    for (const auto& s : corpus) graphs.push_back(&s.graph);
    return pretrain(std::span<const HetGraph* const>(graphs), std::move(encoder), cfg);
}

}  // namespace hgmp
