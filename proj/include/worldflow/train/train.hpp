// Copyright (C) 2026 The worldflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "worldflow/model/checkpoint.hpp"
#include "worldflow/model/model.hpp"
#include "worldflow/numerics/grad_check.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace worldflow::train {

using model::ChannelGroup;
using model::ChannelLayout;
using model::ModelParams;

enum class Schedule { cca, constant };

struct DropoutProbs {
    double text = 0.1, temporal = 0.1, semantic = 0.1, spatial = 0.1;
};

struct TrainConfig {
    std::uint64_t steps = 2000;
    double lambda_base = 0.2;
    Schedule schedule = Schedule::cca;
    double lr = 1e-3;
    double beta1 = 0.9, beta2 = 0.99;
    double adam_eps = 1e-8;
    double weight_decay = 0.2;
    std::uint64_t warmup = 400;
    std::size_t batch = 4;
    std::uint64_t seed = 42;
    DropoutProbs dropout;
    std::uint64_t checkpoint_every = 500;  // 0 writes only the final checkpoint

    void validate() const;
};

/// lambda_base * (1 + cos(pi * step / T)) / 2. Steps past T clamp to 0 with
/// a warning on stderr.
double cca_weight(std::int64_t step, std::int64_t total, double lambda_base);

/// World-term weight at `step` under the configured schedule.
double lambda_at(const TrainConfig& cfg, std::uint64_t step);

/// z_t = t z1 + (1 - t) z0.
template <typename S>
NdArray<S> flow_interpolate(const NdArray<S>& z0, const NdArray<S>& z1, S t) {
    if (z0.shape() != z1.shape()) throw ShapeError("flow_interpolate", z0.shape(), z1.shape());
    if (!(t >= S(0) && t <= S(1))) throw std::invalid_argument("flow_interpolate: t must lie in [0, 1]");
    return NdArray<S>(z0.shape(), typename NdArray<S>::Storage(t * z1.values() + (S(1) - t) * z0.values()));
}

struct DropMask {
    bool text = false, temporal = false, semantic = false, spatial = false;

    bool group(ChannelGroup g) const {
        return g == ChannelGroup::temporal ? temporal : g == ChannelGroup::semantic ? semantic : g == ChannelGroup::spatial ? spatial : false;
    }
};

/// One training example with its per-step randomness already drawn.
template <typename S>
struct Sample {
    NdArray<S> z0;  // clean joint latent, F x H x W x C_total
    NdArray<S> z1;  // joint Gaussian noise
    S t = 0;
    std::vector<int> prompt;
    DropMask mask;
};

/// Independently per sample: null prompt with prob p_text, and a drop flag
/// for each world group with prob p_k. Draw order is fixed per sample.
template <typename S>
void dropout_conditions(std::vector<Sample<S>>& batch, const DropoutProbs& probs, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& s : batch) {
        const bool text = u(rng) < probs.text;
        s.mask.temporal = u(rng) < probs.temporal;
        s.mask.semantic = u(rng) < probs.semantic;
        s.mask.spatial = u(rng) < probs.spatial;
        s.mask.text = text;
        if (text) s.prompt = {0};
    }
}

struct LossBreakdown {
    double vae = 0, temporal = 0, semantic = 0, spatial = 0;
    double lambda_temp = 0, lambda_sem = 0, lambda_spa = 0;
    double total = 0;

    double recomposed() const { return vae + lambda_temp * temporal + lambda_sem * semantic + lambda_spa * spatial; }
};

template <typename S>
struct LossGraph {
    Var<S> total;
    LossBreakdown breakdown;
};

/// Builds the batch loss on b's graph. Per sample the input is z_t with
/// dropped groups zeroed and the target is z1 - z0 with the same groups
/// zeroed; each L_k is the group-k MSE averaged over the batch.
template <typename S>
LossGraph<S> joint_loss(const model::Bound<S>& b, const std::vector<Sample<S>>& batch, double lambda) {
    if (batch.empty()) throw std::invalid_argument("joint_loss: empty batch");
    Graph<S>& g = *b.graph;
    const ChannelLayout& L = b.layout;
    const std::size_t N = b.config->tokens(), C = L.total();
    std::map<ChannelGroup, std::vector<Var<S>>> terms;
    for (const auto& s : batch) {
        NdArray<S> zt = flow_interpolate(s.z0, s.z1, s.t);
        NdArray<S> target(s.z0.shape(), typename NdArray<S>::Storage(s.z1.values() - s.z0.values()));
        for (ChannelGroup k : model::kWorldGroups) {
            if (L.length(k) && s.mask.group(k)) {
                zt = model::mask_channels(zt, k, L);
                target = model::mask_channels(target, k, L);
            }
        }
        Var<S> v = model::forward(b, g.constant(zt.reshaped({N, C})), s.t, s.prompt);
        Var<S> tv = g.constant(target.reshaped({N, C}));
        for (ChannelGroup k : model::kAllGroups) {
            if (!L.length(k)) continue;
            terms[k].push_back(mse(slice(v, 1, L.offset(k), L.length(k)), slice(tv, 1, L.offset(k), L.length(k))));
        }
    }
    auto batch_mean = [&](ChannelGroup k) -> Var<S> {
        const auto& parts = terms[k];
        if (parts.empty()) return g.constant(NdArray<S>::scalar(S(0)));
        Var<S> acc = parts.front();
        for (std::size_t i = 1; i < parts.size(); ++i) acc = add(acc, parts[i]);
        return scale(acc, S(1) / S(parts.size()));
    };
    g.set_scope("loss");
    Var<S> lv = batch_mean(ChannelGroup::vae), lt = batch_mean(ChannelGroup::temporal);
    Var<S> ls = batch_mean(ChannelGroup::semantic), lp = batch_mean(ChannelGroup::spatial);
    const S lam = S(lambda);
    Var<S> total = add(lv, add(add(scale(lt, lam), scale(ls, lam)), scale(lp, lam)));

    LossBreakdown br;
    br.vae = double(lv.value()[0]);
    br.temporal = double(lt.value()[0]);
    br.semantic = double(ls.value()[0]);
    br.spatial = double(lp.value()[0]);
    br.lambda_temp = br.lambda_sem = br.lambda_spa = double(lam);
    br.total = double(total.value()[0]);
    return {total, br};
}

/// Clean joint latents plus prompts. Every latent has the same grid.
struct Dataset {
    ChannelLayout layout;
    std::vector<ArrayF> latents;
    std::vector<std::vector<int>> prompts;

    std::size_t size() const { return latents.size(); }
    void validate() const;
};

/// Draws the batch for `step` from the data/noise/dropout substreams of the
/// master seed, so any step can be regenerated without replaying earlier ones.
std::vector<Sample<float>> make_batch(const TrainConfig& cfg, const Dataset& data, std::uint64_t step);

struct AdamState {
    std::map<std::string, ArrayF> m, v;
};

struct TrainState {
    ModelParams<float> params;
    AdamState adam;
    std::uint64_t step = 0;  // completed optimizer steps
};

/// Learning rate after linear warmup; step counts from 0.
double learning_rate(const TrainConfig& cfg, std::uint64_t step);

/// One decoupled-weight-decay Adam update; `step` counts from 0.
void adamw_update(TrainState& state, const std::map<std::string, ArrayF>& grads, const TrainConfig& cfg, std::uint64_t step);

struct StepRecord {
    std::uint64_t step = 0;
    LossBreakdown loss;
    double wall_ms = 0;
};

/// One JSON object per line: step, L_vae, L_temporal, L_semantic, L_spatial,
/// lambda_temp, lambda_sem, lambda_spa, L_total, wall_ms.
std::string format_record(const StepRecord& r);

struct TrainOutputs {
    std::filesystem::path dir;  // empty: keep everything in memory
    std::uint64_t fingerprint = 0;
    bool quiet = true;
};

model::Checkpoint to_checkpoint(const TrainState& s, std::uint64_t fingerprint);
TrainState from_checkpoint(const model::Checkpoint& ck);

/// Runs optimizer steps state.step .. cfg.steps-1. With an output directory
/// it appends to metrics.jsonl (dropping records at or past the resume step)
/// and writes checkpoints step_<n>.dwck plus final.dwck.
TrainState train_loop(const TrainConfig& cfg, const Dataset& data, TrainState state, const TrainOutputs& out,
                      std::vector<StepRecord>* history = nullptr);

struct LossGradCheck {
    GradCheckResult check;
    std::string worst_param;
};

/// Central differences of the joint loss over every parameter of a tiny
/// 64-bit model with a masked sample in the batch.
LossGradCheck joint_loss_grad_check(std::uint64_t seed);

}  // namespace worldflow::train
