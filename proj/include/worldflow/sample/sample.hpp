// Copyright (C) 2026 The worldflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "worldflow/codec/codec.hpp"
#include "worldflow/model/model.hpp"

#include <array>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace worldflow::sample {

using model::ChannelGroup;
using model::ChannelLayout;
using model::JointParts;
using model::ModelParams;

struct GuidanceConfig {
    double w_txt = 5.0;
    double w_temp = 1.0, w_sem = 1.0, w_spa = 1.0;
    std::size_t steps = 20;
    std::uint64_t seed = 42;

    double weight(ChannelGroup g) const {
        return g == ChannelGroup::temporal ? w_temp : g == ChannelGroup::semantic ? w_sem : g == ChannelGroup::spatial ? w_spa : 0.0;
    }

    void validate() const {
        if (steps == 0) throw std::invalid_argument("guidance: steps must be at least 1");
        for (double w : {w_txt, w_temp, w_sem, w_spa}) {
            if (!std::isfinite(w)) throw std::invalid_argument("guidance: weights must be finite");
        }
    }
};

/// Branch order: conditional, text-null, masked temporal, semantic, spatial.
inline constexpr std::array<const char*, 5> kBranchNames{"conditional", "text-null", "mask-temporal", "mask-semantic", "mask-spatial"};

/// Coefficients applied to the five branches; they sum to 1.
inline std::array<double, 5> guidance_coefficients(const GuidanceConfig& g) {
    return {1.0 + g.w_txt + g.w_temp + g.w_sem + g.w_spa, -g.w_txt, -g.w_temp, -g.w_sem, -g.w_spa};
}

/// Linear combination of branch predictions. A branch with coefficient 0
/// may be passed empty.
template <typename S>
NdArray<S> combine_guidance(const std::array<const NdArray<S>*, 5>& branches, const GuidanceConfig& g) {
    const auto coef = guidance_coefficients(g);
    if (!branches[0]) throw std::invalid_argument("combine_guidance: conditional branch is required");
    NdArray<S> out(branches[0]->shape(), typename NdArray<S>::Storage(branches[0]->values() * S(coef[0])));
    for (std::size_t i = 1; i < 5; ++i) {
        if (coef[i] == 0.0) continue;
        if (!branches[i]) throw std::invalid_argument(std::string("combine_guidance: missing ") + kBranchNames[i] + " branch");
        if (branches[i]->shape() != out.shape()) throw ShapeError("combine_guidance", out.shape(), branches[i]->shape());
        out.values() += S(coef[i]) * branches[i]->values();
    }
    return out;
}

/// z_pred from up to five forward passes. Branches with zero weight are
/// skipped; world branches need their group present in the layout.
template <typename S>
NdArray<S> guided_velocity(const ModelParams<S>& params, const NdArray<S>& z, S t, const std::vector<int>& prompt,
                           const GuidanceConfig& g) {
    const ChannelLayout& L = params.layout;
    std::array<NdArray<S>, 5> out;
    std::array<const NdArray<S>*, 5> ptr{};
    auto run = [&](std::size_t i, const NdArray<S>& zin, const std::vector<int>& y) {
        try {
            out[i] = model::predict(params, zin, t, y);
        } catch (const NumericFault& e) {
            throw NumericFault(e.op(), std::string(kBranchNames[i]) + " branch, " + e.scope());
        }
        if (!out[i].all_finite()) throw NumericFault("forward", std::string(kBranchNames[i]) + " branch");
        ptr[i] = &out[i];
    };
    run(0, z, prompt);
    if (g.w_txt != 0.0) run(1, z, {0});
    for (std::size_t k = 0; k < 3; ++k) {
        const ChannelGroup grp = model::kWorldGroups[k];
        if (g.weight(grp) == 0.0) continue;
        if (!L.length(grp)) throw std::invalid_argument(std::string("guided_velocity: layout has no ") + model::group_name(grp) + " channels");
        run(2 + k, model::mask_channels(z, grp, L), prompt);
    }
    return combine_guidance<S>(ptr, g);
}

template <typename S>
using VelocityField = std::function<NdArray<S>(const NdArray<S>& z, S t)>;

/// Euler steps from t=1 to t=0 on a uniform grid: z <- z - v(z, t_i)/N with
/// t_i = 1 - i/N. Optional per-step velocity RMS goes to `norms`.
template <typename S>
NdArray<S> euler_integrate(const VelocityField<S>& v, NdArray<S> z, std::size_t steps, std::vector<double>* norms = nullptr) {
    if (steps == 0) throw std::invalid_argument("euler_integrate: steps must be at least 1");
    const S dt = S(1) / S(steps);
    for (std::size_t i = 0; i < steps; ++i) {
        const S t = S(1) - S(i) / S(steps);
        const NdArray<S> vel = v(z, t);
        if (vel.shape() != z.shape()) throw ShapeError("euler_integrate", z.shape(), vel.shape(), "velocity shape");
        z.values() -= dt * vel.values();
        if (!z.all_finite()) throw NumericFault("euler_integrate", "step " + std::to_string(i));
        if (norms) norms->push_back(std::sqrt(double(vel.values().square().sum()) / double(std::max<std::size_t>(vel.size(), 1))));
    }
    return z;
}

struct SampleResult {
    ArrayF video;                 // F x H x W x 3, clamped to [0, 1]
    JointParts<float> latent;     // predicted clean joint latent per group
    std::vector<double> velocity_norms;
};

/// Joint noise for (seed, index): the "sampling" substream.
ArrayF draw_noise(const ModelParams<float>& params, std::uint64_t seed, std::uint64_t index);

/// Integrates guided velocities from seeded joint noise, splits the result
/// and decodes the vae slice.
SampleResult sample(const ModelParams<float>& params, const std::vector<int>& prompt, const GuidanceConfig& g,
                    const codec::CodecConfig& codec, std::uint64_t index = 0);

/// Binary 8-bit PPM of one H x W x 3 frame in [0, 1].
void write_ppm(const std::filesystem::path& path, const ArrayF& frame);
ArrayF read_ppm(const std::filesystem::path& path);

/// frame_###.ppm, latent.dwnd (joint), and flow_###.ppm rendering the
/// decoded temporal channels when the layout has them. `temporal_codec`
/// replaces the predicted temporal channels for rendering, e.g. after
/// undoing feature standardization.
void save_sample(const std::filesystem::path& dir, const SampleResult& r, const codec::CodecConfig& codec,
                 const ArrayF* temporal_codec = nullptr);

}  // namespace worldflow::sample
