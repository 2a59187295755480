// Copyright (C) 2026 The worldflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "worldflow/numerics/ndarray.hpp"

#include <string>

// Exactly invertible video latent codec: space-to-depth patching with
// optional temporal grouping. Channel index inside a latent cell is
// ((dt * p + dy) * p + dx) * 3 + rgb.

namespace worldflow::codec {

enum class ChannelGroup { vae, temporal, semantic, spatial, joint };

struct CodecConfig {
    std::size_t patch = 4;           // spatial patch p
    std::size_t temporal_patch = 1;  // temporal group q

    std::size_t channels() const { return 3 * patch * patch * temporal_patch; }
};

/// F_lat x H_lat x W_lat x C grid with a tag naming what the channels hold.
template <typename S>
struct LatentGrid {
    NdArray<S> data;
    ChannelGroup group = ChannelGroup::vae;

    std::size_t frames() const { return data.dim(0); }
    std::size_t height() const { return data.dim(1); }
    std::size_t width() const { return data.dim(2); }
    std::size_t channels() const { return data.dim(3); }
};

template <typename S>
LatentGrid<S> encode(const NdArray<S>& video, const CodecConfig& cfg, ChannelGroup group = ChannelGroup::vae) {
    if (video.rank() != 4 || video.dim(3) != 3) throw ShapeError("encode", video.shape(), "expected F x H x W x 3");
    const std::size_t p = cfg.patch, q = cfg.temporal_patch;
    if (p == 0 || q == 0) throw std::invalid_argument("encode: patch sizes must be positive");
    const char* axis_names[] = {"frames", "height", "width"};
    const std::size_t divisors[] = {q, p, p};
    for (int a = 0; a < 3; ++a) {
        if (video.dim(std::size_t(a)) % divisors[a] != 0) {
            throw std::invalid_argument("encode: " + std::string(axis_names[a]) + " extent " +
                                        std::to_string(video.dim(std::size_t(a))) + " is not divisible by " +
                                        std::to_string(divisors[a]));
        }
    }
    const std::size_t F = video.dim(0), H = video.dim(1), W = video.dim(2);
    const std::size_t Fl = F / q, Hl = H / p, Wl = W / p, C = cfg.channels();
    NdArray<S> out({Fl, Hl, Wl, C});
    for (std::size_t fl = 0; fl < Fl; ++fl)
        for (std::size_t hl = 0; hl < Hl; ++hl)
            for (std::size_t wl = 0; wl < Wl; ++wl) {
                S* cell = out.data() + ((fl * Hl + hl) * Wl + wl) * C;
                for (std::size_t dt = 0; dt < q; ++dt)
                    for (std::size_t dy = 0; dy < p; ++dy)
                        for (std::size_t dx = 0; dx < p; ++dx) {
                            const S* px = video.data() + (((fl * q + dt) * H + hl * p + dy) * W + wl * p + dx) * 3;
                            S* dst = cell + ((dt * p + dy) * p + dx) * 3;
                            dst[0] = px[0];
                            dst[1] = px[1];
                            dst[2] = px[2];
                        }
            }
    return {std::move(out), group};
}

template <typename S>
NdArray<S> decode(const NdArray<S>& latent, const CodecConfig& cfg) {
    if (latent.rank() != 4) throw ShapeError("decode", latent.shape(), "expected F_lat x H_lat x W_lat x C");
    const std::size_t p = cfg.patch, q = cfg.temporal_patch, C = cfg.channels();
    if (latent.dim(3) != C) {
        throw std::invalid_argument("decode: latent has " + std::to_string(latent.dim(3)) + " channels, codec expects " +
                                    std::to_string(C));
    }
    const std::size_t Fl = latent.dim(0), Hl = latent.dim(1), Wl = latent.dim(2);
    const std::size_t F = Fl * q, H = Hl * p, W = Wl * p;
    NdArray<S> video({F, H, W, 3});
    for (std::size_t fl = 0; fl < Fl; ++fl)
        for (std::size_t hl = 0; hl < Hl; ++hl)
            for (std::size_t wl = 0; wl < Wl; ++wl) {
                const S* cell = latent.data() + ((fl * Hl + hl) * Wl + wl) * C;
                for (std::size_t dt = 0; dt < q; ++dt)
                    for (std::size_t dy = 0; dy < p; ++dy)
                        for (std::size_t dx = 0; dx < p; ++dx) {
                            S* px = video.data() + (((fl * q + dt) * H + hl * p + dy) * W + wl * p + dx) * 3;
                            const S* src = cell + ((dt * p + dy) * p + dx) * 3;
                            px[0] = src[0];
                            px[1] = src[1];
                            px[2] = src[2];
                        }
            }
    return video;
}

template <typename S>
NdArray<S> decode(const LatentGrid<S>& latent, const CodecConfig& cfg) {
    return decode(latent.data, cfg);
}

}  // namespace worldflow::codec
