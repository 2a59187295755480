// Copyright (C) 2026 The worldflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "worldflow/worldfeat/pipeline.hpp"

#include <stdexcept>

namespace worldflow::worldfeat {

GroupSpan WorldLatent::span(codec::ChannelGroup group) const {
    switch (group) {
        case codec::ChannelGroup::temporal: return temporal;
        case codec::ChannelGroup::semantic: return semantic;
        case codec::ChannelGroup::spatial: return spatial;
        default: throw std::invalid_argument("WorldLatent: only temporal, semantic and spatial groups exist");
    }
}

ArrayF WorldLatent::group(codec::ChannelGroup g) const {
    const GroupSpan s = span(g);
    return slice(data, 3, s.offset, s.length);
}

WorldLatent assemble_world_latent(const ArrayF& z_temporal, const ArrayF& z_semantic, const ArrayF& z_spatial) {
    for (const ArrayF* z : {&z_temporal, &z_semantic, &z_spatial}) {
        if (z->rank() != 4) throw ShapeError("assemble_world_latent", z->shape(), "expected F_lat x H_lat x W_lat x C");
    }
    auto grid = [](const ArrayF& a) { return Shape(a.shape().begin(), a.shape().end() - 1); };
    if (grid(z_temporal) != grid(z_semantic)) throw ShapeError("assemble_world_latent", z_temporal.shape(), z_semantic.shape(), "grid mismatch");
    if (grid(z_temporal) != grid(z_spatial)) throw ShapeError("assemble_world_latent", z_temporal.shape(), z_spatial.shape(), "grid mismatch");
    WorldLatent w;
    w.data = concat({z_temporal, z_semantic, z_spatial}, 3);
    w.temporal = {0, z_temporal.dim(3)};
    w.semantic = {w.temporal.length, z_semantic.dim(3)};
    w.spatial = {w.semantic.offset + w.semantic.length, z_spatial.dim(3)};
    return w;
}

GridExtent latent_extent(const ArrayF& video, const codec::CodecConfig& codec) {
    if (video.rank() != 4) throw ShapeError("latent_extent", video.shape(), "expected F x H x W x C");
    return {video.dim(0) / codec.temporal_patch, video.dim(1) / codec.patch, video.dim(2) / codec.patch};
}

ArrayF temporal_latent(const ArrayF& flow, const FeatureConfig& cfg) {
    return codec::encode(flow_rgb_video(flow, cfg.flow), cfg.codec, codec::ChannelGroup::temporal).data;
}

AlignedRaw aligned_raw_features(const worldsim::Episode& ep, const FeatureConfig& cfg) {
    const GridExtent grid = latent_extent(ep.video, cfg.codec);
    return {temporal_latent(ep.flow, cfg), align(ep.semantic, grid), align(ep.spatial, grid)};
}

FittedFeatures fit_features(const std::vector<AlignedRaw>& corpus, const FeatureConfig& cfg) {
    if (corpus.empty()) throw std::invalid_argument("fit_features: empty corpus");
    std::vector<ArrayF> tmp, sem, spa;
    for (const auto& r : corpus) {
        tmp.push_back(r.temporal);
        sem.push_back(r.semantic);
        spa.push_back(r.spatial);
    }
    const std::size_t d_sem = sem.front().shape().back(), d_spa = spa.front().shape().back();
    if (cfg.k_semantic > d_sem) {
        throw std::invalid_argument("k_semantic=" + std::to_string(cfg.k_semantic) + " exceeds the semantic raw dimension " +
                                    std::to_string(d_sem));
    }
    if (cfg.k_spatial > d_spa) {
        throw std::invalid_argument("k_spatial=" + std::to_string(cfg.k_spatial) + " exceeds the spatial raw dimension " +
                                    std::to_string(d_spa));
    }
    FittedFeatures f;
    f.temporal_std = Standardizer::fit(tmp, cfg.eps);
    f.semantic_std = Standardizer::fit(sem, cfg.eps);
    f.spatial_std = Standardizer::fit(spa, cfg.eps);
    for (auto& a : sem) a = f.semantic_std.apply(a);
    for (auto& a : spa) a = f.spatial_std.apply(a);
    f.semantic_pca = PcaModel::fit(sem, cfg.k_semantic);
    f.spatial_pca = PcaModel::fit(spa, cfg.k_spatial);
    return f;
}

WorldLatent build_world_latent(const AlignedRaw& raw, const FittedFeatures& fitted) {
    ArrayF z_temporal = fitted.temporal_std.apply(raw.temporal);
    ArrayF z_semantic = fitted.semantic_pca.apply(fitted.semantic_std.apply(raw.semantic));
    ArrayF z_spatial = fitted.spatial_pca.apply(fitted.spatial_std.apply(raw.spatial));
    return assemble_world_latent(z_temporal, z_semantic, z_spatial);
}

WorldLatent build_world_latent(const worldsim::Episode& ep, const FittedFeatures& fitted, const FeatureConfig& cfg) {
    return build_world_latent(aligned_raw_features(ep, cfg), fitted);
}

ArrayF temporal_to_codec(const ArrayF& z_temporal, const FittedFeatures& fitted) { return fitted.temporal_std.invert(z_temporal); }

void save_fitted_features(const std::filesystem::path& dir, const FittedFeatures& fitted) {
    std::filesystem::create_directories(dir);
    save_fitted(dir / "temporal.std", "temporal", fitted.temporal_std);
    save_fitted(dir / "semantic.std", "semantic", fitted.semantic_std);
    save_fitted(dir / "semantic.pca", "semantic", fitted.semantic_pca);
    save_fitted(dir / "spatial.std", "spatial", fitted.spatial_std);
    save_fitted(dir / "spatial.pca", "spatial", fitted.spatial_pca);
}

FittedFeatures load_fitted_features(const std::filesystem::path& dir) {
    FittedFeatures f;
    f.temporal_std = load_standardizer(dir / "temporal.std");
    f.semantic_std = load_standardizer(dir / "semantic.std");
    f.semantic_pca = load_pca(dir / "semantic.pca");
    f.spatial_std = load_standardizer(dir / "spatial.std");
    f.spatial_pca = load_pca(dir / "spatial.pca");
    return f;
}

}  // namespace worldflow::worldfeat
