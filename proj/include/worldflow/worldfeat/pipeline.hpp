// Copyright (C) 2026 The worldflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "worldflow/codec/codec.hpp"
#include "worldflow/worldfeat/align.hpp"
#include "worldflow/worldfeat/flow_rgb.hpp"
#include "worldflow/worldfeat/stats.hpp"
#include "worldflow/worldfeat/world_latent.hpp"
#include "worldflow/worldsim/world.hpp"

#include <filesystem>
#include <vector>

namespace worldflow::worldfeat {

struct FeatureConfig {
    codec::CodecConfig codec;
    FlowRgbParams flow;
    std::size_t k_semantic = 8;
    std::size_t k_spatial = 8;
    double eps = Standardizer::kDefaultEps;
};

/// Frozen standardizers for all three sources and PCA bases for the
/// semantic and spatial ones.
struct FittedFeatures {
    Standardizer temporal_std;
    Standardizer semantic_std;
    PcaModel semantic_pca;
    Standardizer spatial_std;
    PcaModel spatial_pca;
};

GridExtent latent_extent(const ArrayF& video, const codec::CodecConfig& codec);

/// Flow colors pushed through the codec: F_lat x H_lat x W_lat x C_vae.
ArrayF temporal_latent(const ArrayF& flow, const FeatureConfig& cfg);

struct AlignedRaw {
    ArrayF temporal;  // temporal_latent of the episode flow
    ArrayF semantic;  // F_lat x H_lat x W_lat x D_sem_raw
    ArrayF spatial;   // F_lat x H_lat x W_lat x D_spa_raw
};

AlignedRaw aligned_raw_features(const worldsim::Episode& ep, const FeatureConfig& cfg);

/// Fits standardization then PCA per source on the aligned training corpus.
FittedFeatures fit_features(const std::vector<AlignedRaw>& corpus, const FeatureConfig& cfg);

WorldLatent build_world_latent(const worldsim::Episode& ep, const FittedFeatures& fitted, const FeatureConfig& cfg);
WorldLatent build_world_latent(const AlignedRaw& raw, const FittedFeatures& fitted);

/// Standardized temporal channels back to codec space, ready to decode.
ArrayF temporal_to_codec(const ArrayF& z_temporal, const FittedFeatures& fitted);

void save_fitted_features(const std::filesystem::path& dir, const FittedFeatures& fitted);
/// Throws std::runtime_error naming the missing file.
FittedFeatures load_fitted_features(const std::filesystem::path& dir);

}  // namespace worldflow::worldfeat
