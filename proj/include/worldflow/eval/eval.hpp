// Copyright (C) 2026 The worldflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "worldflow/codec/codec.hpp"
#include "worldflow/model/model.hpp"
#include "worldflow/worldfeat/flow_rgb.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace worldflow::eval {

/// Nearest palette color of an RGB pixel, -1 when the background is nearest.
int palette_class(const float* rgb);

enum class MatchSupport {
    block,    // fixed block x block tiles
    segment,  // all pixels of frame t sharing a palette class; background static
};

struct BlockMatchParams {
    MatchSupport support = MatchSupport::segment;
    std::size_t block = 4;
    int radius = 4;         // exhaustive search over [-radius, radius]^2
    bool subpixel = true;   // equiangular fit of the SAD minimum per axis
};

/// (F-1) x H x W x 2 displacement field from exhaustive SAD search of each
/// support region of frame t inside frame t+1. Block support skips
/// candidates leaving the frame; segment support replicates the border.
/// Equal costs resolve to the shortest displacement, then scan order.
ArrayF block_matching_flow(const ArrayF& video, const BlockMatchParams& params = {});

/// 1 - mean |decoded predicted flow colors - colors of block-matched flow|
/// over the first F-1 frames, both sides clamped to [0, 1].
double flow_consistency(const ArrayF& video, const ArrayF& predicted_temporal, const codec::CodecConfig& codec,
                        const worldfeat::FlowRgbParams& flow = {}, const BlockMatchParams& params = {});

struct SubjectScore {
    double score = 0;
    bool no_segments = false;
};

/// Per-pixel nearest palette color (background included) defines one segment
/// per color. Segments of consecutive frames are paired greedily by IoU
/// after aligning their centroids; the score averages matched IoUs, with
/// unmatched segments counting as 0.
SubjectScore subject_consistency_proxy(const ArrayF& video);

struct EquivalenceReport {
    double max_deviation = 0;  // vae channels, joint vs base
    double world_max = 0;      // largest |world-channel output|
    std::size_t trials = 0;
    bool vacuous = false;
};

/// Random joint inputs, timesteps and prompts drawn from `seed`.
EquivalenceReport base_equivalence_report(const model::ModelParams<float>& expanded, const model::ModelParams<float>& base,
                                          std::size_t trials, std::uint64_t seed);

struct MetricReport {
    std::string name;
    std::vector<double> values;
    double mean = 0, std = 0;
    std::uint64_t fingerprint = 0;

    static MetricReport from(std::string name, std::vector<double> values, std::uint64_t fingerprint);
    std::string json() const;
};

std::string summary_table(const std::vector<MetricReport>& reports);

}  // namespace worldflow::eval
