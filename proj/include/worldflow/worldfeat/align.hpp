// Copyright (C) 2026 The worldflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "worldflow/numerics/ndarray.hpp"

namespace worldflow::worldfeat {

struct GridExtent {
    std::size_t frames = 0;
    std::size_t height = 0;
    std::size_t width = 0;

    std::size_t tokens() const { return frames * height * width; }
    friend bool operator==(const GridExtent&, const GridExtent&) = default;
};

/// Bilinear spatial resampling (half-pixel centers, edge clamped) to the
/// target height/width, then non-overlapping temporal average pooling.
/// F x H x W x D -> F_lat x H_lat x W_lat x D.
ArrayF align(const ArrayF& feature, const GridExtent& target);

}  // namespace worldflow::worldfeat
