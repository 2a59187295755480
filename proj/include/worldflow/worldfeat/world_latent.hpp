// Copyright (C) 2026 The worldflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "worldflow/codec/codec.hpp"
#include "worldflow/numerics/ndarray.hpp"

namespace worldflow::worldfeat {

struct GroupSpan {
    std::size_t offset = 0;
    std::size_t length = 0;

    friend bool operator==(const GroupSpan&, const GroupSpan&) = default;
};

/// Channel concatenation [temporal, semantic, spatial] over a shared grid.
struct WorldLatent {
    ArrayF data;  // F_lat x H_lat x W_lat x C_world
    GroupSpan temporal;
    GroupSpan semantic;
    GroupSpan spatial;

    std::size_t channels() const { return temporal.length + semantic.length + spatial.length; }
    GroupSpan span(codec::ChannelGroup group) const;
    /// Copy of one group's channels.
    ArrayF group(codec::ChannelGroup group) const;
};

WorldLatent assemble_world_latent(const ArrayF& z_temporal, const ArrayF& z_semantic, const ArrayF& z_spatial);

}  // namespace worldflow::worldfeat
