// Copyright (C) 2026 The worldflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "worldflow/codec/codec.hpp"
#include "worldflow/numerics/ndarray.hpp"

#include <array>
#include <stdexcept>
#include <string>

namespace worldflow::model {

using codec::ChannelGroup;

/// Channel counts of the joint state, ordered [vae, temporal, semantic, spatial].
struct ChannelLayout {
    std::size_t vae = 48;
    std::size_t temporal = 48;
    std::size_t semantic = 8;
    std::size_t spatial = 8;

    static ChannelLayout desk() { return {48, 48, 8, 8}; }
    static ChannelLayout reference() { return {16, 16, 8, 8}; }
    static ChannelLayout video_only(std::size_t vae) { return {vae, 0, 0, 0}; }

    std::size_t world() const { return temporal + semantic + spatial; }
    std::size_t total() const { return vae + world(); }
    bool has_world() const { return world() > 0; }

    std::size_t offset(ChannelGroup g) const {
        switch (g) {
            case ChannelGroup::vae: return 0;
            case ChannelGroup::temporal: return vae;
            case ChannelGroup::semantic: return vae + temporal;
            case ChannelGroup::spatial: return vae + temporal + semantic;
            default: throw std::invalid_argument("ChannelLayout: no offset for the joint group");
        }
    }
    std::size_t length(ChannelGroup g) const {
        switch (g) {
            case ChannelGroup::vae: return vae;
            case ChannelGroup::temporal: return temporal;
            case ChannelGroup::semantic: return semantic;
            case ChannelGroup::spatial: return spatial;
            default: return total();
        }
    }

    void validate() const {
        if (vae == 0) throw std::invalid_argument("ChannelLayout: C_vae must be positive");
    }

    bool operator==(const ChannelLayout&) const = default;
};

inline constexpr std::array<ChannelGroup, 3> kWorldGroups{ChannelGroup::temporal, ChannelGroup::semantic, ChannelGroup::spatial};
inline constexpr std::array<ChannelGroup, 4> kAllGroups{ChannelGroup::vae, ChannelGroup::temporal, ChannelGroup::semantic,
                                                        ChannelGroup::spatial};

inline const char* group_name(ChannelGroup g) {
    switch (g) {
        case ChannelGroup::vae: return "vae";
        case ChannelGroup::temporal: return "temporal";
        case ChannelGroup::semantic: return "semantic";
        case ChannelGroup::spatial: return "spatial";
        default: return "joint";
    }
}

inline std::string layout_str(const ChannelLayout& l) {
    return "(" + std::to_string(l.vae) + "," + std::to_string(l.temporal) + "," + std::to_string(l.semantic) + "," +
           std::to_string(l.spatial) + ")";
}

template <typename S>
struct JointParts {
    NdArray<S> vae, temporal, semantic, spatial;

    const NdArray<S>& operator[](ChannelGroup g) const {
        switch (g) {
            case ChannelGroup::vae: return vae;
            case ChannelGroup::temporal: return temporal;
            case ChannelGroup::semantic: return semantic;
            case ChannelGroup::spatial: return spatial;
            default: throw std::invalid_argument("JointParts: joint is not a part");
        }
    }
};

/// Contiguous per-group slices of the last axis.
template <typename S>
JointParts<S> split(const NdArray<S>& v, const ChannelLayout& layout) {
    if (v.rank() == 0 || v.shape().back() != layout.total()) {
        throw ShapeError("split", v.shape(), Shape{layout.total()}, "last axis must equal C_total of layout " + layout_str(layout));
    }
    const std::size_t axis = v.rank() - 1;
    auto part = [&](ChannelGroup g) { return slice(v, axis, layout.offset(g), layout.length(g)); };
    return {part(ChannelGroup::vae), part(ChannelGroup::temporal), part(ChannelGroup::semantic), part(ChannelGroup::spatial)};
}

template <typename S>
NdArray<S> join(const JointParts<S>& p) {
    return concat({p.vae, p.temporal, p.semantic, p.spatial}, p.vae.rank() - 1);
}

/// Copy of z with the channels of group g set to zero.
template <typename S>
NdArray<S> mask_channels(const NdArray<S>& z, ChannelGroup g, const ChannelLayout& layout) {
    if (g != ChannelGroup::temporal && g != ChannelGroup::semantic && g != ChannelGroup::spatial) {
        throw std::invalid_argument(std::string("mask_channels: cannot mask group '") + group_name(g) + "'");
    }
    if (z.rank() == 0 || z.shape().back() != layout.total()) {
        throw ShapeError("mask_channels", z.shape(), Shape{layout.total()}, "last axis must equal C_total");
    }
    NdArray<S> out = z;
    const std::size_t c = layout.total(), off = layout.offset(g), len = layout.length(g);
    for (std::size_t row = 0; row < z.size() / c; ++row) {
        std::fill_n(out.data() + row * c + off, len, S(0));
    }
    return out;
}

}  // namespace worldflow::model
