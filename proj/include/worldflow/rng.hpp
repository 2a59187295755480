// Copyright (C) 2026 The worldflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "worldflow/numerics/ndarray.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace worldflow {

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;

inline std::uint64_t fnv1a(std::span<const unsigned char> bytes, std::uint64_t h = kFnvOffset) {
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = kFnvOffset) {
    return fnv1a(std::span(reinterpret_cast<const unsigned char*>(s.data()), s.size()), h);
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of the named substream `stream`, item `index`, under a master seed.
/// Substreams are independent of the order in which they are requested.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stream, std::uint64_t index = 0) {
    return splitmix64(splitmix64(master ^ fnv1a(stream)) + splitmix64(index + 0x632be59bd9b4e019ULL));
}

using Rng = std::mt19937_64;

inline Rng substream(std::uint64_t master, std::string_view stream, std::uint64_t index = 0) {
    return Rng(derive_seed(master, stream, index));
}

template <typename S>
NdArray<S> standard_normal(Shape shape, Rng& rng) {
    NdArray<S> out(std::move(shape));
    std::normal_distribution<S> dist(S(0), S(1));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = dist(rng);
    return out;
}

template <typename S>
NdArray<S> uniform(Shape shape, Rng& rng, S lo = S(-1), S hi = S(1)) {
    NdArray<S> out(std::move(shape));
    std::uniform_real_distribution<S> dist(lo, hi);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = dist(rng);
    return out;
}

}  // namespace worldflow
