// Copyright (C) 2026 The worldflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "worldflow/numerics/grad_check.hpp"
#include "worldflow/numerics/ops.hpp"
#include "worldflow/rng.hpp"

#include <string>
#include <vector>

namespace worldflow {

inline constexpr double kPrimitiveTolerance = 1e-6;

struct PrimitiveCase {
    std::string name;
    std::vector<ArrayD> point;
    GraphBuilder f;
};

struct PrimitiveResult {
    std::string name;
    GradCheckResult check;
};

namespace detail {

inline ArrayD rand_array(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    return uniform<double>(std::move(shape), rng, lo, hi);
}

// Random linear read-out so every output coordinate reaches the scalar loss
// with a distinct weight.
inline Var<double> readout(Graph<double>& g, Var<double> y, std::uint64_t seed) {
    Rng rng(seed);
    Var<double> w = g.constant(rand_array(y.shape(), rng));
    return sum(mul(y, w));
}

}  // namespace detail

/// One randomized small-shape case per differentiable primitive.
inline std::vector<PrimitiveCase> primitive_cases(std::uint64_t seed) {
    using detail::rand_array;
    using detail::readout;
    Rng rng = substream(seed, "grad_check");
    std::vector<PrimitiveCase> c;
    c.push_back({"add", {rand_array({3, 4}, rng), rand_array({3, 4}, rng)},
                 [](Graph<double>& g, const auto& v) { return readout(g, add(v[0], v[1]), 1); }});
    c.push_back({"sub", {rand_array({3, 4}, rng), rand_array({3, 4}, rng)},
                 [](Graph<double>& g, const auto& v) { return readout(g, sub(v[0], v[1]), 2); }});
    c.push_back({"mul", {rand_array({3, 4}, rng), rand_array({3, 4}, rng)},
                 [](Graph<double>& g, const auto& v) { return readout(g, mul(v[0], v[1]), 3); }});
    c.push_back({"scale", {rand_array({5}, rng)}, [](Graph<double>& g, const auto& v) { return readout(g, scale(v[0], -1.7), 4); }});
    c.push_back({"add_row", {rand_array({4, 3}, rng), rand_array({3}, rng)},
                 [](Graph<double>& g, const auto& v) { return readout(g, add_row(v[0], v[1]), 5); }});
    c.push_back({"mul_row", {rand_array({2, 2, 3}, rng), rand_array({3}, rng)},
                 [](Graph<double>& g, const auto& v) { return readout(g, mul_row(v[0], v[1]), 6); }});
    c.push_back({"matmul", {rand_array({3, 4}, rng), rand_array({4, 2}, rng)},
                 [](Graph<double>& g, const auto& v) { return readout(g, matmul(v[0], v[1]), 7); }});
    c.push_back({"matmul_nt", {rand_array({3, 4}, rng), rand_array({5, 4}, rng)},
                 [](Graph<double>& g, const auto& v) { return readout(g, matmul_nt(v[0], v[1]), 8); }});
    c.push_back({"reshape", {rand_array({2, 6}, rng)}, [](Graph<double>& g, const auto& v) { return readout(g, reshape(v[0], {3, 4}), 9); }});
    c.push_back({"slice", {rand_array({3, 5, 2}, rng)}, [](Graph<double>& g, const auto& v) { return readout(g, slice(v[0], 1, 1, 3), 10); }});
    c.push_back({"concat", {rand_array({2, 3}, rng), rand_array({2, 2}, rng)},
                 [](Graph<double>& g, const auto& v) { return readout(g, concat<double>({v[0], v[1]}, 1), 11); }});
    c.push_back({"mean", {rand_array({3, 4}, rng)}, [](Graph<double>&, const auto& v) { return mean(v[0]); }});
    c.push_back({"mean_axis", {rand_array({3, 4, 2}, rng)}, [](Graph<double>& g, const auto& v) { return readout(g, mean(v[0], 1), 12); }});
    c.push_back({"layer_norm", {rand_array({3, 6}, rng)}, [](Graph<double>& g, const auto& v) { return readout(g, layer_norm(v[0]), 13); }});
    c.push_back({"softmax", {rand_array({3, 5}, rng, -2, 2)}, [](Graph<double>& g, const auto& v) { return readout(g, softmax(v[0]), 14); }});
    c.push_back({"gelu", {rand_array({10}, rng, -3, 3)}, [](Graph<double>& g, const auto& v) { return readout(g, gelu(v[0]), 15); }});
    c.push_back({"sinusoidal_embed", {rand_array({2}, rng, 0, 1)},
                 [](Graph<double>& g, const auto& v) { return readout(g, sinusoidal_embed(v[0], 8), 16); }});
    c.push_back({"gather_rows", {rand_array({4, 3}, rng)},
                 [](Graph<double>& g, const auto& v) { return readout(g, gather_rows(v[0], {2, 0, 2, 3}), 17); }});
    c.push_back({"mse", {rand_array({3, 3}, rng), rand_array({3, 3}, rng)}, [](Graph<double>&, const auto& v) { return mse(v[0], v[1]); }});
    return c;
}

inline std::vector<PrimitiveResult> check_primitives(std::uint64_t seed, double h = 1e-5) {
    std::vector<PrimitiveResult> out;
    for (const auto& c : primitive_cases(seed)) out.push_back({c.name, grad_check(c.f, c.point, h)});
    return out;
}

}  // namespace worldflow
