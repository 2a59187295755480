// Copyright (C) 2026 The worldflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "worldflow/numerics/graph.hpp"

#include <cmath>
#include <functional>
#include <vector>

namespace worldflow {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t worst_leaf = 0;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
};

using GraphBuilder = std::function<Var<double>(Graph<double>&, const std::vector<Var<double>>&)>;

/// Compares reverse-mode gradients with central differences at `point`.
/// Error per coordinate is |analytic - numeric| / (|analytic| + eps).
inline GradCheckResult grad_check(const GraphBuilder& f, const std::vector<ArrayD>& point, double h = 1e-5,
                                  double eps = 1e-6) {
    if (!(h > 0)) throw std::invalid_argument("grad_check: step must be positive");

    std::vector<ArrayD> analytic;
    {
        Graph<double> g;
        std::vector<Var<double>> leaves;
        for (const auto& p : point) leaves.push_back(g.param(p));
        Var<double> out = f(g, leaves);
        g.backward(out);
        for (const auto& l : leaves) analytic.push_back(g.grad(l));
    }

    auto evaluate = [&](const std::vector<ArrayD>& at) {
        Graph<double> g;
        std::vector<Var<double>> leaves;
        for (const auto& p : at) leaves.push_back(g.constant(p));
        return f(g, leaves).value()[0];
    };

    GradCheckResult result;
    std::vector<ArrayD> probe = point;
    for (std::size_t leaf = 0; leaf < point.size(); ++leaf) {
        for (std::size_t i = 0; i < point[leaf].size(); ++i) {
            const double x0 = point[leaf][i];
            probe[leaf][i] = x0 + h;
            const double fp = evaluate(probe);
            probe[leaf][i] = x0 - h;
            const double fm = evaluate(probe);
            probe[leaf][i] = x0;
            const double numeric = (fp - fm) / (2 * h);
            const double a = analytic[leaf][i];
            const double err = std::abs(a - numeric) / (std::abs(a) + eps);
            if (err > result.max_rel_error) result = {err, leaf, i, a, numeric};
        }
    }
    return result;
}

}  // namespace worldflow
