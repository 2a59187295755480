// Copyright (C) 2026 The worldflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "worldflow/numerics/graph.hpp"

#include <cmath>
#include <numbers>
#include <vector>

// Differentiable primitives. Every op validates shapes, computes its forward
// value with Eigen, and registers the matching reverse-mode rule.

namespace worldflow {

namespace detail {

template <typename S>
void require_same(const char* op, const Var<S>& a, const Var<S>& b) {
    if (a.graph != b.graph) throw std::invalid_argument(std::string(op) + ": operands belong to different graphs");
    if (a.shape() != b.shape()) throw ShapeError(op, a.shape(), b.shape());
}

template <typename S>
std::size_t row_width(const char* op, const Var<S>& a, const Var<S>& row) {
    const Shape& rs = row.shape();
    const std::size_t width = rs.back();
    if (shape_size(rs) != width || a.shape().empty() || a.shape().back() != width) {
        throw ShapeError(op, a.shape(), rs, "row operand must be a vector matching the last axis");
    }
    return width;
}

template <typename S>
void require_rank2(const char* op, const Var<S>& a) {
    if (a.shape().size() != 2) throw ShapeError(op, a.shape(), "expected a rank-2 operand");
}

}  // namespace detail

template <typename S>
Var<S> add(Var<S> a, Var<S> b) {
    detail::require_same("add", a, b);
    Graph<S>& g = *a.graph;
    NdArray<S> out(a.shape(), typename NdArray<S>::Storage(a.value().values() + b.value().values()));
    return g.record("add", std::move(out), g.requires_grad(a) || g.requires_grad(b),
                    [a = a.id, b = b.id](Graph<S>& g, const NdArray<S>& up) {
                        if (g.requires_grad(a)) g.grad_buffer(a).values() += up.values();
                        if (g.requires_grad(b)) g.grad_buffer(b).values() += up.values();
                    });
}

template <typename S>
Var<S> sub(Var<S> a, Var<S> b) {
    detail::require_same("sub", a, b);
    Graph<S>& g = *a.graph;
    NdArray<S> out(a.shape(), typename NdArray<S>::Storage(a.value().values() - b.value().values()));
    return g.record("sub", std::move(out), g.requires_grad(a) || g.requires_grad(b),
                    [a = a.id, b = b.id](Graph<S>& g, const NdArray<S>& up) {
                        if (g.requires_grad(a)) g.grad_buffer(a).values() += up.values();
                        if (g.requires_grad(b)) g.grad_buffer(b).values() -= up.values();
                    });
}

/// Elementwise product.
template <typename S>
Var<S> mul(Var<S> a, Var<S> b) {
    detail::require_same("mul", a, b);
    Graph<S>& g = *a.graph;
    NdArray<S> out(a.shape(), typename NdArray<S>::Storage(a.value().values() * b.value().values()));
    return g.record("mul", std::move(out), g.requires_grad(a) || g.requires_grad(b),
                    [a = a.id, b = b.id](Graph<S>& g, const NdArray<S>& up) {
                        if (g.requires_grad(a)) g.grad_buffer(a).values() += up.values() * g.value(b).values();
                        if (g.requires_grad(b)) g.grad_buffer(b).values() += up.values() * g.value(a).values();
                    });
}

template <typename S>
Var<S> scale(Var<S> a, S factor) {
    Graph<S>& g = *a.graph;
    NdArray<S> out(a.shape(), typename NdArray<S>::Storage(a.value().values() * factor));
    return g.record("scale", std::move(out), g.requires_grad(a), [a = a.id, factor](Graph<S>& g, const NdArray<S>& up) {
        g.grad_buffer(a).values() += up.values() * factor;
    });
}

/// a + row, with row broadcast over every leading index.
template <typename S>
Var<S> add_row(Var<S> a, Var<S> row) {
    detail::row_width("add_row", a, row);
    Graph<S>& g = *a.graph;
    NdArray<S> out = a.value();
    auto rv = row.value().values().matrix().transpose();
    out.matrix().rowwise() += rv;
    return g.record("add_row", std::move(out), g.requires_grad(a) || g.requires_grad(row),
                    [a = a.id, row = row.id](Graph<S>& g, const NdArray<S>& up) {
                        if (g.requires_grad(a)) g.grad_buffer(a).values() += up.values();
                        if (g.requires_grad(row)) {
                            g.grad_buffer(row).values().matrix() += up.matrix().colwise().sum().transpose();
                        }
                    });
}

/// a * row (elementwise), with row broadcast over every leading index.
template <typename S>
Var<S> mul_row(Var<S> a, Var<S> row) {
    detail::row_width("mul_row", a, row);
    Graph<S>& g = *a.graph;
    NdArray<S> out = a.value();
    auto rv = row.value().values().matrix().transpose().array();
    out.matrix().array().rowwise() *= rv;
    return g.record("mul_row", std::move(out), g.requires_grad(a) || g.requires_grad(row),
                    [a = a.id, row = row.id](Graph<S>& g, const NdArray<S>& up) {
                        const auto& rv = g.value(row).values();
                        if (g.requires_grad(a)) {
                            auto ga = g.grad_buffer(a).matrix();
                            ga.array() += up.matrix().array().rowwise() * rv.transpose();
                        }
                        if (g.requires_grad(row)) {
                            auto prod = (up.matrix().array() * g.value(a).matrix().array()).colwise().sum();
                            g.grad_buffer(row).values() += prod.transpose();
                        }
                    });
}

/// (m x k) * (k x n).
template <typename S>
Var<S> matmul(Var<S> a, Var<S> b) {
    detail::require_rank2("matmul", a);
    detail::require_rank2("matmul", b);
    if (a.shape()[1] != b.shape()[0]) throw ShapeError("matmul", a.shape(), b.shape(), "inner extents differ");
    Graph<S>& g = *a.graph;
    NdArray<S> out(Shape{a.shape()[0], b.shape()[1]});
    if (a.shape()[1] > 0) out.matrix().noalias() = a.value().matrix() * b.value().matrix();
    return g.record("matmul", std::move(out), g.requires_grad(a) || g.requires_grad(b),
                    [a = a.id, b = b.id](Graph<S>& g, const NdArray<S>& up) {
                        if (g.requires_grad(a)) g.grad_buffer(a).matrix().noalias() += up.matrix() * g.value(b).matrix().transpose();
                        if (g.requires_grad(b)) g.grad_buffer(b).matrix().noalias() += g.value(a).matrix().transpose() * up.matrix();
                    });
}

/// (m x k) * (n x k)^T.
template <typename S>
Var<S> matmul_nt(Var<S> a, Var<S> b) {
    detail::require_rank2("matmul_nt", a);
    detail::require_rank2("matmul_nt", b);
    if (a.shape()[1] != b.shape()[1]) throw ShapeError("matmul_nt", a.shape(), b.shape(), "inner extents differ");
    Graph<S>& g = *a.graph;
    NdArray<S> out(Shape{a.shape()[0], b.shape()[0]});
    if (a.shape()[1] > 0) out.matrix().noalias() = a.value().matrix() * b.value().matrix().transpose();
    return g.record("matmul_nt", std::move(out), g.requires_grad(a) || g.requires_grad(b),
                    [a = a.id, b = b.id](Graph<S>& g, const NdArray<S>& up) {
                        if (g.requires_grad(a)) g.grad_buffer(a).matrix().noalias() += up.matrix() * g.value(b).matrix();
                        if (g.requires_grad(b)) g.grad_buffer(b).matrix().noalias() += up.matrix().transpose() * g.value(a).matrix();
                    });
}

template <typename S>
Var<S> reshape(Var<S> a, Shape shape) {
    Graph<S>& g = *a.graph;
    NdArray<S> out = a.value().reshaped(std::move(shape));
    return g.record("reshape", std::move(out), g.requires_grad(a), [a = a.id](Graph<S>& g, const NdArray<S>& up) {
        g.grad_buffer(a).values() += up.values();
    });
}

template <typename S>
Var<S> slice(Var<S> a, std::size_t axis, std::size_t start, std::size_t length) {
    Graph<S>& g = *a.graph;
    NdArray<S> out = slice(a.value(), axis, start, length);
    return g.record("slice", std::move(out), g.requires_grad(a),
                    [a = a.id, axis, start, length](Graph<S>& g, const NdArray<S>& up) {
                        auto& ga = g.grad_buffer(a);
                        auto [outer, extent, inner] = detail::split_axis(ga.shape(), axis);
                        for (std::size_t o = 0; o < outer; ++o) {
                            S* dst = ga.data() + (o * extent + start) * inner;
                            const S* src = up.data() + o * length * inner;
                            for (std::size_t i = 0; i < length * inner; ++i) dst[i] += src[i];
                        }
                    });
}

template <typename S>
Var<S> concat(const std::vector<Var<S>>& parts, std::size_t axis) {
    if (parts.empty()) throw std::invalid_argument("concat: no inputs");
    Graph<S>& g = *parts.front().graph;
    std::vector<NdArray<S>> values;
    values.reserve(parts.size());
    bool needs = false;
    std::vector<std::size_t> ids, lengths;
    for (const auto& p : parts) {
        if (p.graph != &g) throw std::invalid_argument("concat: operands belong to different graphs");
        values.push_back(p.value());
        needs = needs || g.requires_grad(p);
        ids.push_back(p.id);
        lengths.push_back(axis < p.shape().size() ? p.shape()[axis] : 0);
    }
    NdArray<S> out = concat(std::span<const NdArray<S>>(values), axis);
    return g.record("concat", std::move(out), needs,
                    [ids = std::move(ids), lengths = std::move(lengths), axis](Graph<S>& g, const NdArray<S>& up) {
                        std::size_t start = 0;
                        for (std::size_t i = 0; i < ids.size(); ++i) {
                            if (g.requires_grad(ids[i])) {
                                g.grad_buffer(ids[i]).values() += slice(up, axis, start, lengths[i]).values();
                            }
                            start += lengths[i];
                        }
                    });
}

template <typename S>
Var<S> sum(Var<S> a) {
    Graph<S>& g = *a.graph;
    return g.record("sum", NdArray<S>::scalar(a.value().values().sum()), g.requires_grad(a),
                    [a = a.id](Graph<S>& g, const NdArray<S>& up) { g.grad_buffer(a).values() += up[0]; });
}

/// Mean over all elements; an empty array has mean 0.
template <typename S>
Var<S> mean(Var<S> a) {
    Graph<S>& g = *a.graph;
    const std::size_t n = a.value().size();
    const S m = n ? a.value().values().sum() / S(n) : S(0);
    return g.record("mean", NdArray<S>::scalar(m), g.requires_grad(a) && n > 0,
                    [a = a.id, n](Graph<S>& g, const NdArray<S>& up) { g.grad_buffer(a).values() += up[0] / S(n); });
}

/// Mean over one axis; the axis is removed from the shape.
template <typename S>
Var<S> mean(Var<S> a, std::size_t axis) {
    const Shape& in = a.shape();
    if (axis >= in.size()) throw ShapeError("mean", in, "axis " + std::to_string(axis) + " out of range");
    if (in[axis] == 0) throw ShapeError("mean", in, "cannot average over an empty axis");
    Graph<S>& g = *a.graph;
    auto [outer, extent, inner] = detail::split_axis(in, axis);
    Shape out_shape = in;
    out_shape.erase(out_shape.begin() + std::ptrdiff_t(axis));
    if (out_shape.empty()) out_shape = {1};
    NdArray<S> out(out_shape);
    const S* src = a.value().data();
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t e = 0; e < extent; ++e) {
            for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] += src[(o * extent + e) * inner + i];
        }
    }
    out.values() /= S(extent);
    return g.record("mean_axis", std::move(out), g.requires_grad(a),
                    [a = a.id, outer, extent, inner](Graph<S>& g, const NdArray<S>& up) {
                        auto& ga = g.grad_buffer(a);
                        for (std::size_t o = 0; o < outer; ++o) {
                            for (std::size_t e = 0; e < extent; ++e) {
                                for (std::size_t i = 0; i < inner; ++i) {
                                    ga[(o * extent + e) * inner + i] += up[o * inner + i] / S(extent);
                                }
                            }
                        }
                    });
}

/// Normalizes each row over the last axis to zero mean and unit variance.
template <typename S>
Var<S> layer_norm(Var<S> a, S eps = S(1e-5)) {
    if (a.shape().empty() || a.shape().back() == 0) throw ShapeError("layer_norm", a.shape(), "empty last axis");
    Graph<S>& g = *a.graph;
    const auto x = a.value().matrix();
    const Eigen::Index d = x.cols();
    NdArray<S> out(a.shape());
    auto y = out.matrix();
    Eigen::Matrix<S, Eigen::Dynamic, 1> inv_std(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const S mu = x.row(r).mean();
        const S var = (x.row(r).array() - mu).square().sum() / S(d);
        inv_std[r] = S(1) / std::sqrt(var + eps);
        y.row(r) = (x.row(r).array() - mu) * inv_std[r];
    }
    const std::size_t self_value = g.size();  // id this node will receive
    return g.record("layer_norm", std::move(out), g.requires_grad(a),
                    [a = a.id, self_value, inv_std = std::move(inv_std)](Graph<S>& g, const NdArray<S>& up) {
                        const auto y = g.value(self_value).matrix();
                        const auto dy = up.matrix();
                        auto ga = g.grad_buffer(a).matrix();
                        const S d = S(y.cols());
                        for (Eigen::Index r = 0; r < y.rows(); ++r) {
                            const S mean_dy = dy.row(r).sum() / d;
                            const S mean_dy_y = dy.row(r).dot(y.row(r)) / d;
                            ga.row(r).array() += inv_std[r] * (dy.row(r).array() - mean_dy - y.row(r).array() * mean_dy_y);
                        }
                    });
}

/// Softmax over the last axis.
template <typename S>
Var<S> softmax(Var<S> a) {
    if (a.shape().empty() || a.shape().back() == 0) throw ShapeError("softmax", a.shape(), "empty last axis");
    Graph<S>& g = *a.graph;
    NdArray<S> out = a.value();
    auto y = out.matrix();
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
        const S mx = y.row(r).maxCoeff();
        y.row(r) = (y.row(r).array() - mx).exp();
        y.row(r) /= y.row(r).sum();
    }
    const std::size_t self_value = g.size();
    return g.record("softmax", std::move(out), g.requires_grad(a),
                    [a = a.id, self_value](Graph<S>& g, const NdArray<S>& up) {
                        const auto y = g.value(self_value).matrix();
                        const auto dy = up.matrix();
                        auto ga = g.grad_buffer(a).matrix();
                        const Eigen::Matrix<S, Eigen::Dynamic, 1> dots = (dy.array() * y.array()).rowwise().sum();
                        ga.array() += y.array() * (dy.array().colwise() - dots.array());
                    });
}

/// GELU, tanh approximation.
template <typename S>
Var<S> gelu(Var<S> a) {
    Graph<S>& g = *a.graph;
    const S k = std::sqrt(S(2) / std::numbers::pi_v<S>);
    const S c = S(0.044715);
    const auto& x = a.value().values();
    const typename NdArray<S>::Storage th = (k * (x + c * x.cube())).tanh();
    NdArray<S> out(a.shape(), typename NdArray<S>::Storage(S(0.5) * x * (S(1) + th)));
    return g.record("gelu", std::move(out), g.requires_grad(a), [a = a.id, th, k, c](Graph<S>& g, const NdArray<S>& up) {
        const auto& x = g.value(a).values();
        g.grad_buffer(a).values() +=
            up.values() * (S(0.5) * (S(1) + th) + S(0.5) * x * (S(1) - th.square()) * k * (S(1) + S(3) * c * x.square()));
    });
}

/// Sinusoidal features of each entry of t: [cos(t f_0..f_{h-1}), sin(t f_0..f_{h-1})],
/// f_i = max_period^(-i/h), h = dim/2. Output shape (len(t), dim).
template <typename S>
Var<S> sinusoidal_embed(Var<S> t, std::size_t dim, S max_period = S(10000)) {
    if (dim == 0 || dim % 2 != 0) throw ShapeError("sinusoidal_embed", Shape{dim}, "dim must be a positive even number");
    Graph<S>& g = *t.graph;
    const std::size_t n = t.value().size();
    const std::size_t half = dim / 2;
    Eigen::Array<S, Eigen::Dynamic, 1> freqs(static_cast<Eigen::Index>(half));
    for (std::size_t i = 0; i < half; ++i) freqs[Eigen::Index(i)] = std::exp(-std::log(max_period) * S(i) / S(half));
    NdArray<S> out(Shape{n, dim});
    for (std::size_t r = 0; r < n; ++r) {
        const S tv = t.value()[r];
        for (std::size_t i = 0; i < half; ++i) {
            out[r * dim + i] = std::cos(tv * freqs[Eigen::Index(i)]);
            out[r * dim + half + i] = std::sin(tv * freqs[Eigen::Index(i)]);
        }
    }
    return g.record("sinusoidal_embed", std::move(out), g.requires_grad(t),
                    [t = t.id, freqs, dim, half](Graph<S>& g, const NdArray<S>& up) {
                        auto& gt = g.grad_buffer(t);
                        for (std::size_t r = 0; r < gt.size(); ++r) {
                            const S tv = g.value(t)[r];
                            S acc = 0;
                            for (std::size_t i = 0; i < half; ++i) {
                                const S f = freqs[Eigen::Index(i)];
                                acc += -up[r * dim + i] * f * std::sin(tv * f) + up[r * dim + half + i] * f * std::cos(tv * f);
                            }
                            gt[r] += acc;
                        }
                    });
}

/// Row lookup: out[i] = table[indices[i]].
template <typename S>
Var<S> gather_rows(Var<S> table, std::vector<std::size_t> indices) {
    detail::require_rank2("gather_rows", table);
    const std::size_t rows = table.shape()[0], width = table.shape()[1];
    for (std::size_t idx : indices) {
        if (idx >= rows) throw ShapeError("gather_rows", table.shape(), "row index " + std::to_string(idx) + " out of range");
    }
    Graph<S>& g = *table.graph;
    NdArray<S> out(Shape{indices.size(), width});
    for (std::size_t i = 0; i < indices.size(); ++i) out.matrix().row(Eigen::Index(i)) = table.value().matrix().row(Eigen::Index(indices[i]));
    return g.record("gather_rows", std::move(out), g.requires_grad(table),
                    [table = table.id, indices = std::move(indices)](Graph<S>& g, const NdArray<S>& up) {
                        auto gt = g.grad_buffer(table).matrix();
                        for (std::size_t i = 0; i < indices.size(); ++i) gt.row(Eigen::Index(indices[i])) += up.matrix().row(Eigen::Index(i));
                    });
}

/// mean((a - b)^2); 0 for empty operands.
template <typename S>
Var<S> mse(Var<S> a, Var<S> b) {
    Var<S> d = sub(a, b);
    return mean(mul(d, d));
}

}  // namespace worldflow
