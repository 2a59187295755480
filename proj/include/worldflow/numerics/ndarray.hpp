// Copyright (C) 2026 The worldflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace worldflow {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

/// Raised when operand shapes do not conform. The message names the op and
/// every offending shape.
class ShapeError : public std::invalid_argument {
   public:
    ShapeError(const std::string& op, const Shape& a, const Shape& b, const std::string& detail = {})
        : std::invalid_argument(op + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b) +
                                (detail.empty() ? std::string{} : " (" + detail + ")")),
          op_(op), lhs_(a), rhs_(b) {}
    ShapeError(const std::string& op, const Shape& a, const std::string& detail)
        : std::invalid_argument(op + ": invalid shape " + shape_str(a) + " (" + detail + ")"),
          op_(op), lhs_(a) {}

    const std::string& op() const noexcept { return op_; }
    const Shape& lhs() const noexcept { return lhs_; }
    const Shape& rhs() const noexcept { return rhs_; }

   private:
    std::string op_;
    Shape lhs_;
    Shape rhs_;
};

/// Raised when an op produces NaN or Inf.
class NumericFault : public std::runtime_error {
   public:
    NumericFault(const std::string& op, const std::string& scope)
        : std::runtime_error("non-finite value produced by " + op +
                             (scope.empty() ? std::string{} : " in " + scope)),
          op_(op), scope_(scope) {}

    const std::string& op() const noexcept { return op_; }
    const std::string& scope() const noexcept { return scope_; }

   private:
    std::string op_;
    std::string scope_;
};

/// Dense row-major n-dimensional array with value semantics.
template <typename S>
class NdArray {
   public:
    using Scalar = S;
    using Storage = Eigen::Array<S, Eigen::Dynamic, 1>;
    using RowMatrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using MatrixMap = Eigen::Map<RowMatrix>;
    using ConstMatrixMap = Eigen::Map<const RowMatrix>;

    NdArray() = default;

    explicit NdArray(Shape shape) : shape_(std::move(shape)), data_(Storage::Zero(Eigen::Index(shape_size(shape_)))) {}

    NdArray(Shape shape, S fill) : shape_(std::move(shape)), data_(Storage::Constant(Eigen::Index(shape_size(shape_)), fill)) {}

    NdArray(Shape shape, std::span<const S> values) : shape_(std::move(shape)) {
        if (values.size() != shape_size(shape_)) {
            throw ShapeError("NdArray", shape_, "expected " + std::to_string(shape_size(shape_)) + " values, got " +
                                                    std::to_string(values.size()));
        }
        data_ = Eigen::Map<const Storage>(values.data(), Eigen::Index(values.size()));
    }

    NdArray(Shape shape, std::initializer_list<S> values)
        : NdArray(std::move(shape), std::span<const S>(values.begin(), values.size())) {}

    NdArray(Shape shape, Storage values) : shape_(std::move(shape)), data_(std::move(values)) {
        if (std::size_t(data_.size()) != shape_size(shape_)) {
            throw ShapeError("NdArray", shape_, "storage length " + std::to_string(data_.size()));
        }
    }

    static NdArray scalar(S v) { return NdArray(Shape{1}, v); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const noexcept { return std::size_t(data_.size()); }
    bool empty() const noexcept { return data_.size() == 0; }

    Storage& values() noexcept { return data_; }
    const Storage& values() const noexcept { return data_; }
    S* data() noexcept { return data_.data(); }
    const S* data() const noexcept { return data_.data(); }
    std::span<const S> span() const noexcept { return {data_.data(), size()}; }
    std::span<S> span() noexcept { return {data_.data(), size()}; }

    S& operator[](std::size_t i) { return data_[Eigen::Index(i)]; }
    S operator[](std::size_t i) const { return data_[Eigen::Index(i)]; }

    template <typename... I>
    S& at(I... idx) {
        return data_[Eigen::Index(offset({std::size_t(idx)...}))];
    }
    template <typename... I>
    S at(I... idx) const {
        return data_[Eigen::Index(offset({std::size_t(idx)...}))];
    }

    std::size_t offset(std::initializer_list<std::size_t> idx) const {
        if (idx.size() != shape_.size()) throw ShapeError("at", shape_, "index rank " + std::to_string(idx.size()));
        std::size_t off = 0;
        std::size_t axis = 0;
        for (std::size_t i : idx) {
            if (i >= shape_[axis]) throw std::out_of_range("index out of range on axis " + std::to_string(axis));
            off = off * shape_[axis] + i;
            ++axis;
        }
        return off;
    }

    /// Rows = product of all leading extents, cols = last extent.
    MatrixMap matrix() {
        auto [r, c] = matrix_dims();
        return MatrixMap(data_.data(), r, c);
    }
    ConstMatrixMap matrix() const {
        auto [r, c] = matrix_dims();
        return ConstMatrixMap(data_.data(), r, c);
    }

    NdArray reshaped(Shape shape) const {
        if (shape_size(shape) != size()) throw ShapeError("reshape", shape_, shape);
        return NdArray(std::move(shape), data_);
    }

    template <typename T>
    NdArray<T> cast() const {
        return NdArray<T>(shape_, typename NdArray<T>::Storage(data_.template cast<T>()));
    }

    bool all_finite() const { return data_.allFinite(); }

    friend bool operator==(const NdArray& a, const NdArray& b) {
        return a.shape_ == b.shape_ && (a.data_ == b.data_).all();
    }

   private:
    std::pair<Eigen::Index, Eigen::Index> matrix_dims() const {
        if (shape_.empty()) return {1, 1};
        const Eigen::Index cols = Eigen::Index(shape_.back());
        const Eigen::Index rows = Eigen::Index(shape_size(Shape(shape_.begin(), shape_.end() - 1)));
        return {rows, cols};
    }

    Shape shape_;
    Storage data_;
};

using ArrayF = NdArray<float>;
using ArrayD = NdArray<double>;

namespace detail {

// (outer, axis extent, inner) decomposition of a shape around one axis.
inline std::tuple<std::size_t, std::size_t, std::size_t> split_axis(const Shape& shape, std::size_t axis) {
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
    return {outer, shape[axis], inner};
}

}  // namespace detail

/// Contiguous sub-range [start, start+length) along `axis`.
template <typename S>
NdArray<S> slice(const NdArray<S>& a, std::size_t axis, std::size_t start, std::size_t length) {
    if (axis >= a.rank()) throw ShapeError("slice", a.shape(), "axis " + std::to_string(axis) + " out of range");
    if (start + length > a.dim(axis)) {
        throw ShapeError("slice", a.shape(),
                         "range [" + std::to_string(start) + "," + std::to_string(start + length) + ") on axis " +
                             std::to_string(axis));
    }
    Shape out_shape = a.shape();
    out_shape[axis] = length;
    NdArray<S> out(out_shape);
    auto [outer, extent, inner] = detail::split_axis(a.shape(), axis);
    const S* src = a.data();
    S* dst = out.data();
    for (std::size_t o = 0; o < outer; ++o) {
        std::copy_n(src + (o * extent + start) * inner, length * inner, dst + o * length * inner);
    }
    return out;
}

template <typename S>
NdArray<S> concat(std::span<const NdArray<S>> parts, std::size_t axis) {
    if (parts.empty()) throw std::invalid_argument("concat: no inputs");
    const Shape& ref = parts.front().shape();
    if (axis >= ref.size()) throw ShapeError("concat", ref, "axis " + std::to_string(axis) + " out of range");
    Shape out_shape = ref;
    out_shape[axis] = 0;
    for (const auto& p : parts) {
        if (p.rank() != ref.size()) throw ShapeError("concat", ref, p.shape());
        for (std::size_t i = 0; i < ref.size(); ++i) {
            if (i != axis && p.dim(i) != ref[i]) throw ShapeError("concat", ref, p.shape(), "axis " + std::to_string(i));
        }
        out_shape[axis] += p.dim(axis);
    }
    NdArray<S> out(out_shape);
    auto [outer, extent, inner] = detail::split_axis(out_shape, axis);
    S* dst = out.data();
    std::size_t offset = 0;
    for (const auto& p : parts) {
        const std::size_t len = p.dim(axis) * inner;
        for (std::size_t o = 0; o < outer; ++o) {
            std::copy_n(p.data() + o * len, len, dst + o * extent * inner + offset);
        }
        offset += len;
    }
    return out;
}

template <typename S>
NdArray<S> concat(std::initializer_list<NdArray<S>> parts, std::size_t axis) {
    return concat(std::span<const NdArray<S>>(parts.begin(), parts.size()), axis);
}

template <typename S>
S max_abs_diff(const NdArray<S>& a, const NdArray<S>& b) {
    if (a.shape() != b.shape()) throw ShapeError("max_abs_diff", a.shape(), b.shape());
    if (a.empty()) return S(0);
    return (a.values() - b.values()).abs().maxCoeff();
}

}  // namespace worldflow
