// Copyright (C) 2026 The worldflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "worldflow/numerics/ndarray.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace worldflow::worldfeat {

/// Per-channel z-scoring. Every array in a corpus is read as rows over its
/// last axis.
class Standardizer {
   public:
    static constexpr double kDefaultEps = 1e-6;

    Standardizer() = default;
    Standardizer(Eigen::VectorXd mean, Eigen::VectorXd std, double eps);

    static Standardizer fit(const std::vector<ArrayF>& corpus, double eps = kDefaultEps);

    /// (x - mean) / max(std, eps), channelwise.
    ArrayF apply(const ArrayF& x) const;
    /// x * max(std, eps) + mean, channelwise.
    ArrayF invert(const ArrayF& x) const;

    const Eigen::VectorXd& mean() const { return mean_; }
    const Eigen::VectorXd& stddev() const { return std_; }
    double eps() const { return eps_; }
    std::size_t channels() const { return std::size_t(mean_.size()); }

   private:
    Eigen::VectorXd mean_;
    Eigen::VectorXd std_;
    double eps_ = kDefaultEps;
};

/// Top-k principal axes of a corpus. Component columns are orthonormal and
/// sign-fixed so the largest-magnitude entry is positive.
class PcaModel {
   public:
    PcaModel() = default;
    PcaModel(Eigen::VectorXd mean, Eigen::MatrixXd components, Eigen::VectorXd variances);

    static PcaModel fit(const std::vector<ArrayF>& corpus, std::size_t k);
    static PcaModel fit(const Eigen::MatrixXd& rows, std::size_t k);

    /// (..., D) -> (..., k)
    ArrayF apply(const ArrayF& x) const;
    /// (..., k) -> (..., D)
    ArrayF reconstruct(const ArrayF& y) const;

    const Eigen::VectorXd& mean() const { return mean_; }
    const Eigen::MatrixXd& components() const { return components_; }
    const Eigen::VectorXd& variances() const { return variances_; }
    std::size_t input_channels() const { return std::size_t(components_.rows()); }
    std::size_t k() const { return std::size_t(components_.cols()); }

   private:
    Eigen::VectorXd mean_;
    Eigen::MatrixXd components_;  // D x k
    Eigen::VectorXd variances_;
};

/// Stacks the rows of every corpus array into one N x D matrix.
Eigen::MatrixXd stack_rows(const std::vector<ArrayF>& corpus);

// Fitted-model files: "DWFT", u32 version, string kind, string group,
// u32 k, then DWND arrays (f64).
void write_fitted(std::ostream& os, const std::string& group, const Standardizer& s);
void write_fitted(std::ostream& os, const std::string& group, const PcaModel& p);
Standardizer read_standardizer(std::istream& is, std::string* group = nullptr);
PcaModel read_pca(std::istream& is, std::string* group = nullptr);

void save_fitted(const std::filesystem::path& path, const std::string& group, const Standardizer& s);
void save_fitted(const std::filesystem::path& path, const std::string& group, const PcaModel& p);
Standardizer load_standardizer(const std::filesystem::path& path);
PcaModel load_pca(const std::filesystem::path& path);

}  // namespace worldflow::worldfeat
