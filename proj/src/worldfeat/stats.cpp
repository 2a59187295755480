// Copyright (C) 2026 The worldflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "worldflow/worldfeat/stats.hpp"

#include "worldflow/numerics/io.hpp"

#include <Eigen/Eigenvalues>

#include <fstream>

namespace worldflow::worldfeat {

namespace {

constexpr std::array<char, 4> kFittedMagic{'D', 'W', 'F', 'T'};
constexpr std::uint32_t kFittedVersion = 1;

ArrayD to_array(const Eigen::VectorXd& v) {
    ArrayD a({std::size_t(v.size())});
    a.values() = v.array();
    return a;
}

ArrayD to_array(const Eigen::MatrixXd& m) {
    ArrayD a({std::size_t(m.rows()), std::size_t(m.cols())});
    a.matrix() = m;
    return a;
}

void write_header(std::ostream& os, const std::string& kind, const std::string& group, std::uint32_t k) {
    io::write_magic(os, kFittedMagic);
    io::write_le<std::uint32_t>(os, kFittedVersion);
    io::write_string(os, kind);
    io::write_string(os, group);
    io::write_le<std::uint32_t>(os, k);
}

std::uint32_t read_header(std::istream& is, const std::string& kind, std::string* group) {
    io::expect_magic(is, kFittedMagic);
    if (io::read_le<std::uint32_t>(is) != kFittedVersion) throw FormatError("unsupported fitted-model version");
    const std::string got = io::read_string(is);
    if (got != kind) throw FormatError("expected a " + kind + " file, found " + got);
    std::string g = io::read_string(is);
    if (group) *group = std::move(g);
    return io::read_le<std::uint32_t>(is);
}

std::size_t corpus_width(const std::vector<ArrayF>& corpus) {
    if (corpus.empty()) throw std::invalid_argument("fit: corpus is empty");
    const std::size_t d = corpus.front().shape().back();
    for (const auto& a : corpus) {
        if (a.shape().back() != d) throw ShapeError("fit", corpus.front().shape(), a.shape(), "channel counts differ");
    }
    return d;
}

}  // namespace

Eigen::MatrixXd stack_rows(const std::vector<ArrayF>& corpus) {
    const std::size_t d = corpus_width(corpus);
    std::size_t n = 0;
    for (const auto& a : corpus) n += a.size() / std::max<std::size_t>(d, 1);
    Eigen::MatrixXd rows{Eigen::Index(n), Eigen::Index(d)};
    Eigen::Index r = 0;
    for (const auto& a : corpus) {
        const auto m = a.matrix();
        rows.middleRows(r, m.rows()) = m.cast<double>();
        r += m.rows();
    }
    return rows;
}

Standardizer::Standardizer(Eigen::VectorXd mean, Eigen::VectorXd std, double eps)
    : mean_(std::move(mean)), std_(std::move(std)), eps_(eps) {
    if (!(eps_ > 0)) throw std::invalid_argument("Standardizer: eps must be positive");
    if (mean_.size() != std_.size()) throw std::invalid_argument("Standardizer: mean/std size mismatch");
}

Standardizer Standardizer::fit(const std::vector<ArrayF>& corpus, double eps) {
    const Eigen::MatrixXd rows = stack_rows(corpus);
    if (rows.rows() == 0) throw std::invalid_argument("Standardizer::fit: corpus has no rows");
    const Eigen::VectorXd mean = rows.colwise().mean().transpose();
    const Eigen::VectorXd var = (rows.rowwise() - mean.transpose()).array().square().colwise().mean().transpose();
    return Standardizer(mean, var.array().sqrt().matrix(), eps);
}

ArrayF Standardizer::apply(const ArrayF& x) const {
    if (x.empty() || x.shape().back() != channels()) {
        throw ShapeError("standardize_apply", x.shape(), Shape{channels()}, "channel count");
    }
    ArrayF out(x.shape());
    const Eigen::ArrayXd inv = 1.0 / std_.array().max(eps_);
    out.matrix() = ((x.matrix().cast<double>().rowwise() - mean_.transpose()).array().rowwise() * inv.transpose())
                       .matrix()
                       .cast<float>();
    return out;
}

ArrayF Standardizer::invert(const ArrayF& x) const {
    if (x.empty() || x.shape().back() != channels()) {
        throw ShapeError("standardize_invert", x.shape(), Shape{channels()}, "channel count");
    }
    ArrayF out(x.shape());
    const Eigen::ArrayXd s = std_.array().max(eps_);
    out.matrix() = ((x.matrix().cast<double>().array().rowwise() * s.transpose()).matrix().rowwise() + mean_.transpose()).cast<float>();
    return out;
}

PcaModel::PcaModel(Eigen::VectorXd mean, Eigen::MatrixXd components, Eigen::VectorXd variances)
    : mean_(std::move(mean)), components_(std::move(components)), variances_(std::move(variances)) {
    if (mean_.size() != components_.rows()) throw std::invalid_argument("PcaModel: mean/components size mismatch");
}

PcaModel PcaModel::fit(const std::vector<ArrayF>& corpus, std::size_t k) { return fit(stack_rows(corpus), k); }

PcaModel PcaModel::fit(const Eigen::MatrixXd& rows, std::size_t k) {
    const auto d = std::size_t(rows.cols());
    if (k > d) {
        throw std::invalid_argument("pca_fit: k=" + std::to_string(k) + " exceeds the raw channel count " + std::to_string(d));
    }
    if (std::size_t(rows.rows()) <= k) {
        throw std::invalid_argument("pca_fit: need more than k=" + std::to_string(k) + " samples, got " +
                                    std::to_string(rows.rows()));
    }
    const Eigen::VectorXd mean = rows.colwise().mean().transpose();
    const Eigen::MatrixXd centered = rows.rowwise() - mean.transpose();
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / double(rows.rows() - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw std::runtime_error("pca_fit: eigendecomposition failed");

    Eigen::MatrixXd components{Eigen::Index(d), Eigen::Index(k)};
    Eigen::VectorXd variances{Eigen::Index(k)};
    for (std::size_t c = 0; c < k; ++c) {
        const Eigen::Index src = Eigen::Index(d - 1 - c);  // eigenvalues ascend
        Eigen::VectorXd v = solver.eigenvectors().col(src);
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v[arg] < 0) v = -v;
        components.col(Eigen::Index(c)) = v;
        variances[Eigen::Index(c)] = std::max(0.0, solver.eigenvalues()[src]);
    }
    return PcaModel(mean, components, variances);
}

ArrayF PcaModel::apply(const ArrayF& x) const {
    if (x.empty() || x.shape().back() != input_channels()) {
        throw ShapeError("pca_apply", x.shape(), Shape{input_channels()}, "channel count");
    }
    Shape out_shape = x.shape();
    out_shape.back() = k();
    ArrayF out(out_shape);
    if (k() > 0) out.matrix() = ((x.matrix().cast<double>().rowwise() - mean_.transpose()) * components_).cast<float>();
    return out;
}

ArrayF PcaModel::reconstruct(const ArrayF& y) const {
    if (y.shape().empty() || y.shape().back() != k()) throw ShapeError("pca_reconstruct", y.shape(), Shape{k()}, "channel count");
    Shape out_shape = y.shape();
    out_shape.back() = input_channels();
    ArrayF out(out_shape);
    out.matrix() = ((y.matrix().cast<double>() * components_.transpose()).rowwise() + mean_.transpose()).cast<float>();
    return out;
}

void write_fitted(std::ostream& os, const std::string& group, const Standardizer& s) {
    write_header(os, "standardizer", group, std::uint32_t(s.channels()));
    write_array(os, to_array(s.mean()));
    write_array(os, to_array(s.stddev()));
    write_array(os, ArrayD::scalar(s.eps()));
}

void write_fitted(std::ostream& os, const std::string& group, const PcaModel& p) {
    write_header(os, "pca", group, std::uint32_t(p.k()));
    write_array(os, to_array(p.mean()));
    write_array(os, to_array(p.components()));
    write_array(os, to_array(p.variances()));
}

Standardizer read_standardizer(std::istream& is, std::string* group) {
    const auto channels = read_header(is, "standardizer", group);
    ArrayD mean = read_array<double>(is), sd = read_array<double>(is), eps = read_array<double>(is);
    if (mean.size() != channels || sd.size() != channels || eps.size() != 1) {
        throw FormatError("standardizer arrays disagree with header");
    }
    return Standardizer(mean.values().matrix(), sd.values().matrix(), eps[0]);
}

PcaModel read_pca(std::istream& is, std::string* group) {
    const auto k = read_header(is, "pca", group);
    ArrayD mean = read_array<double>(is), comps = read_array<double>(is), var = read_array<double>(is);
    if (comps.rank() != 2 || comps.dim(1) != k || comps.dim(0) != mean.size() || var.size() != k) {
        throw FormatError("pca arrays disagree with header");
    }
    return PcaModel(mean.values().matrix(), comps.matrix(), var.values().matrix());
}

void save_fitted(const std::filesystem::path& path, const std::string& group, const Standardizer& s) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_fitted(os, group, s);
}

void save_fitted(const std::filesystem::path& path, const std::string& group, const PcaModel& p) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_fitted(os, group, p);
}

Standardizer load_standardizer(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("missing fitted standardizer " + path.string());
    return read_standardizer(is);
}

PcaModel load_pca(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("missing fitted PCA model " + path.string());
    return read_pca(is);
}

}  // namespace worldflow::worldfeat
