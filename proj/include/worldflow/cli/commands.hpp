// Copyright (C) 2026 The worldflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "worldflow/cli/config.hpp"
#include "worldflow/eval/eval.hpp"

#include <filesystem>
#include <optional>
#include <ostream>
#include <vector>

namespace worldflow::cli {

struct Options {
    bool force = false;                          // replace a non-empty output directory
    std::optional<std::filesystem::path> resume;      // train: checkpoint to continue from
    std::optional<std::filesystem::path> checkpoint;  // sample / eval: model to load
    bool quiet = false;
};

/// Output layout under RunConfig::root.
struct RunPaths {
    std::filesystem::path root;
    std::filesystem::path data() const { return root / "data"; }
    std::filesystem::path features() const { return root / "features"; }
    std::filesystem::path base() const { return root / "base"; }
    std::filesystem::path train() const { return root / "train"; }
    std::filesystem::path samples() const { return root / "samples"; }
    std::filesystem::path eval() const { return root / "eval"; }
};

/// FNV-1a over the names and bytes of every regular file under `dir`, in
/// sorted relative-path order.
std::uint64_t checksum_tree(const std::filesystem::path& dir);

/// Writes via a sibling temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

void cmd_gen_data(const RunConfig& rc, const Options& opt, std::ostream& log);
void cmd_preprocess(const RunConfig& rc, const Options& opt, std::ostream& log);
void cmd_pretrain_base(const RunConfig& rc, const Options& opt, std::ostream& log);
void cmd_train(const RunConfig& rc, const Options& opt, std::ostream& log);
void cmd_sample(const RunConfig& rc, const Options& opt, std::ostream& log);
void cmd_eval(const RunConfig& rc, const Options& opt, std::ostream& log);
/// Returns false when any primitive exceeds its tolerance or the joint loss
/// exceeds 1e-4.
bool cmd_grad_check(const RunConfig& rc, std::ostream& log);

/// Loads the preprocessed joint latents and prompts, verifying checksums.
train::Dataset load_dataset(const RunConfig& rc);

/// Prompts of the first `n` held-out episodes.
std::vector<std::vector<int>> heldout_prompts(const RunConfig& rc, std::size_t n);

struct SampleMetrics {
    std::vector<double> flow_consistency;
    std::vector<double> subject_consistency;
    std::size_t no_segment_samples = 0;
};

/// Samples one video per prompt (index i uses noise substream i) and scores
/// it. Predicted temporal channels are mapped back to codec space through
/// the fitted standardizer before decoding.
SampleMetrics sample_metrics(const model::ModelParams<float>& params, const std::vector<std::vector<int>>& prompts,
                             const RunConfig& rc, const worldfeat::FittedFeatures& fitted);

}  // namespace worldflow::cli
