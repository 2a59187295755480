// Copyright (C) 2026 The worldflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "worldflow/model/model.hpp"
#include "worldflow/sample/sample.hpp"
#include "worldflow/train/train.hpp"
#include "worldflow/worldfeat/pipeline.hpp"
#include "worldflow/worldsim/world.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

namespace worldflow::cli {

/// Bad configuration or arguments; the CLI maps it to exit code 1.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ConfigEntry {
    std::string value;
    int line = 0;
};

/// "section.key" -> value. Lines are `[section]`, `key = value`, blanks and
/// `#` comments. Duplicate keys and keys outside a section are errors.
std::map<std::string, ConfigEntry> parse_config_text(const std::string& text, const std::string& origin = "config");

struct DataConfig {
    std::size_t episodes = 256;
    std::size_t objects_min = 1;
    std::size_t objects_max = 4;
    double gravity_fraction = 0.5;  // episodes with gravity on use world.gravity
};

struct EvalConfig {
    std::size_t prompts = 32;  // held-out prompts for sampling metrics
    std::size_t equivalence_trials = 100;
};

enum class TrainInit { base, fresh };

/// Gravity here is the magnitude used by episodes that have it on.
inline worldsim::WorldConfig desk_world() {
    worldsim::WorldConfig w;
    w.gravity = 0.3;
    return w;
}

struct RunConfig {
    std::uint64_t seed = 42;
    std::filesystem::path root = "runs/desk";

    worldsim::WorldConfig world = desk_world();  // n_objects and seed are set per episode
    DataConfig data;
    codec::CodecConfig codec;
    model::ChannelLayout layout = model::ChannelLayout::desk();
    worldfeat::FlowRgbParams flow;
    std::size_t k_semantic = 8, k_spatial = 8;
    double feature_eps = worldfeat::Standardizer::kDefaultEps;
    model::ModelConfig model;  // grid extents are derived from world and codec
    // Base pretraining uses the train optimizer settings except for these.
    std::size_t pretrain_steps = 4000;
    double pretrain_lr = 3e-3;
    std::uint64_t pretrain_warmup = 100;
    train::TrainConfig train;
    TrainInit init = TrainInit::base;
    sample::GuidanceConfig guidance;
    std::string sample_prompts;  // ';'-separated; empty: held-out prompts
    std::size_t sample_count = 4;
    EvalConfig eval;

    /// Cross-field checks; throws UsageError naming the violated constraint.
    void validate() const;

    /// Every setting except paths as sorted `section.key = value` lines.
    std::string canonical() const;
    std::uint64_t fingerprint() const;

    /// Model settings with the latent grid and vocabulary filled in.
    model::ModelConfig model_config() const;
    worldfeat::FeatureConfig features() const;
    train::TrainConfig pretrain() const;
    /// World config of training episode `index` (or held-out when `heldout`).
    worldsim::WorldConfig episode_world(std::size_t index, bool heldout) const;
};

/// Defaults overridden by the entries; unknown keys throw UsageError with
/// the line number.
RunConfig run_config_from(const std::map<std::string, ConfigEntry>& entries);
RunConfig load_run_config(const std::filesystem::path& path);

std::string hex64(std::uint64_t v);

}  // namespace worldflow::cli
