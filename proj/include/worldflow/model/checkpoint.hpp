// Copyright (C) 2026 The worldflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "worldflow/model/model.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

namespace worldflow::model {

/// Model parameters plus any training state (optimizer moments, step).
struct Checkpoint {
    ModelParams<float> params;
    std::map<std::string, ArrayF> state;
    std::uint64_t step = 0;
    std::uint64_t fingerprint = 0;  // config hash of the producing run
};

// "DWCK", u32 version, u32 x4 layout, u32 x10 architecture, u64 step,
// u64 fingerprint, u32 count, then (string name, DWND array) pairs.
// Parameter names carry a "param." prefix, training state "state.".
void write_checkpoint(std::ostream& os, const Checkpoint& ck);
Checkpoint read_checkpoint(std::istream& is);

/// Writes through a temporary file and renames, so readers never see a
/// partial checkpoint.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace worldflow::model
