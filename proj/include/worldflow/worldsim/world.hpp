// Copyright (C) 2026 The worldflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "worldflow/numerics/ndarray.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace worldflow::worldsim {

struct PaletteColor {
    std::string_view name;
    std::array<float, 3> rgb;
};

/// Fixed palette of distinct hues; background is black.
const std::vector<PaletteColor>& palette();
inline constexpr std::array<float, 3> kBackground{0.0f, 0.0f, 0.0f};
inline constexpr std::size_t kMaxObjects = 4;

/// Identity classes: background plus one per palette color.
std::size_t semantic_classes();
/// one-hot identity + (dx, dy) centroid offset in radii.
std::size_t semantic_raw_channels();
/// occupancy, signed boundary distance, depth-order index, depth,
/// point map (X, Y, Z), surface normal (nx, ny, nz).
inline constexpr std::size_t kSpatialRawChannels = 10;

struct WorldConfig {
    int frames = 8;
    int height = 32;
    int width = 32;
    int n_objects = 2;
    double gravity = 0.0;       // px / frame^2, +y is down
    double restitution = 1.0;
    double radius_min = 3.0;
    double radius_max = 6.0;
    double speed_max = 2.0;     // initial speed bound, px / frame
    std::size_t palette_size = 8;
    std::uint64_t seed = 42;

    /// Throws std::invalid_argument naming the violated constraint.
    void validate() const;
};

struct Disk {
    double x = 0, y = 0;    // center, px
    double vx = 0, vy = 0;  // px / frame
    double r = 1;
    int color = 0;          // palette index
};

/// Disks in depth order: index 0 is nearest to the camera.
struct WorldState {
    std::vector<Disk> disks;
};

/// Advance one frame: move by velocity, apply gravity, reflect off walls
/// (normal component scaled by restitution), then resolve equal-mass disk
/// contacts along the contact normal.
WorldState step_dynamics(const WorldState& state, const WorldConfig& config);

/// Index of the nearest disk covering pixel (row, col), or -1.
int visible_disk(const WorldState& state, int row, int col);

/// H x W x 2 displacement (u, v) of the visible object per pixel; zero on
/// background.
ArrayF analytic_flow(const WorldState& now, const WorldState& next, int height, int width);

double kinetic_energy(const WorldState& state);

/// Prompt vocabulary. Token 0 is the null prompt used for unconditional
/// guidance branches.
struct Vocabulary {
    static constexpr int kNull = 0;
    static const std::vector<std::string>& words();
    static std::size_t size() { return words().size(); }
    static int id(std::string_view word);
    static std::vector<int> encode(std::string_view text);
    static std::string decode(const std::vector<int>& tokens);
};

std::vector<int> describe(const WorldState& state, const WorldConfig& config);

struct Episode {
    ArrayF video;        // F x H x W x 3 in [0,1]
    ArrayF flow;         // (F-1) x H x W x 2
    ArrayF semantic;     // F x H x W x semantic_raw_channels()
    ArrayF spatial;      // F x H x W x kSpatialRawChannels
    std::vector<int> prompt;
    std::vector<WorldState> states;
};

/// Places disks without overlap; retries on fresh substreams, throws after
/// 100 failed attempts.
WorldState initial_state(const WorldConfig& config);

Episode generate_episode(const WorldConfig& config);

/// Renders one state into video/semantic/spatial frame slices.
void render_frame(const WorldState& state, const WorldConfig& config, float* rgb, float* semantic, float* spatial);

void save_episode(const std::filesystem::path& dir, const Episode& episode);
/// Loads arrays and prompt; trajectory states are not persisted.
Episode load_episode(const std::filesystem::path& dir);

}  // namespace worldflow::worldsim
