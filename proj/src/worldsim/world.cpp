// Copyright (C) 2026 The worldflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "worldflow/worldsim/world.hpp"

#include "worldflow/numerics/io.hpp"
#include "worldflow/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace worldflow::worldsim {

namespace {

constexpr int kPlacementRetries = 100;
const char* const kCountWords[] = {"zero", "one", "two", "three", "four"};

bool covers(const Disk& d, double px, double py) {
    const double dx = px - d.x, dy = py - d.y;
    return dx * dx + dy * dy <= d.r * d.r;
}

void reflect_axis(double& pos, double& vel, double r, double extent, double e) {
    if (pos - r < 0) {
        pos = r + e * (r - pos);
        if (vel < 0) vel = -e * vel;
    } else if (pos + r > extent) {
        pos = (extent - r) - e * (pos + r - extent);
        if (vel > 0) vel = -e * vel;
    }
}

}  // namespace

const std::vector<PaletteColor>& palette() {
    static const std::vector<PaletteColor> colors = {
        {"red", {1.0f, 0.0f, 0.0f}},  {"orange", {1.0f, 0.5f, 0.0f}}, {"yellow", {1.0f, 1.0f, 0.0f}},
        {"green", {0.0f, 1.0f, 0.0f}}, {"cyan", {0.0f, 1.0f, 1.0f}},   {"blue", {0.0f, 0.0f, 1.0f}},
        {"purple", {0.5f, 0.0f, 1.0f}}, {"magenta", {1.0f, 0.0f, 1.0f}},
    };
    return colors;
}

std::size_t semantic_classes() { return palette().size() + 1; }
std::size_t semantic_raw_channels() { return semantic_classes() + 2; }

void WorldConfig::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("WorldConfig: " + what); };
    if (frames < 2) fail("frames must be >= 2");
    if (height < 16 || width < 16) fail("height and width must be >= 16");
    if (n_objects < 0 || n_objects > int(kMaxObjects)) fail("n_objects must be in [0, 4]");
    if (!(restitution >= 0.0 && restitution <= 1.0)) fail("restitution must be in [0, 1]");
    if (!(radius_min > 0.0) || radius_max < radius_min) fail("radius range must satisfy 0 < min <= max");
    if (2 * radius_max >= std::min(height, width)) fail("object radii must fit inside the frame");
    if (!std::isfinite(gravity)) fail("gravity must be finite");
    if (!(speed_max >= 0.0)) fail("speed_max must be non-negative");
    if (palette_size < std::size_t(n_objects) || palette_size > palette().size()) {
        fail("palette_size must cover n_objects distinct colors and not exceed the palette");
    }
}

WorldState step_dynamics(const WorldState& state, const WorldConfig& config) {
    WorldState next = state;
    const double e = config.restitution;
    for (auto& d : next.disks) {
        d.x += d.vx;
        d.y += d.vy;
        d.vy += config.gravity;
        reflect_axis(d.x, d.vx, d.r, config.width, e);
        reflect_axis(d.y, d.vy, d.r, config.height, e);
    }
    auto& disks = next.disks;
    for (std::size_t i = 0; i < disks.size(); ++i) {
        for (std::size_t j = i + 1; j < disks.size(); ++j) {
            Disk& a = disks[i];
            Disk& b = disks[j];
            const double dx = b.x - a.x, dy = b.y - a.y;
            const double dist = std::hypot(dx, dy);
            if (dist >= a.r + b.r || dist == 0.0) continue;
            const double nx = dx / dist, ny = dy / dist;
            const double va = a.vx * nx + a.vy * ny;
            const double vb = b.vx * nx + b.vy * ny;
            if (vb - va >= 0) continue;  // separating
            const double va_new = 0.5 * ((1 - e) * va + (1 + e) * vb);
            const double vb_new = 0.5 * ((1 + e) * va + (1 - e) * vb);
            a.vx += (va_new - va) * nx;
            a.vy += (va_new - va) * ny;
            b.vx += (vb_new - vb) * nx;
            b.vy += (vb_new - vb) * ny;
        }
    }
    return next;
}

int visible_disk(const WorldState& state, int row, int col) {
    const double px = col + 0.5, py = row + 0.5;
    for (std::size_t k = 0; k < state.disks.size(); ++k) {
        if (covers(state.disks[k], px, py)) return int(k);
    }
    return -1;
}

ArrayF analytic_flow(const WorldState& now, const WorldState& next, int height, int width) {
    if (now.disks.size() != next.disks.size()) throw std::invalid_argument("analytic_flow: states differ in object count");
    ArrayF flow({std::size_t(height), std::size_t(width), 2});
    for (int i = 0; i < height; ++i) {
        for (int j = 0; j < width; ++j) {
            const int k = visible_disk(now, i, j);
            if (k < 0) continue;
            flow.at(i, j, 0) = float(next.disks[std::size_t(k)].x - now.disks[std::size_t(k)].x);
            flow.at(i, j, 1) = float(next.disks[std::size_t(k)].y - now.disks[std::size_t(k)].y);
        }
    }
    return flow;
}

double kinetic_energy(const WorldState& state) {
    double e = 0;
    for (const auto& d : state.disks) e += 0.5 * (d.vx * d.vx + d.vy * d.vy);
    return e;
}

const std::vector<std::string>& Vocabulary::words() {
    static const std::vector<std::string> table = [] {
        std::vector<std::string> w{"<null>"};
        for (const char* c : kCountWords) w.emplace_back(c);
        for (const auto& p : palette()) w.emplace_back(p.name);
        w.emplace_back("gravity");
        w.emplace_back("nogravity");
        return w;
    }();
    return table;
}

int Vocabulary::id(std::string_view word) {
    const auto& w = words();
    auto it = std::find(w.begin(), w.end(), word);
    if (it == w.end()) throw std::invalid_argument("unknown prompt word '" + std::string(word) + "'");
    return int(it - w.begin());
}

std::vector<int> Vocabulary::encode(std::string_view text) {
    std::istringstream is{std::string(text)};
    std::vector<int> tokens;
    for (std::string word; is >> word;) tokens.push_back(id(word));
    if (tokens.empty()) tokens.push_back(kNull);
    return tokens;
}

std::string Vocabulary::decode(const std::vector<int>& tokens) {
    std::string out;
    for (int t : tokens) {
        if (t < 0 || std::size_t(t) >= size()) throw std::invalid_argument("token id out of range");
        if (!out.empty()) out += ' ';
        out += words()[std::size_t(t)];
    }
    return out;
}

std::vector<int> describe(const WorldState& state, const WorldConfig& config) {
    std::vector<int> tokens{Vocabulary::id(kCountWords[state.disks.size()])};
    for (const auto& d : state.disks) tokens.push_back(Vocabulary::id(palette()[std::size_t(d.color)].name));
    tokens.push_back(Vocabulary::id(config.gravity != 0.0 ? "gravity" : "nogravity"));
    return tokens;
}

WorldState initial_state(const WorldConfig& config) {
    config.validate();
    for (int attempt = 0; attempt < kPlacementRetries; ++attempt) {
        Rng rng = substream(config.seed, "placement", std::uint64_t(attempt));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::vector<int> colors(config.palette_size);
        std::iota(colors.begin(), colors.end(), 0);
        std::shuffle(colors.begin(), colors.end(), rng);

        WorldState s;
        bool ok = true;
        for (int k = 0; k < config.n_objects && ok; ++k) {
            Disk d;
            d.r = config.radius_min + (config.radius_max - config.radius_min) * unit(rng);
            d.x = d.r + (config.width - 2 * d.r) * unit(rng);
            d.y = d.r + (config.height - 2 * d.r) * unit(rng);
            const double speed = config.speed_max * std::sqrt(unit(rng));
            const double angle = 2 * std::numbers::pi * unit(rng);
            d.vx = speed * std::cos(angle);
            d.vy = speed * std::sin(angle);
            d.color = colors[std::size_t(k)];
            for (const auto& o : s.disks) {
                if (std::hypot(o.x - d.x, o.y - d.y) < o.r + d.r) ok = false;
            }
            s.disks.push_back(d);
        }
        if (ok) return s;
    }
    throw std::runtime_error("generate_episode: could not place objects without overlap after " +
                             std::to_string(kPlacementRetries) + " attempts");
}

void render_frame(const WorldState& state, const WorldConfig& config, float* rgb, float* semantic, float* spatial) {
    const int H = config.height, W = config.width;
    const std::size_t n_sem = semantic_raw_channels();
    for (int i = 0; i < H; ++i) {
        for (int j = 0; j < W; ++j) {
            const std::size_t p = std::size_t(i) * std::size_t(W) + std::size_t(j);
            const double px = j + 0.5, py = i + 0.5;
            const int k = visible_disk(state, i, j);
            float* c = rgb + 3 * p;
            float* sem = semantic + n_sem * p;
            float* spa = spatial + kSpatialRawChannels * p;
            std::fill(sem, sem + n_sem, 0.0f);
            std::fill(spa, spa + kSpatialRawChannels, 0.0f);
            const double xn = (px - 0.5 * W) / W, yn = (py - 0.5 * H) / H;
            if (k < 0) {
                std::copy(kBackground.begin(), kBackground.end(), c);
                sem[0] = 1.0f;
                double gap = std::max(W, H);
                for (const auto& d : state.disks) gap = std::min(gap, std::hypot(px - d.x, py - d.y) - d.r);
                const double depth = 1.0;
                spa[1] = float(-gap / W);
                spa[3] = float(depth);
                spa[4] = float(xn * depth);
                spa[5] = float(yn * depth);
                spa[6] = float(depth);
                spa[9] = -1.0f;
                continue;
            }
            const Disk& d = state.disks[std::size_t(k)];
            const auto& col = palette()[std::size_t(d.color)].rgb;
            std::copy(col.begin(), col.end(), c);
            const double ox = (px - d.x) / d.r, oy = (py - d.y) / d.r;
            const double rho2 = std::min(1.0, ox * ox + oy * oy);
            sem[1 + std::size_t(d.color)] = 1.0f;
            sem[semantic_classes()] = float(ox);
            sem[semantic_classes() + 1] = float(oy);
            const double bulge = std::sqrt(1.0 - rho2);
            const double depth = 0.5 + 0.1 * k - bulge * d.r / W;
            spa[0] = 1.0f;
            spa[1] = float((d.r - std::sqrt(rho2) * d.r) / W);
            spa[2] = float(k + 1) / float(kMaxObjects);
            spa[3] = float(depth);
            spa[4] = float(xn * depth);
            spa[5] = float(yn * depth);
            spa[6] = float(depth);
            spa[7] = float(ox);
            spa[8] = float(oy);
            spa[9] = float(-bulge);
        }
    }
}

Episode generate_episode(const WorldConfig& config) {
    config.validate();
    const std::size_t F = std::size_t(config.frames), H = std::size_t(config.height), W = std::size_t(config.width);
    Episode ep;
    ep.states.push_back(initial_state(config));
    for (std::size_t t = 1; t < F; ++t) ep.states.push_back(step_dynamics(ep.states.back(), config));

    ep.video = ArrayF({F, H, W, 3});
    ep.semantic = ArrayF({F, H, W, semantic_raw_channels()});
    ep.spatial = ArrayF({F, H, W, kSpatialRawChannels});
    ep.flow = ArrayF({F - 1, H, W, 2});
    for (std::size_t t = 0; t < F; ++t) {
        render_frame(ep.states[t], config, ep.video.data() + t * H * W * 3,
                     ep.semantic.data() + t * H * W * semantic_raw_channels(),
                     ep.spatial.data() + t * H * W * kSpatialRawChannels);
        if (t + 1 < F) {
            ArrayF f = analytic_flow(ep.states[t], ep.states[t + 1], config.height, config.width);
            std::copy_n(f.data(), f.size(), ep.flow.data() + t * H * W * 2);
        }
    }
    ep.prompt = describe(ep.states.front(), config);
    return ep;
}

void save_episode(const std::filesystem::path& dir, const Episode& episode) {
    std::filesystem::create_directories(dir);
    save_array(dir / "video.dwnd", episode.video);
    save_array(dir / "flow.dwnd", episode.flow);
    save_array(dir / "semantic.dwnd", episode.semantic);
    save_array(dir / "spatial.dwnd", episode.spatial);
    std::ofstream os(dir / "prompt.txt", std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + (dir / "prompt.txt").string());
    os << Vocabulary::decode(episode.prompt) << '\n';
}

Episode load_episode(const std::filesystem::path& dir) {
    Episode ep;
    ep.video = load_array<float>(dir / "video.dwnd");
    ep.flow = load_array<float>(dir / "flow.dwnd");
    ep.semantic = load_array<float>(dir / "semantic.dwnd");
    ep.spatial = load_array<float>(dir / "spatial.dwnd");
    std::ifstream is(dir / "prompt.txt");
    if (!is) throw std::runtime_error("missing prompt file in " + dir.string());
    std::string line;
    std::getline(is, line);
    ep.prompt = Vocabulary::encode(line);
    return ep;
}

}  // namespace worldflow::worldsim
