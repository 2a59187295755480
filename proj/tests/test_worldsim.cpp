// Copyright (C) 2026 The worldflow Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "worldflow/worldsim/world.hpp"

#include <cmath>
#include <filesystem>

using namespace worldflow;
using namespace worldflow::worldsim;

namespace {

WorldConfig still_world() {
    WorldConfig c;
    c.gravity = 0.0;
    c.restitution = 1.0;
    return c;
}

WorldState single(double x, double y, double vx, double vy, double r = 3.0) { return WorldState{{Disk{x, y, vx, vy, r, 0}}}; }

}  // namespace

TEST_CASE("step_dynamics examples") {
    SUBCASE("disk at rest without gravity stays put") {
        const WorldState s = single(10, 10, 0, 0);
        const WorldState n = step_dynamics(s, still_world());
        CHECK(n.disks[0].x == s.disks[0].x);
        CHECK(n.disks[0].y == s.disks[0].y);
        CHECK(n.disks[0].vx == 0.0);
        CHECK(n.disks[0].vy == 0.0);
    }
    SUBCASE("elastic floor bounce reverses vy") {
        WorldConfig c = still_world();
        const WorldState s = single(10, 32 - 3 - 1, 0, 3);
        const WorldState n = step_dynamics(s, c);
        CHECK(n.disks[0].vy == -3.0);
        CHECK(n.disks[0].y + n.disks[0].r <= 32.0);
    }
    SUBCASE("equal-mass head-on collision") {
        // Closed-form 1-D elastic collision for masses m1, m2.
        const double m1 = 1, m2 = 1, v1 = 2, v2 = -1;
        const double v1_expected = ((m1 - m2) * v1 + 2 * m2 * v2) / (m1 + m2);
        const double v2_expected = ((m2 - m1) * v2 + 2 * m1 * v1) / (m1 + m2);
        WorldState s{{Disk{10, 16, v1, 0, 3, 0}, Disk{16.5, 16, v2, 0, 3, 1}}};
        const WorldState n = step_dynamics(s, still_world());
        CHECK(n.disks[0].vx == doctest::Approx(v1_expected).epsilon(1e-12));
        CHECK(n.disks[1].vx == doctest::Approx(v2_expected).epsilon(1e-12));
        CHECK(v1_expected == -1.0);
        CHECK(v2_expected == 2.0);
    }
}

TEST_CASE("analytic flow examples") {
    const int H = 32, W = 32;
    SUBCASE("static scene") {
        const WorldState s = single(12, 12, 0, 0);
        const ArrayF f = analytic_flow(s, step_dynamics(s, still_world()), H, W);
        CHECK((f.values() == 0.0f).all());
    }
    SUBCASE("rigid translation") {
        const WorldState s = single(12, 12, 2, 0);
        const ArrayF f = analytic_flow(s, step_dynamics(s, still_world()), H, W);
        for (int i = 0; i < H; ++i)
            for (int j = 0; j < W; ++j) {
                const bool inside = visible_disk(s, i, j) == 0;
                CHECK(f.at(i, j, 0) == (inside ? 2.0f : 0.0f));
                CHECK(f.at(i, j, 1) == 0.0f);
            }
    }
    SUBCASE("free fall under gravity") {
        WorldConfig c = still_world();
        c.gravity = 1.0;
        c.height = 64;
        c.frames = 6;
        c.n_objects = 1;
        // Independent integration: position advances by the current
        // velocity, then velocity gains g.
        double y = 8, vy = 0;
        WorldState s = single(16, y, 0, vy);
        for (int k = 0; k + 1 < c.frames; ++k) {
            const double y_next = y + vy;
            const WorldState n = step_dynamics(s, c);
            const ArrayF f = analytic_flow(s, n, c.height, c.width);
            const int row = int(s.disks[0].y), col = 16;
            CHECK(f.at(row, col, 1) == doctest::Approx(y_next - y));
            CHECK(f.at(row, col, 1) == doctest::Approx(k * c.gravity));
            y = y_next;
            vy += c.gravity;
            s = n;
        }
    }
}

TEST_CASE("generate_episode") {
    SUBCASE("no objects") {
        WorldConfig c;
        c.n_objects = 0;
        const Episode ep = generate_episode(c);
        CHECK((ep.video.values() == 0.0f).all());
        CHECK((ep.flow.values() == 0.0f).all());
        for (std::size_t p = 0; p < ep.semantic.size() / semantic_raw_channels(); ++p) {
            CHECK(ep.semantic[p * semantic_raw_channels()] == 1.0f);
        }
        CHECK(Vocabulary::decode(ep.prompt) == "zero nogravity");
    }
    SUBCASE("determinism") {
        WorldConfig c;
        c.n_objects = 3;
        c.seed = 1234;
        const Episode a = generate_episode(c), b = generate_episode(c);
        CHECK(a.video == b.video);
        CHECK(a.flow == b.flow);
        CHECK(a.semantic == b.semantic);
        CHECK(a.spatial == b.spatial);
        CHECK(a.prompt == b.prompt);
        c.seed = 1235;
        CHECK_FALSE(generate_episode(c).video == a.video);
    }
    SUBCASE("kinetic energy is conserved with e=1 and no gravity") {
        WorldConfig c;
        c.n_objects = 4;
        c.frames = 120;
        c.speed_max = 3.0;
        int collisions_seen = 0;
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            c.seed = seed;
            const Episode ep = generate_episode(c);
            const double e0 = kinetic_energy(ep.states.front());
            for (std::size_t t = 1; t < ep.states.size(); ++t) {
                CHECK(std::abs(kinetic_energy(ep.states[t]) - e0) <= 1e-9);
                for (std::size_t k = 0; k < ep.states[t].disks.size(); ++k) {
                    const auto& a = ep.states[t - 1].disks[k];
                    const auto& b = ep.states[t].disks[k];
                    if (std::abs(std::hypot(a.vx, a.vy) - std::hypot(b.vx, b.vy)) > 1e-9) ++collisions_seen;
                }
            }
        }
        CHECK(collisions_seen > 0);
    }
    SUBCASE("prompt grammar") {
        WorldConfig c;
        c.n_objects = 2;
        c.gravity = 0.5;
        const Episode ep = generate_episode(c);
        REQUIRE(ep.prompt.size() == 4);
        CHECK(ep.prompt[0] == Vocabulary::id("two"));
        CHECK(ep.prompt[3] == Vocabulary::id("gravity"));
        CHECK(Vocabulary::size() <= 64);
        CHECK(Vocabulary::encode(Vocabulary::decode(ep.prompt)) == ep.prompt);
    }
}

TEST_CASE("semantic one-hot partition and flow consistency") {
    WorldConfig c;
    c.n_objects = 3;
    c.speed_max = 2.5;
    const std::size_t H = 32, W = 32, D = semantic_raw_channels();
    for (std::uint64_t seed = 10; seed < 16; ++seed) {
        c.seed = seed;
        const Episode ep = generate_episode(c);
        for (std::size_t p = 0; p < ep.semantic.size() / D; ++p) {
            float sum = 0;
            int ones = 0;
            for (std::size_t k = 0; k < semantic_classes(); ++k) {
                sum += ep.semantic[p * D + k];
                ones += ep.semantic[p * D + k] == 1.0f;
            }
            CHECK(sum == 1.0f);
            CHECK(ones == 1);
        }
        // Forward-warp object pixels of frame t by the flow; where the
        // target pixel still shows the same object the color must agree.
        std::size_t checked = 0, landed = 0;
        for (std::size_t t = 0; t + 1 < std::size_t(c.frames); ++t) {
            for (int i = 0; i < int(H); ++i)
                for (int j = 0; j < int(W); ++j) {
                    const int k = visible_disk(ep.states[t], i, j);
                    if (k < 0) continue;
                    const int ti = i + int(std::lround(ep.flow.at(t, i, j, 1)));
                    const int tj = j + int(std::lround(ep.flow.at(t, i, j, 0)));
                    if (ti < 0 || tj < 0 || ti >= int(H) || tj >= int(W)) continue;
                    ++checked;
                    if (visible_disk(ep.states[t + 1], ti, tj) != k) continue;
                    ++landed;
                    for (std::size_t ch = 0; ch < 3; ++ch) {
                        CHECK(std::abs(ep.video.at(t + 1, ti, tj, ch) - ep.video.at(t, i, j, ch)) <= 1.0f / 255.0f);
                    }
                }
        }
        CHECK(double(landed) >= 0.85 * double(checked));
    }
}

TEST_CASE("config validation and placement failure") {
    WorldConfig c;
    c.frames = 1;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = WorldConfig{};
    c.restitution = 1.5;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = WorldConfig{};
    c.radius_max = 20;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);

    c = WorldConfig{};
    c.height = c.width = 16;
    c.n_objects = 4;
    c.radius_min = c.radius_max = 7.0;
    CHECK_THROWS_AS(generate_episode(c), std::runtime_error);
}

TEST_CASE("episode files round-trip") {
    WorldConfig c;
    c.n_objects = 2;
    const Episode ep = generate_episode(c);
    const auto dir = std::filesystem::temp_directory_path() / "worldflow_test_episode";
    std::filesystem::remove_all(dir);
    save_episode(dir, ep);
    const Episode back = load_episode(dir);
    CHECK(back.video == ep.video);
    CHECK(back.flow == ep.flow);
    CHECK(back.semantic == ep.semantic);
    CHECK(back.spatial == ep.spatial);
    CHECK(back.prompt == ep.prompt);
    std::filesystem::remove_all(dir);
}
