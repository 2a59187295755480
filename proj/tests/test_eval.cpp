// Copyright (C) 2026 The worldflow Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "worldflow/eval/eval.hpp"
#include "worldflow/worldfeat/pipeline.hpp"

#include <json.hpp>

#include <cmath>

using namespace worldflow;
using namespace worldflow::eval;

namespace {

worldsim::Episode oracle_episode(std::uint64_t seed) {
    worldsim::WorldConfig wc;
    wc.seed = seed;
    wc.n_objects = int(1 + seed % 4);
    wc.gravity = seed % 3 == 0 ? 0.3 : 0.0;
    return worldsim::generate_episode(wc);
}

// One disk of palette color 0 per frame, centers given per frame.
ArrayF disk_video(const std::vector<std::array<double, 2>>& centers, double r, std::size_t H = 32, std::size_t W = 32) {
    ArrayF v({centers.size(), H, W, 3});
    const auto rgb = worldsim::palette()[0].rgb;
    for (std::size_t f = 0; f < centers.size(); ++f) {
        for (std::size_t y = 0; y < H; ++y) {
            for (std::size_t x = 0; x < W; ++x) {
                const double dx = double(x) + 0.5 - centers[f][0], dy = double(y) + 0.5 - centers[f][1];
                if (dx * dx + dy * dy > r * r) continue;
                for (std::size_t c = 0; c < 3; ++c) v.at(f, y, x, c) = rgb[c];
            }
        }
    }
    return v;
}

}  // namespace

TEST_CASE("block support recovers integer translation of texture") {
    Rng rng(3);
    const ArrayF tex = uniform<float>({1, 24, 24, 3}, rng, 0.0f, 1.0f);
    ArrayF video({2, 16, 16, 3});
    for (std::size_t y = 0; y < 16; ++y)
        for (std::size_t x = 0; x < 16; ++x)
            for (std::size_t c = 0; c < 3; ++c) {
                video.at(0, y, x, c) = tex.at(0, y + 4, x + 4, c);
                video.at(1, y, x, c) = tex.at(0, y + 4 + 1, x + 4 - 2, c);  // content moves by (+2, -1)
            }
    BlockMatchParams p;
    p.support = MatchSupport::block;
    p.subpixel = false;
    const ArrayF flow = block_matching_flow(video, p);
    CHECK(flow.shape() == Shape{1, 16, 16, 2});
    for (std::size_t y = 4; y < 12; ++y) {
        for (std::size_t x = 4; x < 12; ++x) {
            CHECK(flow.at(0, y, x, 0) == 2.0f);
            CHECK(flow.at(0, y, x, 1) == -1.0f);
        }
    }
    p.block = 5;
    CHECK_THROWS_AS(block_matching_flow(video, p), std::invalid_argument);
}

TEST_CASE("segment support tracks a disk with subpixel motion") {
    const ArrayF video = disk_video({{12.0, 14.0}, {13.5, 13.25}}, 5.0);
    const ArrayF flow = block_matching_flow(video);
    CHECK(std::abs(flow.at(0, 14, 12, 0) - 1.5f) <= 0.25f);
    CHECK(std::abs(flow.at(0, 14, 12, 1) + 0.75f) <= 0.25f);
    CHECK(flow.at(0, 0, 0, 0) == 0.0f);  // background is static
    CHECK(flow.at(0, 0, 0, 1) == 0.0f);
    CHECK_THROWS_AS(block_matching_flow(slice(video, 0, 0, 1)), ShapeError);
}

TEST_CASE("flow consistency of ground-truth episodes") {
    const worldfeat::FeatureConfig fc;
    for (std::uint64_t seed : {0u, 3u, 7u, 11u, 20u}) {
        const worldsim::Episode ep = oracle_episode(seed);
        const ArrayF latent = worldfeat::temporal_latent(ep.flow, fc);
        const double s = flow_consistency(ep.video, latent, fc.codec, fc.flow);
        CAPTURE(seed);
        CHECK(s >= 0.99);
        CHECK(s <= 1.0);
        CHECK(flow_consistency(ep.video, latent, fc.codec, fc.flow) == s);
    }
}

TEST_CASE("flow consistency on a static video") {
    const worldfeat::FeatureConfig fc;
    const ArrayF still = disk_video({{10, 10}, {10, 10}, {10, 10}, {10, 10}}, 4.0);
    const ArrayF zero_flow = codec::encode(ArrayF({4, 32, 32, 3}), fc.codec).data;
    CHECK(flow_consistency(still, zero_flow, fc.codec) == 1.0);

    ArrayF gray({4, 32, 32, 3});
    gray.values().setConstant(0.5f);
    const double mismatch = flow_consistency(still, codec::encode(gray, fc.codec).data, fc.codec);
    CHECK(mismatch < 1.0);
    CHECK(mismatch == doctest::Approx(0.5));

    CHECK_THROWS_WITH(flow_consistency(still, ArrayF({4, 8, 8, 12}), fc.codec), doctest::Contains("channels"));
    CHECK_THROWS_AS(flow_consistency(still, ArrayF({4, 4, 4, 48}), fc.codec), ShapeError);
}

TEST_CASE("subject consistency proxy") {
    SUBCASE("oracle episodes") {
        for (std::uint64_t seed : {1u, 2u, 5u, 9u}) {
            const SubjectScore s = subject_consistency_proxy(oracle_episode(seed).video);
            CAPTURE(seed);
            CHECK_FALSE(s.no_segments);
            CHECK(s.score >= 0.8);
        }
    }
    SUBCASE("repeated frame") {
        const ArrayF v = disk_video({{9, 9}, {9, 9}, {9, 9}}, 5.0);
        const SubjectScore s = subject_consistency_proxy(v);
        CHECK(s.score == 1.0);
    }
    SUBCASE("translation is discounted by centroid alignment") {
        CHECK(subject_consistency_proxy(disk_video({{9, 9}, {12, 10}}, 5.0)).score == 1.0);
    }
    SUBCASE("a vanishing subject scores zero for its slot") {
        ArrayF v = disk_video({{9, 9}, {9, 9}}, 5.0);
        for (std::size_t i = v.size() / 2; i < v.size(); ++i) v[i] = 0.0f;
        CHECK(subject_consistency_proxy(v).score == 0.0);
    }
    SUBCASE("uniform noise") {
        Rng rng(17);
        const SubjectScore s = subject_consistency_proxy(uniform<float>({8, 32, 32, 3}, rng, 0.0f, 1.0f));
        CHECK(s.score < 0.3);
    }
    SUBCASE("no segments") {
        const SubjectScore s = subject_consistency_proxy(ArrayF({4, 8, 8, 3}));
        CHECK(s.no_segments);
        CHECK(s.score == 0.0);
    }
    SUBCASE("bit-identical inputs give bit-identical scores") {
        const ArrayF v = oracle_episode(4).video;
        const ArrayF copy = v;
        CHECK(subject_consistency_proxy(v).score == subject_consistency_proxy(copy).score);
    }
}

TEST_CASE("base equivalence report") {
    model::ModelConfig c;
    c.hidden = 16;
    c.layers = 1;
    c.heads = 2;
    c.mlp_ratio = 2;
    c.time_freq = 8;
    c.frames = 2;
    c.height = 2;
    c.width = 2;
    model::ModelParams<float> base = model::init_params<float>(c, model::ChannelLayout::video_only(12), 3);
    Rng rng(4);
    for (auto& [name, t] : base.tensors) t = uniform<float>(t.shape(), rng, -0.3f, 0.3f);
    model::ModelParams<float> joint = model::init_expanded(base, model::ChannelLayout{12, 12, 4, 4});

    const EquivalenceReport fresh = base_equivalence_report(joint, base, 10, 1);
    CHECK(fresh.trials == 10);
    CHECK_FALSE(fresh.vacuous);
    CHECK(fresh.max_deviation <= 1e-6);
    CHECK(fresh.world_max == 0.0);

    const EquivalenceReport none = base_equivalence_report(joint, base, 0, 1);
    CHECK(none.vacuous);
    CHECK(none.max_deviation == 0.0);

    joint["in.w"].values().setConstant(0.05f);
    const EquivalenceReport trained = base_equivalence_report(joint, base, 3, 1);
    CHECK(trained.max_deviation > 1e-6);

    CHECK_THROWS_AS(base_equivalence_report(base, joint, 1, 1), std::invalid_argument);
}

TEST_CASE("metric report") {
    const MetricReport r = MetricReport::from("flow_consistency", {0.5, 0.7, 0.9}, 0xabcdef);
    CHECK(r.mean == doctest::Approx(0.7));
    CHECK(r.std == doctest::Approx(std::sqrt(0.08 / 3)));
    const auto j = nlohmann::json::parse(r.json());
    CHECK(j["metric"] == "flow_consistency");
    CHECK(j["values"].size() == 3);
    CHECK(j["fingerprint"] == "0000000000abcdef");
    CHECK(j["mean"].get<double>() == r.mean);

    const std::string table = summary_table({r, MetricReport::from("subject_consistency", {1.0}, 1)});
    CHECK(table.find("flow_consistency") != std::string::npos);
    CHECK(table.find("subject_consistency") != std::string::npos);
    CHECK(table.find("0.700000") != std::string::npos);

    CHECK_THROWS_AS(MetricReport::from("x", {1.0, NAN}, 0), std::invalid_argument);
    CHECK(MetricReport::from("empty", {}, 0).mean == 0.0);
}
