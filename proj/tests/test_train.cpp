// Copyright (C) 2026 The worldflow Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "worldflow/numerics/grad_check.hpp"
#include "worldflow/train/train.hpp"

#include <json.hpp>

#include <fstream>
#include <numbers>

using namespace worldflow;
using namespace worldflow::train;
using model::ModelConfig;

namespace {

ModelConfig small_config() {
    ModelConfig c;
    c.hidden = 16;
    c.layers = 1;
    c.heads = 2;
    c.mlp_ratio = 2;
    c.time_freq = 8;
    c.frames = 2;
    c.height = 2;
    c.width = 2;
    return c;
}

Dataset toy_data(const ChannelLayout& L, const ModelConfig& c, std::size_t n, std::uint64_t seed) {
    Dataset d{L, {}, {}};
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        d.latents.push_back(uniform<float>({c.frames, c.height, c.width, L.total()}, rng, 0.0f, 1.0f));
        d.prompts.push_back({int(1 + i % 5), int(14 + i % 2)});
    }
    return d;
}

TrainConfig quick(std::uint64_t steps) {
    TrainConfig t;
    t.steps = steps;
    t.warmup = 2;
    t.batch = 2;
    t.checkpoint_every = 0;
    return t;
}

std::vector<std::string> read_lines_without_wall(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);) {
        auto j = nlohmann::ordered_json::parse(line);
        j.erase("wall_ms");
        out.push_back(j.dump());
    }
    return out;
}

std::string file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("cca_weight") {
    CHECK(cca_weight(0, 2000, 0.2) == 0.2);
    CHECK(cca_weight(2000, 2000, 0.2) == 0.0);
    CHECK(cca_weight(1000, 2000, 0.2) == doctest::Approx(0.1).epsilon(1e-15));
    double prev = 1.0;
    for (int s = 0; s <= 1000; ++s) {
        const double w = cca_weight(s, 1000, 0.2);
        CHECK(w <= prev);
        CHECK(std::abs(w - 0.1 * (1 + std::cos(std::numbers::pi * s / 1000.0))) <= 1e-12);
        prev = w;
    }
    CHECK(cca_weight(2500, 2000, 0.2) == 0.0);
    CHECK_THROWS_AS(cca_weight(-1, 10, 0.2), std::invalid_argument);

    TrainConfig c;
    c.schedule = Schedule::constant;
    CHECK(lambda_at(c, 1999) == 0.2);
}

TEST_CASE("flow_interpolate") {
    const ArrayF z0({3}, {0.0f, 1.0f, -2.0f}), z1({3}, {2.0f, 5.0f, 4.0f});
    CHECK(flow_interpolate(z0, z1, 0.0f) == z0);
    CHECK(flow_interpolate(z0, z1, 1.0f) == z1);
    CHECK(flow_interpolate(ArrayF({1}, 0.0f), ArrayF({1}, 2.0f), 0.5f)[0] == 1.0f);
    CHECK_THROWS_AS(flow_interpolate(z0, ArrayF({2}), 0.5f), ShapeError);
}

TEST_CASE("joint_loss examples") {
    const ModelConfig mc = small_config();
    const ChannelLayout L{4, 2, 1, 1};
    model::ModelParams<float> p = model::init_params<float>(mc, L, 3);
    for (auto& [name, t] : p.tensors)
        if (!name.ends_with(".g")) t.values().setZero();
    const Shape grid{2, 2, 2, 8};

    Graph<float> g;
    const model::Bound<float> b = model::bind(g, p, true);
    SUBCASE("exact prediction") {
        std::vector<Sample<float>> batch{{ArrayF(grid, 0.7f), ArrayF(grid, 0.7f), 0.3f, {1}, {}}};
        const LossBreakdown br = joint_loss(b, batch, 0.2).breakdown;
        CHECK(br.vae == 0.0);
        CHECK(br.temporal == 0.0);
        CHECK(br.semantic == 0.0);
        CHECK(br.spatial == 0.0);
        CHECK(br.total == 0.0);
    }
    SUBCASE("squared error of a constant miss") {
        std::vector<Sample<float>> batch{{ArrayF(grid, 0.0f), ArrayF(grid, 3.0f), 0.5f, {1}, {}}};
        const LossBreakdown br = joint_loss(b, batch, 0.2).breakdown;
        CHECK(br.vae == 9.0);
        CHECK(br.temporal == 9.0);
        CHECK(br.total == doctest::Approx(9.0 + 0.2 * 27.0).epsilon(1e-6));
        CHECK(std::abs(br.total - br.recomposed()) <= 1e-6 * br.total);
        const LossBreakdown end = joint_loss(b, batch, cca_weight(100, 100, 0.2)).breakdown;
        CHECK(end.total == end.vae);
    }
    SUBCASE("dropped groups leave the loss") {
        Sample<float> s{ArrayF(grid, 0.0f), ArrayF(grid, 3.0f), 0.5f, {1}, {}};
        s.mask.semantic = true;
        const LossBreakdown br = joint_loss(b, {s}, 0.2).breakdown;
        CHECK(br.semantic == 0.0);
        CHECK(br.spatial == 9.0);
    }
}

TEST_CASE("dropout_conditions") {
    auto make = [](std::size_t n) {
        std::vector<Sample<float>> batch(n);
        for (auto& s : batch) s.prompt = {3, 4};
        return batch;
    };
    Rng rng(42);
    SUBCASE("zero probabilities change nothing") {
        auto batch = make(100);
        dropout_conditions(batch, {0, 0, 0, 0}, rng);
        for (const auto& s : batch) {
            CHECK(s.prompt == std::vector<int>{3, 4});
            CHECK_FALSE((s.mask.text || s.mask.temporal || s.mask.semantic || s.mask.spatial));
        }
    }
    SUBCASE("unit probabilities drop everything") {
        auto batch = make(100);
        dropout_conditions(batch, {1, 1, 1, 1}, rng);
        for (const auto& s : batch) {
            CHECK(s.prompt == std::vector<int>{0});
            CHECK((s.mask.text && s.mask.temporal && s.mask.semantic && s.mask.spatial));
        }
    }
    SUBCASE("empirical rates") {
        auto batch = make(10000);
        dropout_conditions(batch, {0.1, 0.1, 0.1, 0.1}, rng);
        double counts[4] = {0, 0, 0, 0};
        for (const auto& s : batch) {
            counts[0] += s.mask.text;
            counts[1] += s.mask.temporal;
            counts[2] += s.mask.semantic;
            counts[3] += s.mask.spatial;
        }
        for (double c : counts) CHECK(std::abs(c / 10000.0 - 0.1) <= 0.01);
    }
}

TEST_CASE("adamw first step") {
    TrainConfig cfg;
    cfg.lr = 0.01;
    cfg.warmup = 0;
    TrainState s;
    s.params.tensors["x.w"] = ArrayF({2}, {1.0f, -2.0f});
    s.params.tensors["x.b"] = ArrayF({2}, {1.0f, -2.0f});
    const ArrayF grad({2}, {0.5f, -4.0f});
    adamw_update(s, {{"x.w", grad}, {"x.b", grad}}, cfg, 0);
    // First bias-corrected step is g / (|g| + eps) = sign(g).
    for (std::size_t i = 0; i < 2; ++i) {
        const double w0 = i == 0 ? 1.0 : -2.0, sign = i == 0 ? 1.0 : -1.0;
        CHECK(s.params.tensors["x.w"][i] == doctest::Approx(w0 - 0.01 * 0.2 * w0 - 0.01 * sign).epsilon(1e-6));
        CHECK(s.params.tensors["x.b"][i] == doctest::Approx(w0 - 0.01 * sign).epsilon(1e-6));
    }
    CHECK(learning_rate(TrainConfig{}, 0) == doctest::Approx(1e-3 / 400));
    CHECK(learning_rate(TrainConfig{}, 399) == 1e-3);
    CHECK(learning_rate(TrainConfig{}, 1500) == 1e-3);
}

TEST_CASE("train_loop contracts") {
    const ModelConfig mc = small_config();
    const ChannelLayout L{4, 2, 1, 1};
    const Dataset data = toy_data(L, mc, 8, 5);
    const auto init = TrainState{model::init_params<float>(mc, L, 1), {}, 0};

    SUBCASE("zero learning rate keeps parameters") {
        TrainConfig cfg = quick(3);
        cfg.lr = 0;
        const TrainState out = train_loop(cfg, data, init, {});
        CHECK(out.params.tensors == init.params.tensors);
        CHECK(out.step == 3);
    }
    SUBCASE("determinism and decomposition") {
        std::vector<StepRecord> a, b;
        train_loop(quick(5), data, init, {}, &a);
        train_loop(quick(5), data, init, {}, &b);
        REQUIRE(a.size() == 5);
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].loss.total == b[i].loss.total);
            CHECK(a[i].loss.vae == b[i].loss.vae);
            CHECK(std::abs(a[i].loss.total - a[i].loss.recomposed()) <= 1e-6 * std::max(1.0, a[i].loss.total));
        }
    }
    SUBCASE("lambda_base zero reduces the total to L_vae") {
        TrainConfig cfg = quick(4);
        cfg.lambda_base = 0;
        std::vector<StepRecord> h;
        train_loop(cfg, data, init, {}, &h);
        for (const auto& r : h) CHECK(r.loss.total == r.loss.vae);
    }
    SUBCASE("layout mismatch is rejected") {
        TrainState wrong{model::init_params<float>(mc, ChannelLayout{4, 0, 0, 0}, 1), {}, 0};
        CHECK_THROWS_AS(train_loop(quick(1), data, wrong, {}), std::invalid_argument);
    }
}

TEST_CASE("resume reproduces the uninterrupted run") {
    const ModelConfig mc = small_config();
    const ChannelLayout L{4, 2, 1, 1};
    const Dataset data = toy_data(L, mc, 8, 6);
    const auto init = TrainState{model::init_params<float>(mc, L, 2), {}, 0};
    TrainConfig cfg = quick(6);
    cfg.checkpoint_every = 3;

    const auto root = std::filesystem::temp_directory_path() / "worldflow_test_resume";
    std::filesystem::remove_all(root);
    train_loop(cfg, data, init, {root / "full", 7});
    const model::Checkpoint mid = model::load_checkpoint(root / "full" / "step_3.dwck");
    CHECK(mid.step == 3);
    CHECK(mid.fingerprint == 7);

    std::filesystem::create_directories(root / "resumed");
    std::filesystem::copy_file(root / "full" / "metrics.jsonl", root / "resumed" / "metrics.jsonl");
    train_loop(cfg, data, from_checkpoint(mid), {root / "resumed", 7});

    CHECK(read_lines_without_wall(root / "full" / "metrics.jsonl") == read_lines_without_wall(root / "resumed" / "metrics.jsonl"));
    CHECK(read_lines_without_wall(root / "full" / "metrics.jsonl").size() == 6);
    CHECK(file_bytes(root / "full" / "final.dwck") == file_bytes(root / "resumed" / "final.dwck"));
    std::filesystem::remove_all(root);
}

TEST_CASE("joint loss gradient matches finite differences") {
    ModelConfig mc = small_config();
    mc.hidden = 8;
    mc.time_freq = 4;
    mc.vocab = 6;
    mc.max_prompt = 2;
    mc.height = 1;
    const ChannelLayout L{2, 1, 1, 1};
    model::ModelParams<double> p = model::init_params<double>(mc, L, 4);
    Rng rng(5);
    for (auto& [name, t] : p.tensors) {
        t = standard_normal<double>(t.shape(), rng);
        t.values() *= 0.4;
    }
    const Shape grid{mc.frames, mc.height, mc.width, L.total()};
    std::vector<Sample<double>> batch(2);
    for (auto& s : batch) {
        s.z0 = uniform<double>(grid, rng, 0.0, 1.0);
        s.z1 = standard_normal<double>(grid, rng);
        s.t = 0.3 + 0.4 * double(&s - batch.data());
        s.prompt = {1, 5};
    }
    batch[1].mask.temporal = true;

    std::vector<std::string> names;
    std::vector<ArrayD> point;
    for (const auto& [name, t] : p.tensors) {
        names.push_back(name);
        point.push_back(t);
    }
    auto f = [&](Graph<double>& g, const std::vector<Var<double>>& leaves) {
        model::Bound<double> b{&g, &p.config, L, {}};
        for (std::size_t i = 0; i < names.size(); ++i) b.vars.emplace(names[i], leaves[i]);
        return joint_loss(b, batch, 0.15).total;
    };
    const GradCheckResult r = grad_check(f, point);
    CAPTURE(names[r.worst_leaf]);
    CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("library joint-loss gradient check") {
    for (std::uint64_t seed : {1u, 42u}) {
        const LossGradCheck r = joint_loss_grad_check(seed);
        CAPTURE(r.worst_param);
        CHECK(r.check.max_rel_error < 1e-4);
    }
}
