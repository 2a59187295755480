// Copyright (C) 2026 The worldflow Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "worldflow/cli/commands.hpp"
#include "worldflow/model/checkpoint.hpp"

#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace worldflow;
using namespace worldflow::cli;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = WORLDFLOW_SOURCE_DIR;

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("worldflow_cli_" + name);
    fs::remove_all(p);
    return p;
}

RunConfig smoke(const fs::path& root) {
    RunConfig rc = load_run_config(kSource / "configs" / "smoke.cfg");
    rc.root = root;
    return rc;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), {}};
}

std::vector<std::string> metrics_without_wall_time(const fs::path& p) {
    std::vector<std::string> out;
    std::istringstream is(slurp(p));
    std::string line;
    while (std::getline(is, line)) {
        auto j = nlohmann::ordered_json::parse(line);
        j.erase("wall_ms");
        out.push_back(j.dump());
    }
    return out;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(WORLDFLOW_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Options quiet() {
    Options o;
    o.quiet = true;
    return o;
}

}  // namespace

TEST_CASE("config text parsing") {
    const auto e = parse_config_text("# comment\n[world]\nframes = 6  # trailing\n\n[train]\nschedule=constant\n");
    CHECK(e.size() == 2);
    CHECK(e.at("world.frames").value == "6");
    CHECK(e.at("world.frames").line == 3);
    CHECK(e.at("train.schedule").value == "constant");

    CHECK_THROWS_WITH_AS(parse_config_text("[a]\nx = 1\nx = 2\n"), doctest::Contains("duplicate key a.x"), UsageError);
    CHECK_THROWS_WITH_AS(parse_config_text("x = 1\n"), doctest::Contains("outside"), UsageError);
    CHECK_THROWS_WITH_AS(parse_config_text("[a\n"), doctest::Contains("section"), UsageError);
    CHECK_THROWS_WITH_AS(parse_config_text("[a]\njunk\n"), doctest::Contains(":2"), UsageError);
}

TEST_CASE("run config keys and cross-field checks") {
    CHECK_THROWS_WITH_AS(run_config_from(parse_config_text("[world]\nframez = 3\n")), doctest::Contains("unknown key world.framez"), UsageError);
    CHECK_THROWS_WITH_AS(run_config_from(parse_config_text("[train]\nlr = fast\n")), doctest::Contains("train.lr"), UsageError);
    CHECK_THROWS_WITH_AS(run_config_from(parse_config_text("[train]\nschedule = linear\n")), doctest::Contains("cca or constant"), UsageError);

    RunConfig rc;
    rc.validate();
    rc.codec.patch = 2;
    CHECK_THROWS_WITH_AS(rc.validate(), doctest::Contains("layout.vae"), UsageError);
    rc = RunConfig{};
    rc.k_semantic = 6;
    CHECK_THROWS_WITH_AS(rc.validate(), doctest::Contains("k_semantic"), UsageError);
    rc = RunConfig{};
    rc.world.restitution = 2;
    CHECK_THROWS_AS(rc.validate(), UsageError);
    rc = RunConfig{};
    rc.pretrain_lr = -1;
    CHECK_THROWS_WITH_AS(rc.validate(), doctest::Contains("pretrain"), UsageError);

    const RunConfig pre = run_config_from(parse_config_text("[pretrain]\nsteps = 9\nlr = 0.01\nwarmup = 3\n[train]\nbatch = 2\n"));
    const train::TrainConfig t = pre.pretrain();
    CHECK(t.steps == 9);
    CHECK(t.lr == 0.01);
    CHECK(t.warmup == 3);
    CHECK(t.batch == 2);
    CHECK(t.lambda_base == 0);

    const RunConfig desk = load_run_config(kSource / "configs" / "desk.cfg");
    CHECK(desk.canonical() == RunConfig{}.canonical());
    CHECK(desk.model_config().tokens() == 512);
}

TEST_CASE("fingerprint covers settings but not paths") {
    RunConfig a, b;
    b.root = "/elsewhere";
    CHECK(a.fingerprint() == b.fingerprint());
    b.seed = 7;
    CHECK(a.fingerprint() != b.fingerprint());
    RunConfig c;
    c.guidance.w_txt = 4;
    CHECK(a.fingerprint() != c.fingerprint());
    const RunConfig back = run_config_from(parse_config_text("[guidance]\nw_txt = 4\n"));
    CHECK(back.fingerprint() == c.fingerprint());
}

TEST_CASE("gen-data") {
    const fs::path root = scratch("gen");
    RunConfig rc = smoke(root);
    rc.data.episodes = 4;
    std::ostringstream log;
    cmd_gen_data(rc, quiet(), log);
    const std::string first = slurp(root / "data" / "manifest.json");
    const auto j = nlohmann::json::parse(first);
    CHECK(j["episodes"].size() == 4);
    CHECK(j["fingerprint"] == hex64(rc.fingerprint()));
    for (int i = 0; i < 4; ++i) CHECK(fs::is_directory(root / "data" / ("episode_000" + std::to_string(i))));

    CHECK_THROWS_WITH_AS(cmd_gen_data(rc, quiet(), log), doctest::Contains("--force"), UsageError);
    Options force = quiet();
    force.force = true;
    cmd_gen_data(rc, force, log);
    CHECK(slurp(root / "data" / "manifest.json") == first);

    rc.data.episodes = 0;
    cmd_gen_data(rc, force, log);
    CHECK(nlohmann::json::parse(slurp(root / "data" / "manifest.json"))["episodes"].empty());

    std::ofstream(root / "blocker") << "x";
    rc.root = root / "blocker" / "nested";
    CHECK_THROWS(cmd_gen_data(rc, quiet(), log));
    fs::remove_all(root);
}

TEST_CASE("preprocess") {
    const fs::path root = scratch("pre");
    RunConfig rc = smoke(root);
    std::ostringstream log;
    cmd_gen_data(rc, quiet(), log);
    cmd_preprocess(rc, quiet(), log);
    const std::uint64_t first = checksum_tree(root / "features");
    Options force = quiet();
    force.force = true;
    cmd_preprocess(rc, force, log);
    CHECK(checksum_tree(root / "features") == first);

    const train::Dataset d = load_dataset(rc);
    CHECK(d.size() == rc.data.episodes);
    CHECK(d.latents[0].dim(3) == rc.layout.total());
    CHECK(d.latents[0].dim(0) == std::size_t(rc.world.frames));

    SUBCASE("k above the raw dimension") {
        RunConfig big = rc;
        big.layout.semantic = big.k_semantic = 40;
        CHECK_THROWS_WITH_AS(cmd_preprocess(big, force, log), doctest::Contains("k_semantic"), UsageError);
    }
    SUBCASE("corrupted episode") {
        std::ofstream(root / "data" / "episode_0002" / "prompt.txt", std::ios::app) << "two";
        CHECK_THROWS_WITH(cmd_preprocess(rc, force, log), doctest::Contains("checksum mismatch"));
    }
    fs::remove_all(root);
}

TEST_CASE("train, resume, sample, eval") {
    const fs::path root = scratch("train");
    RunConfig rc = smoke(root);
    std::ostringstream log;
    cmd_gen_data(rc, quiet(), log);
    cmd_preprocess(rc, quiet(), log);

    CHECK_THROWS_WITH(cmd_train(rc, quiet(), log), doctest::Contains("pretrain-base"));
    CHECK_THROWS_WITH(cmd_sample(rc, quiet(), log), doctest::Contains("missing checkpoint"));

    cmd_pretrain_base(rc, quiet(), log);
    cmd_train(rc, quiet(), log);
    const auto full = metrics_without_wall_time(root / "train" / "metrics.jsonl");
    CHECK(full.size() == rc.train.steps);
    const std::string final_bytes = slurp(root / "train" / "final.dwck");

    Options resume = quiet();
    resume.resume = root / "train" / "step_3.dwck";
    cmd_train(rc, resume, log);
    CHECK(metrics_without_wall_time(root / "train" / "metrics.jsonl") == full);
    CHECK(slurp(root / "train" / "final.dwck") == final_bytes);

    cmd_sample(rc, quiet(), log);
    CHECK(fs::exists(root / "samples" / "sample_000" / "frame_000.ppm"));
    CHECK(fs::exists(root / "samples" / "sample_001" / "semantic_raw.dwnd"));
    const std::uint64_t samples = checksum_tree(root / "samples");
    Options force = quiet();
    force.force = true;
    cmd_sample(rc, force, log);
    CHECK(checksum_tree(root / "samples") == samples);

    cmd_eval(rc, quiet(), log);
    std::istringstream lines(slurp(root / "eval" / "metrics.jsonl"));
    std::string line;
    std::vector<std::string> names;
    while (std::getline(lines, line)) names.push_back(nlohmann::json::parse(line)["metric"]);
    CHECK(names == std::vector<std::string>{"flow_consistency", "subject_consistency_proxy", "base_equivalence_fresh", "base_equivalence_trained"});
    CHECK(slurp(root / "eval" / "summary.txt").find("fingerprint: " + hex64(rc.fingerprint())) != std::string::npos);

    fs::remove_all(root / "features" / "fitted");
    CHECK_THROWS_WITH(cmd_sample(rc, force, log), doctest::Contains("fitted"));
    fs::remove_all(root);
}

TEST_CASE("grad-check command") {
    std::ostringstream log;
    CHECK(cmd_grad_check(RunConfig{}, log));
    CHECK(log.str().find("matmul") != std::string::npos);
    CHECK(log.str().find("joint_loss") != std::string::npos);
}

TEST_CASE("executable exit codes") {
    const fs::path root = scratch("exe");
    fs::create_directories(root);
    const std::string cfg = (kSource / "configs" / "smoke.cfg").string();
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("") == 1);
    CHECK(run_cli("frobnicate") == 1);
    std::ofstream(root / "bad.cfg") << "[world]\nframez = 3\n";
    CHECK(run_cli("--config " + (root / "bad.cfg").string() + " gen-data") == 1);
    CHECK(run_cli("--config " + cfg + " --out " + (root / "run").string() + " sample") == 2);
    CHECK(run_cli("--config " + cfg + " --out " + (root / "run").string() + " --seed 3 gen-data") == 0);
    CHECK(run_cli("--config " + cfg + " --out " + (root / "run").string() + " gen-data") == 1);
    CHECK(slurp(root / "run" / "data" / "config.txt").find("run.seed = 3") != std::string::npos);
    fs::remove_all(root);
}
