// Copyright (C) 2026 The worldflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "worldflow/cli/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

// Exit codes: 0 success, 1 usage error, 2 runtime fault.
constexpr int kUsage = 1;
constexpr int kFault = 2;

}  // namespace

int main(int argc, char** argv) {
    using namespace worldflow::cli;
    CLI::App app{"worldflow: joint video and world-latent flow matching at desk scale"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> steps;
    std::string out;
    std::string resume, checkpoint;
    Options opt;
    app.add_option("--config", config_path, "Sectioned key = value config file")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "Override run.seed");
    app.add_option("--out", out, "Override paths.root");
    app.add_flag("--force", opt.force, "Replace non-empty output directories");

    auto* gen = app.add_subcommand("gen-data", "Generate toy episodes and their manifest");
    auto* pre = app.add_subcommand("preprocess", "Fit world-feature models and cache joint latents");
    auto* base = app.add_subcommand("pretrain-base", "Train the video-only base model");
    auto* tr = app.add_subcommand("train", "Joint training from the expanded base");
    auto* smp = app.add_subcommand("sample", "Guided sampling to frame images and latents");
    auto* ev = app.add_subcommand("eval", "Sampling metrics and base-equivalence report");
    auto* gc = app.add_subcommand("grad-check", "Finite-difference checks of every primitive and the joint loss");
    for (auto* sub : {base, tr}) sub->add_option("--steps", steps, "Override the step count");
    tr->add_option("--resume", resume, "Checkpoint to resume from")->check(CLI::ExistingFile);
    for (auto* sub : {smp, ev}) sub->add_option("--checkpoint", checkpoint, "Model checkpoint (default: train/final.dwck)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kUsage;
    }

    try {
        RunConfig rc = config_path.empty() ? RunConfig{} : load_run_config(config_path);
        if (seed) rc.seed = *seed;
        if (!out.empty()) rc.root = out;
        if (steps) {
            if (base->parsed()) rc.pretrain_steps = *steps;
            else rc.train.steps = *steps;
        }
        if (!resume.empty()) opt.resume = resume;
        if (!checkpoint.empty()) opt.checkpoint = checkpoint;
        rc.validate();
        std::cerr << "config fingerprint " << hex64(rc.fingerprint()) << "\n";

        if (gen->parsed()) cmd_gen_data(rc, opt, std::cout);
        else if (pre->parsed()) cmd_preprocess(rc, opt, std::cout);
        else if (base->parsed()) cmd_pretrain_base(rc, opt, std::cout);
        else if (tr->parsed()) cmd_train(rc, opt, std::cout);
        else if (smp->parsed()) cmd_sample(rc, opt, std::cout);
        else if (ev->parsed()) cmd_eval(rc, opt, std::cout);
        else if (gc->parsed()) {
            if (!cmd_grad_check(rc, std::cout)) {
                std::cerr << "error: gradient check exceeded tolerance\n";
                return kFault;
            }
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFault;
    }
    return 0;
}
