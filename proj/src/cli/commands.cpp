// Copyright (C) 2026 The worldflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "worldflow/cli/commands.hpp"

#include "worldflow/model/checkpoint.hpp"
#include "worldflow/numerics/io.hpp"
#include "worldflow/numerics/primitive_checks.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace worldflow::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::uint64_t checksum_tree(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) files.push_back(fs::relative(e.path(), dir));
    }
    std::sort(files.begin(), files.end());
    std::uint64_t h = kFnvOffset;
    std::vector<char> buf;
    for (const auto& rel : files) {
        h = fnv1a(rel.generic_string(), h);
        std::ifstream is(dir / rel, std::ios::binary);
        buf.assign(std::istreambuf_iterator<char>(is), {});
        h = fnv1a(std::span(reinterpret_cast<const unsigned char*>(buf.data()), buf.size()), h);
    }
    return h;
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        os << contents;
        if (!os.flush()) throw std::runtime_error("failed writing " + tmp.string());
    }
    fs::rename(tmp, path);
}

namespace {

std::string episode_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "episode_%04zu", i);
    return buf;
}

std::string sample_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "sample_%03zu", i);
    return buf;
}

// Creates `dir`, refusing to touch a non-empty one unless forced.
void prepare_output(const fs::path& dir, bool force) {
    std::error_code ec;
    if (fs::exists(dir, ec) && !fs::is_empty(dir, ec)) {
        if (!force) throw UsageError(dir.string() + " is not empty; pass --force to replace it");
        fs::remove_all(dir);
    }
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
}

void write_config(const fs::path& dir, const RunConfig& rc) {
    write_file_atomic(dir / "config.txt", "# fingerprint " + hex64(rc.fingerprint()) + "\n" + rc.canonical());
}

ordered_json read_json(const fs::path& path, const std::string& hint) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("missing " + path.string() + " (" + hint + ")");
    try {
        return ordered_json::parse(is);
    } catch (const std::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

model::Checkpoint require_checkpoint(const fs::path& path, const std::string& hint) {
    if (!fs::exists(path)) throw std::runtime_error("missing checkpoint " + path.string() + " (" + hint + ")");
    return model::load_checkpoint(path);
}

void say(const Options& opt, std::ostream& log, const std::string& msg) {
    if (!opt.quiet) log << msg << '\n';
}

train::TrainConfig seeded(train::TrainConfig t, std::uint64_t seed) {
    t.seed = seed;
    return t;
}

model::ModelParams<float> fresh_base(const RunConfig& rc) {
    return model::init_params<float>(rc.model_config(), model::ChannelLayout::video_only(rc.layout.vae), rc.seed);
}

}  // namespace

void cmd_gen_data(const RunConfig& rc, const Options& opt, std::ostream& log) {
    rc.validate();
    const RunPaths paths{rc.root};
    prepare_output(paths.data(), opt.force);
    ordered_json manifest;
    manifest["fingerprint"] = hex64(rc.fingerprint());
    manifest["episodes"] = ordered_json::array();
    std::uint64_t total = kFnvOffset;
    for (std::size_t i = 0; i < rc.data.episodes; ++i) {
        const worldsim::Episode ep = worldsim::generate_episode(rc.episode_world(i, false));
        const fs::path dir = paths.data() / episode_name(i);
        worldsim::save_episode(dir, ep);
        const std::uint64_t sum = checksum_tree(dir);
        total = fnv1a(hex64(sum), total);
        manifest["episodes"].push_back({{"name", episode_name(i)}, {"prompt", worldsim::Vocabulary::decode(ep.prompt)}, {"checksum", hex64(sum)}});
    }
    manifest["checksum"] = hex64(total);
    write_config(paths.data(), rc);
    write_file_atomic(paths.data() / "manifest.json", manifest.dump(1) + "\n");
    say(opt, log, "gen-data: " + std::to_string(rc.data.episodes) + " episodes in " + paths.data().string() + ", fingerprint " +
                      hex64(rc.fingerprint()));
}

void cmd_preprocess(const RunConfig& rc, const Options& opt, std::ostream& log) {
    rc.validate();
    const RunPaths paths{rc.root};
    const ordered_json manifest = read_json(paths.data() / "manifest.json", "run gen-data first");
    const auto& entries = manifest.at("episodes");
    if (entries.empty()) throw std::runtime_error("preprocess: the data manifest lists no episodes");
    const worldfeat::FeatureConfig fc = rc.features();

    std::vector<worldsim::Episode> episodes;
    std::vector<worldfeat::AlignedRaw> raw;
    for (const auto& e : entries) {
        const fs::path dir = paths.data() / e.at("name").get<std::string>();
        if (!fs::exists(dir)) throw std::runtime_error("preprocess: missing episode directory " + dir.string());
        if (hex64(checksum_tree(dir)) != e.at("checksum").get<std::string>()) {
            throw std::runtime_error("preprocess: checksum mismatch for " + dir.string() + " (partial or modified write)");
        }
        episodes.push_back(worldsim::load_episode(dir));
        raw.push_back(worldfeat::aligned_raw_features(episodes.back(), fc));
    }
    const std::size_t d_sem = raw.front().semantic.dim(3), d_spa = raw.front().spatial.dim(3);
    if (fc.k_semantic > d_sem) {
        throw UsageError("features.k_semantic = " + std::to_string(fc.k_semantic) + " exceeds the semantic raw dimension " + std::to_string(d_sem));
    }
    if (fc.k_spatial > d_spa) {
        throw UsageError("features.k_spatial = " + std::to_string(fc.k_spatial) + " exceeds the spatial raw dimension " + std::to_string(d_spa));
    }
    const worldfeat::FittedFeatures fitted = worldfeat::fit_features(raw, fc);

    prepare_output(paths.features(), opt.force);
    worldfeat::save_fitted_features(paths.features() / "fitted", fitted);
    ordered_json out;
    out["fingerprint"] = hex64(rc.fingerprint());
    out["layout"] = model::layout_str(rc.layout);
    out["episodes"] = ordered_json::array();
    for (std::size_t i = 0; i < episodes.size(); ++i) {
        const worldfeat::WorldLatent world = worldfeat::build_world_latent(raw[i], fitted);
        if (world.channels() != rc.layout.world()) {
            throw std::runtime_error("preprocess: world latent has " + std::to_string(world.channels()) + " channels, layout expects " +
                                     std::to_string(rc.layout.world()));
        }
        const ArrayF vae = codec::encode(episodes[i].video, fc.codec).data;
        const ArrayF joint = concat({vae, world.data}, 3);
        const std::string name = entries[i].at("name").get<std::string>() + ".dwnd";
        save_array(paths.features() / name, joint);
        std::ifstream is(paths.features() / name, std::ios::binary);
        const std::string bytes{std::istreambuf_iterator<char>(is), {}};
        out["episodes"].push_back({{"latent", name}, {"prompt", episodes[i].prompt}, {"checksum", hex64(fnv1a(bytes))}});
    }
    write_config(paths.features(), rc);
    write_file_atomic(paths.features() / "manifest.json", out.dump(1) + "\n");
    say(opt, log, "preprocess: " + std::to_string(episodes.size()) + " joint latents (" + model::layout_str(rc.layout) + ") in " +
                      paths.features().string());
}

train::Dataset load_dataset(const RunConfig& rc) {
    const RunPaths paths{rc.root};
    const ordered_json manifest = read_json(paths.features() / "manifest.json", "run preprocess first");
    train::Dataset d{rc.layout, {}, {}};
    for (const auto& e : manifest.at("episodes")) {
        const fs::path file = paths.features() / e.at("latent").get<std::string>();
        std::ifstream is(file, std::ios::binary);
        if (!is) throw std::runtime_error("missing cached latent " + file.string());
        const std::string bytes{std::istreambuf_iterator<char>(is), {}};
        if (hex64(fnv1a(bytes)) != e.at("checksum").get<std::string>()) throw std::runtime_error("checksum mismatch for " + file.string());
        std::istringstream ss(bytes);
        d.latents.push_back(read_array<float>(ss));
        d.prompts.push_back(e.at("prompt").get<std::vector<int>>());
    }
    if (d.latents.empty()) throw std::runtime_error("the feature cache lists no episodes");
    return d;
}

void cmd_pretrain_base(const RunConfig& rc, const Options& opt, std::ostream& log) {
    rc.validate();
    const RunPaths paths{rc.root};
    const train::Dataset joint = load_dataset(rc);
    train::Dataset video{model::ChannelLayout::video_only(rc.layout.vae), {}, joint.prompts};
    for (const ArrayF& z : joint.latents) video.latents.push_back(slice(z, 3, 0, rc.layout.vae));

    prepare_output(paths.base(), opt.force);
    write_config(paths.base(), rc);
    say(opt, log, "pretrain-base: " + std::to_string(rc.pretrain_steps) + " steps, fingerprint " + hex64(rc.fingerprint()));
    train::train_loop(seeded(rc.pretrain(), rc.seed), video, {fresh_base(rc), {}, 0}, {paths.base(), rc.fingerprint(), opt.quiet});
}

void cmd_train(const RunConfig& rc, const Options& opt, std::ostream& log) {
    rc.validate();
    const RunPaths paths{rc.root};
    const train::Dataset data = load_dataset(rc);
    train::TrainState state;
    if (opt.resume) {
        state = train::from_checkpoint(require_checkpoint(*opt.resume, "resume target"));
        if (state.params.layout != rc.layout || state.params.config != rc.model_config()) {
            throw UsageError("resume checkpoint " + opt.resume->string() + " does not match the configured model");
        }
        fs::create_directories(paths.train());
    } else {
        model::ModelParams<float> base = rc.init == TrainInit::fresh
                                              ? fresh_base(rc)
                                              : require_checkpoint(paths.base() / "final.dwck", "run pretrain-base first or set train.init = fresh").params;
        if (base.config != rc.model_config()) throw UsageError("base checkpoint architecture does not match the configured model");
        state.params = model::init_expanded(base, rc.layout);
        prepare_output(paths.train(), opt.force);
    }
    write_config(paths.train(), rc);
    say(opt, log, "train: steps " + std::to_string(state.step) + ".." + std::to_string(rc.train.steps) + ", fingerprint " + hex64(rc.fingerprint()));
    train::train_loop(seeded(rc.train, rc.seed), data, std::move(state), {paths.train(), rc.fingerprint(), opt.quiet});
}

std::vector<std::vector<int>> heldout_prompts(const RunConfig& rc, std::size_t n) {
    std::vector<std::vector<int>> out;
    for (std::size_t i = 0; i < n; ++i) {
        const worldsim::WorldConfig w = rc.episode_world(i, true);
        out.push_back(worldsim::describe(worldsim::initial_state(w), w));
    }
    return out;
}

namespace {

std::vector<std::vector<int>> configured_prompts(const RunConfig& rc) {
    if (rc.sample_prompts.empty()) return heldout_prompts(rc, rc.sample_count);
    std::vector<std::vector<int>> out;
    std::istringstream is(rc.sample_prompts);
    std::string item;
    while (std::getline(is, item, ';')) {
        try {
            out.push_back(worldsim::Vocabulary::encode(item));
        } catch (const std::invalid_argument& e) {
            throw UsageError(std::string("sample.prompts: ") + e.what());
        }
    }
    return out;
}

// Undo PCA then standardization.
ArrayF to_raw(const ArrayF& z, const worldfeat::Standardizer& s, const worldfeat::PcaModel& p) {
    return s.invert(p.reconstruct(z));
}

model::ModelParams<float> trained_params(const RunConfig& rc, const Options& opt) {
    const fs::path ck = opt.checkpoint ? *opt.checkpoint : RunPaths{rc.root}.train() / "final.dwck";
    model::ModelParams<float> p = require_checkpoint(ck, "run train first or pass --checkpoint").params;
    if (p.layout.vae != rc.layout.vae || p.config != rc.model_config()) {
        throw UsageError("checkpoint " + ck.string() + " does not match the configured model");
    }
    return p;
}

sample::GuidanceConfig guidance(const RunConfig& rc) {
    sample::GuidanceConfig g = rc.guidance;
    g.seed = rc.seed;
    return g;
}

}  // namespace

void cmd_sample(const RunConfig& rc, const Options& opt, std::ostream& log) {
    rc.validate();
    const RunPaths paths{rc.root};
    const model::ModelParams<float> params = trained_params(rc, opt);
    const worldfeat::FittedFeatures fitted = worldfeat::load_fitted_features(paths.features() / "fitted");
    const auto prompts = configured_prompts(rc);

    prepare_output(paths.samples(), opt.force);
    ordered_json manifest;
    manifest["fingerprint"] = hex64(rc.fingerprint());
    manifest["samples"] = ordered_json::array();
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        const sample::SampleResult r = sample::sample(params, prompts[i], guidance(rc), rc.codec, i);
        const fs::path dir = paths.samples() / sample_name(i);
        const ArrayF temporal = r.latent.temporal.size() ? worldfeat::temporal_to_codec(r.latent.temporal, fitted) : ArrayF();
        sample::save_sample(dir, r, rc.codec, &temporal);
        if (r.latent.semantic.size()) save_array(dir / "semantic_raw.dwnd", to_raw(r.latent.semantic, fitted.semantic_std, fitted.semantic_pca));
        if (r.latent.spatial.size()) save_array(dir / "spatial_raw.dwnd", to_raw(r.latent.spatial, fitted.spatial_std, fitted.spatial_pca));
        manifest["samples"].push_back({{"name", sample_name(i)}, {"prompt", worldsim::Vocabulary::decode(prompts[i])}, {"checksum", hex64(checksum_tree(dir))}});
        say(opt, log, "sample " + sample_name(i) + ": " + worldsim::Vocabulary::decode(prompts[i]));
    }
    write_config(paths.samples(), rc);
    write_file_atomic(paths.samples() / "manifest.json", manifest.dump(1) + "\n");
}

SampleMetrics sample_metrics(const model::ModelParams<float>& params, const std::vector<std::vector<int>>& prompts, const RunConfig& rc,
                             const worldfeat::FittedFeatures& fitted) {
    SampleMetrics m;
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        const sample::SampleResult r = sample::sample(params, prompts[i], guidance(rc), rc.codec, i);
        m.flow_consistency.push_back(
            r.latent.temporal.size() ? eval::flow_consistency(r.video, worldfeat::temporal_to_codec(r.latent.temporal, fitted), rc.codec, rc.flow)
                                     : 0.0);
        const eval::SubjectScore s = eval::subject_consistency_proxy(r.video);
        m.subject_consistency.push_back(s.score);
        m.no_segment_samples += s.no_segments;
    }
    return m;
}

void cmd_eval(const RunConfig& rc, const Options& opt, std::ostream& log) {
    rc.validate();
    const RunPaths paths{rc.root};
    const model::ModelParams<float> params = trained_params(rc, opt);
    const fs::path base_path = paths.base() / "final.dwck";
    const model::ModelParams<float> base = fs::exists(base_path) ? model::load_checkpoint(base_path).params : fresh_base(rc);
    const worldfeat::FittedFeatures fitted = worldfeat::load_fitted_features(paths.features() / "fitted");
    const SampleMetrics m = sample_metrics(params, heldout_prompts(rc, rc.eval.prompts), rc, fitted);
    const eval::EquivalenceReport fresh = eval::base_equivalence_report(model::init_expanded(base, rc.layout), base, rc.eval.equivalence_trials, rc.seed);
    const bool comparable = params.layout == rc.layout;
    const eval::EquivalenceReport trained =
        comparable ? eval::base_equivalence_report(params, base, rc.eval.equivalence_trials, rc.seed) : eval::EquivalenceReport{};

    const std::uint64_t fp = rc.fingerprint();
    std::vector<eval::MetricReport> reports{
        eval::MetricReport::from("flow_consistency", m.flow_consistency, fp),
        eval::MetricReport::from("subject_consistency_proxy", m.subject_consistency, fp),
        eval::MetricReport::from("base_equivalence_fresh", {fresh.max_deviation}, fp),
        eval::MetricReport::from("base_equivalence_trained", {trained.max_deviation}, fp),
    };
    prepare_output(paths.eval(), opt.force);
    std::string lines;
    for (const auto& r : reports) lines += r.json() + "\n";
    write_file_atomic(paths.eval() / "metrics.jsonl", lines);
    std::string table = eval::summary_table(reports);
    table += "no-segment samples: " + std::to_string(m.no_segment_samples) + "\n";
    table += "equivalence trials: " + std::to_string(fresh.trials) + (fresh.vacuous ? " (vacuous)" : "") + "\n";
    table += "fingerprint: " + hex64(fp) + "\n";
    write_file_atomic(paths.eval() / "summary.txt", table);
    write_config(paths.eval(), rc);
    say(opt, log, table);
}

bool cmd_grad_check(const RunConfig& rc, std::ostream& log) {
    bool ok = true;
    char line[160];
    for (const auto& r : check_primitives(rc.seed)) {
        const bool pass = r.check.max_rel_error < kPrimitiveTolerance;
        ok = ok && pass;
        std::snprintf(line, sizeof line, "%-18s max rel error %.3e  %s\n", r.name.c_str(), r.check.max_rel_error, pass ? "ok" : "FAIL");
        log << line;
    }
    const train::LossGradCheck loss = train::joint_loss_grad_check(rc.seed);
    const bool pass = loss.check.max_rel_error < 1e-4;
    ok = ok && pass;
    std::snprintf(line, sizeof line, "%-18s max rel error %.3e  %s (worst %s)\n", "joint_loss", loss.check.max_rel_error, pass ? "ok" : "FAIL",
                  loss.worst_param.c_str());
    log << line;
    return ok;
}

}  // namespace worldflow::cli
