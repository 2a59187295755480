// Copyright (C) 2026 The worldflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "worldflow/train/train.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

namespace worldflow::train {

void TrainConfig::validate() const {
    if (steps == 0) throw std::invalid_argument("train: steps must be positive");
    if (!(lambda_base >= 0)) throw std::invalid_argument("train: lambda_base must be non-negative");
    if (!(lr >= 0)) throw std::invalid_argument("train: lr must be non-negative");
    if (batch == 0) throw std::invalid_argument("train: batch must be positive");
    for (double p : {dropout.text, dropout.temporal, dropout.semantic, dropout.spatial}) {
        if (!(p >= 0 && p <= 1)) throw std::invalid_argument("train: dropout probabilities must lie in [0, 1]");
    }
    if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) throw std::invalid_argument("train: betas must lie in [0, 1)");
}

double cca_weight(std::int64_t step, std::int64_t total, double lambda_base) {
    if (total <= 0) throw std::invalid_argument("cca_weight: T_total must be positive");
    if (step < 0) throw std::invalid_argument("cca_weight: step must be non-negative");
    if (step > total) {
        std::cerr << "warning: cca_weight step " << step << " exceeds T_total " << total << ", using 0\n";
        return 0.0;
    }
    if (step == total) return 0.0;  // cos(pi) rounding would leave ~1e-17
    return lambda_base * 0.5 * (1.0 + std::cos(std::numbers::pi * double(step) / double(total)));
}

double lambda_at(const TrainConfig& cfg, std::uint64_t step) {
    return cfg.schedule == Schedule::constant ? cfg.lambda_base
                                              : cca_weight(std::int64_t(step), std::int64_t(cfg.steps), cfg.lambda_base);
}

void Dataset::validate() const {
    layout.validate();
    if (latents.size() != prompts.size()) throw std::invalid_argument("dataset: latent and prompt counts differ");
    if (latents.empty()) throw std::invalid_argument("dataset: no training examples");
    for (const auto& z : latents) {
        if (z.rank() != 4 || z.dim(3) != layout.total() || z.shape() != latents.front().shape()) {
            throw ShapeError("dataset", z.shape(), latents.front().shape(), "latents must share one grid with C_total channels");
        }
    }
}

std::vector<Sample<float>> make_batch(const TrainConfig& cfg, const Dataset& data, std::uint64_t step) {
    Rng pick = substream(cfg.seed, "data", step);
    Rng noise = substream(cfg.seed, "noise", step);
    Rng drop = substream(cfg.seed, "dropout", step);
    std::uniform_int_distribution<std::size_t> index(0, data.size() - 1);
    std::uniform_real_distribution<float> unit(0.0f, 1.0f);
    std::vector<Sample<float>> batch(cfg.batch);
    for (auto& s : batch) {
        const std::size_t i = index(pick);
        s.z0 = data.latents[i];
        s.prompt = data.prompts[i];
        s.t = unit(noise);
        s.z1 = standard_normal<float>(s.z0.shape(), noise);
    }
    dropout_conditions(batch, cfg.dropout, drop);
    return batch;
}

double learning_rate(const TrainConfig& cfg, std::uint64_t step) {
    if (cfg.warmup == 0) return cfg.lr;
    return cfg.lr * std::min(1.0, double(step + 1) / double(cfg.warmup));
}

void adamw_update(TrainState& state, const std::map<std::string, ArrayF>& grads, const TrainConfig& cfg, std::uint64_t step) {
    const double lr = learning_rate(cfg, step);
    const double bc1 = 1.0 - std::pow(cfg.beta1, double(step + 1));
    const double bc2 = 1.0 - std::pow(cfg.beta2, double(step + 1));
    const float b1 = float(cfg.beta1), b2 = float(cfg.beta2);
    for (auto& [name, w] : state.params.tensors) {
        const ArrayF& g = grads.at(name);
        ArrayF& m = state.adam.m.try_emplace(name, w.shape()).first->second;
        ArrayF& v = state.adam.v.try_emplace(name, w.shape()).first->second;
        m.values() = b1 * m.values() + (1.0f - b1) * g.values();
        v.values() = b2 * v.values() + (1.0f - b2) * g.values().square();
        const auto update = (m.values() / float(bc1)) / ((v.values() / float(bc2)).sqrt() + float(cfg.adam_eps));
        if (model::decays(name)) w.values() -= float(lr * cfg.weight_decay) * w.values();
        w.values() -= float(lr) * update;
    }
}

std::string format_record(const StepRecord& r) {
    nlohmann::ordered_json j;
    j["step"] = r.step;
    j["L_vae"] = r.loss.vae;
    j["L_temporal"] = r.loss.temporal;
    j["L_semantic"] = r.loss.semantic;
    j["L_spatial"] = r.loss.spatial;
    j["lambda_temp"] = r.loss.lambda_temp;
    j["lambda_sem"] = r.loss.lambda_sem;
    j["lambda_spa"] = r.loss.lambda_spa;
    j["L_total"] = r.loss.total;
    j["wall_ms"] = r.wall_ms;
    return j.dump();
}

model::Checkpoint to_checkpoint(const TrainState& s, std::uint64_t fingerprint) {
    model::Checkpoint ck{s.params, {}, s.step, fingerprint};
    for (const auto& [name, t] : s.adam.m) ck.state.emplace("adam.m." + name, t);
    for (const auto& [name, t] : s.adam.v) ck.state.emplace("adam.v." + name, t);
    return ck;
}

TrainState from_checkpoint(const model::Checkpoint& ck) {
    TrainState s{ck.params, {}, ck.step};
    for (const auto& [key, t] : ck.state) {
        if (key.starts_with("adam.m.")) {
            s.adam.m.emplace(key.substr(7), t);
        } else if (key.starts_with("adam.v.")) {
            s.adam.v.emplace(key.substr(7), t);
        }
    }
    return s;
}

namespace {

// Keeps the records of steps before `resume` so a resumed run continues the
// same log.
void truncate_log(const std::filesystem::path& path, std::uint64_t resume) {
    std::ifstream in(path);
    if (!in) return;
    std::vector<std::string> keep;
    for (std::string line; std::getline(in, line);) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("step")) continue;
        if (j["step"].get<std::uint64_t>() < resume) keep.push_back(line);
    }
    in.close();
    std::ofstream out(path, std::ios::trunc);
    for (const auto& l : keep) out << l << '\n';
}

}  // namespace

TrainState train_loop(const TrainConfig& cfg, const Dataset& data, TrainState state, const TrainOutputs& out,
                      std::vector<StepRecord>* history) {
    cfg.validate();
    data.validate();
    if (!(state.params.layout == data.layout)) {
        throw std::invalid_argument("train: model layout " + model::layout_str(state.params.layout) + " does not match data layout " +
                                    model::layout_str(data.layout));
    }
    const model::ModelConfig& mc = state.params.config;
    const Shape grid{mc.frames, mc.height, mc.width, data.layout.total()};
    if (data.latents.front().shape() != grid) throw ShapeError("train", data.latents.front().shape(), grid, "model grid");

    std::ofstream log;
    const std::filesystem::path log_path = out.dir / "metrics.jsonl";
    if (!out.dir.empty()) {
        std::filesystem::create_directories(out.dir);
        truncate_log(log_path, state.step);
        log.open(log_path, std::ios::app);
        if (!log) throw std::runtime_error("cannot open " + log_path.string() + " for writing");
    }
    auto save = [&](const std::string& name) {
        if (out.dir.empty()) return;
        log.flush();
        model::save_checkpoint(out.dir / name, to_checkpoint(state, out.fingerprint));
    };

    for (std::uint64_t step = state.step; step < cfg.steps; ++step) {
        const auto started = std::chrono::steady_clock::now();
        const double lambda = lambda_at(cfg, step);
        const std::vector<Sample<float>> batch = make_batch(cfg, data, step);

        Graph<float> g;
        const model::Bound<float> b = model::bind(g, state.params, true);
        LossGraph<float> loss;
        try {
            loss = joint_loss(b, batch, lambda);
        } catch (const NumericFault& e) {
            if (log.is_open()) log.flush();
            throw std::runtime_error("step " + std::to_string(step) + ": " + e.what());
        }
        const LossBreakdown& br = loss.breakdown;
        for (auto [name, v] : {std::pair{"L_vae", br.vae}, {"L_temporal", br.temporal}, {"L_semantic", br.semantic}, {"L_spatial", br.spatial}}) {
            if (!std::isfinite(v)) {
                if (log.is_open()) log.flush();
                throw std::runtime_error("step " + std::to_string(step) + ": " + name + " is not finite");
            }
        }
        g.backward(loss.total);
        std::map<std::string, ArrayF> grads;
        for (const auto& [name, var] : b.vars) grads.emplace(name, g.grad(var));
        adamw_update(state, grads, cfg, step);
        state.step = step + 1;

        StepRecord rec{step, br, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count()};
        if (history) history->push_back(rec);
        if (log.is_open()) {
            log << format_record(rec) << '\n';
            if (!log) throw std::runtime_error("failed writing " + log_path.string());
        }
        if (!out.quiet && (step % 50 == 0 || step + 1 == cfg.steps)) {
            std::cerr << "step " << step << " L_total " << br.total << " L_vae " << br.vae << " lambda " << lambda << " (" << rec.wall_ms
                      << " ms)\n";
        }
        if (cfg.checkpoint_every && state.step % cfg.checkpoint_every == 0 && state.step < cfg.steps) {
            save("step_" + std::to_string(state.step) + ".dwck");
        }
    }
    save("final.dwck");
    return state;
}

LossGradCheck joint_loss_grad_check(std::uint64_t seed) {
    model::ModelConfig mc;
    mc.hidden = 8;
    mc.layers = 1;
    mc.heads = 2;
    mc.mlp_ratio = 2;
    mc.time_freq = 4;
    mc.vocab = 6;
    mc.max_prompt = 2;
    mc.frames = 2;
    mc.height = 1;
    mc.width = 2;
    const ChannelLayout L{2, 1, 1, 1};
    model::ModelParams<double> p = model::init_params<double>(mc, L, seed);
    Rng rng = substream(seed, "grad_check");
    for (auto& [name, t] : p.tensors) {
        t = standard_normal<double>(t.shape(), rng);
        t.values() *= 0.4;
    }
    const Shape grid{mc.frames, mc.height, mc.width, L.total()};
    std::vector<Sample<double>> batch(2);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        batch[i].z0 = uniform<double>(grid, rng, 0.0, 1.0);
        batch[i].z1 = standard_normal<double>(grid, rng);
        batch[i].t = 0.3 + 0.4 * double(i);
        batch[i].prompt = {1, 5};
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
    LossGradCheck r{grad_check(f, point), {}};
    r.worst_param = names[r.check.worst_leaf];
    return r;
}

}  // namespace worldflow::train
