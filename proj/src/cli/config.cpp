// Copyright (C) 2026 The worldflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "worldflow/cli/config.hpp"

#include "worldflow/rng.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

namespace worldflow::cli {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

// Shortest text that parses back to the same double.
std::string fmt_double(double v) {
    char buf[40];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

template <typename T>
T parse_unsigned(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) throw UsageError(key + ": expected a non-negative integer, got '" + v + "'");
    return static_cast<T>(out);
}

double parse_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double out = 0;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != v.size() || !std::isfinite(out)) throw UsageError(key + ": expected a finite number, got '" + v + "'");
    return out;
}

struct Field {
    std::string key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

template <typename T>
Field count_field(std::string key, T RunConfig::*member) {
    return {key, [member](const RunConfig& c) { return std::to_string(c.*member); },
            [member, key](RunConfig& c, const std::string& v) { c.*member = parse_unsigned<T>(key, v); }};
}

// Field bound through an accessor returning a reference into RunConfig.
template <typename T, typename Access>
Field field(std::string key, Access access) {
    Field f;
    f.key = key;
    if constexpr (std::is_floating_point_v<T>) {
        f.get = [access](const RunConfig& c) { return fmt_double(access(const_cast<RunConfig&>(c))); };
        f.set = [access, key](RunConfig& c, const std::string& v) { access(c) = T(parse_double(key, v)); };
    } else if constexpr (std::is_same_v<T, int>) {
        f.get = [access](const RunConfig& c) { return std::to_string(access(const_cast<RunConfig&>(c))); };
        f.set = [access, key](RunConfig& c, const std::string& v) { access(c) = parse_unsigned<int>(key, v); };
    } else {
        f.get = [access](const RunConfig& c) { return std::to_string(access(const_cast<RunConfig&>(c))); };
        f.set = [access, key](RunConfig& c, const std::string& v) { access(c) = parse_unsigned<T>(key, v); };
    }
    return f;
}

#define WF_FIELD(T, key, expr) field<T>(key, [](RunConfig & c) -> T& { return expr; })

const std::vector<Field>& fields() {
    static const std::vector<Field> table = [] {
        std::vector<Field> f;
        f.push_back(count_field("run.seed", &RunConfig::seed));

        f.push_back(WF_FIELD(int, "world.frames", c.world.frames));
        f.push_back(WF_FIELD(int, "world.height", c.world.height));
        f.push_back(WF_FIELD(int, "world.width", c.world.width));
        f.push_back(WF_FIELD(double, "world.gravity", c.world.gravity));
        f.push_back(WF_FIELD(double, "world.restitution", c.world.restitution));
        f.push_back(WF_FIELD(double, "world.radius_min", c.world.radius_min));
        f.push_back(WF_FIELD(double, "world.radius_max", c.world.radius_max));
        f.push_back(WF_FIELD(double, "world.speed_max", c.world.speed_max));
        f.push_back(WF_FIELD(std::size_t, "world.palette_size", c.world.palette_size));

        f.push_back(WF_FIELD(std::size_t, "data.episodes", c.data.episodes));
        f.push_back(WF_FIELD(std::size_t, "data.objects_min", c.data.objects_min));
        f.push_back(WF_FIELD(std::size_t, "data.objects_max", c.data.objects_max));
        f.push_back(WF_FIELD(double, "data.gravity_fraction", c.data.gravity_fraction));

        f.push_back(WF_FIELD(std::size_t, "codec.patch", c.codec.patch));
        f.push_back(WF_FIELD(std::size_t, "codec.temporal_patch", c.codec.temporal_patch));

        f.push_back(WF_FIELD(std::size_t, "layout.vae", c.layout.vae));
        f.push_back(WF_FIELD(std::size_t, "layout.temporal", c.layout.temporal));
        f.push_back(WF_FIELD(std::size_t, "layout.semantic", c.layout.semantic));
        f.push_back(WF_FIELD(std::size_t, "layout.spatial", c.layout.spatial));

        f.push_back(WF_FIELD(double, "features.sigma", c.flow.sigma));
        f.push_back(WF_FIELD(std::size_t, "features.k_semantic", c.k_semantic));
        f.push_back(WF_FIELD(std::size_t, "features.k_spatial", c.k_spatial));
        f.push_back(WF_FIELD(double, "features.eps", c.feature_eps));

        f.push_back(WF_FIELD(std::size_t, "model.hidden", c.model.hidden));
        f.push_back(WF_FIELD(std::size_t, "model.layers", c.model.layers));
        f.push_back(WF_FIELD(std::size_t, "model.heads", c.model.heads));
        f.push_back(WF_FIELD(std::size_t, "model.mlp_ratio", c.model.mlp_ratio));
        f.push_back(WF_FIELD(std::size_t, "model.time_freq", c.model.time_freq));
        f.push_back(WF_FIELD(std::size_t, "model.max_prompt", c.model.max_prompt));

        f.push_back(WF_FIELD(std::size_t, "pretrain.steps", c.pretrain_steps));
        f.push_back(WF_FIELD(double, "pretrain.lr", c.pretrain_lr));
        f.push_back(WF_FIELD(std::uint64_t, "pretrain.warmup", c.pretrain_warmup));

        f.push_back(WF_FIELD(std::uint64_t, "train.steps", c.train.steps));
        f.push_back(WF_FIELD(double, "train.lambda_base", c.train.lambda_base));
        f.push_back({"train.schedule", [](const RunConfig& c) { return std::string(c.train.schedule == train::Schedule::cca ? "cca" : "constant"); },
                     [](RunConfig& c, const std::string& v) {
                         if (v == "cca") c.train.schedule = train::Schedule::cca;
                         else if (v == "constant") c.train.schedule = train::Schedule::constant;
                         else throw UsageError("train.schedule: expected cca or constant, got '" + v + "'");
                     }});
        f.push_back({"train.init", [](const RunConfig& c) { return std::string(c.init == TrainInit::base ? "base" : "fresh"); },
                     [](RunConfig& c, const std::string& v) {
                         if (v == "base") c.init = TrainInit::base;
                         else if (v == "fresh") c.init = TrainInit::fresh;
                         else throw UsageError("train.init: expected base or fresh, got '" + v + "'");
                     }});
        f.push_back(WF_FIELD(double, "train.lr", c.train.lr));
        f.push_back(WF_FIELD(double, "train.beta1", c.train.beta1));
        f.push_back(WF_FIELD(double, "train.beta2", c.train.beta2));
        f.push_back(WF_FIELD(double, "train.adam_eps", c.train.adam_eps));
        f.push_back(WF_FIELD(double, "train.weight_decay", c.train.weight_decay));
        f.push_back(WF_FIELD(std::uint64_t, "train.warmup", c.train.warmup));
        f.push_back(WF_FIELD(std::size_t, "train.batch", c.train.batch));
        f.push_back(WF_FIELD(double, "train.dropout_text", c.train.dropout.text));
        f.push_back(WF_FIELD(double, "train.dropout_temporal", c.train.dropout.temporal));
        f.push_back(WF_FIELD(double, "train.dropout_semantic", c.train.dropout.semantic));
        f.push_back(WF_FIELD(double, "train.dropout_spatial", c.train.dropout.spatial));
        f.push_back(WF_FIELD(std::uint64_t, "train.checkpoint_every", c.train.checkpoint_every));

        f.push_back(WF_FIELD(double, "guidance.w_txt", c.guidance.w_txt));
        f.push_back(WF_FIELD(double, "guidance.w_temp", c.guidance.w_temp));
        f.push_back(WF_FIELD(double, "guidance.w_sem", c.guidance.w_sem));
        f.push_back(WF_FIELD(double, "guidance.w_spa", c.guidance.w_spa));
        f.push_back(WF_FIELD(std::size_t, "guidance.steps", c.guidance.steps));

        f.push_back({"sample.prompts", [](const RunConfig& c) { return c.sample_prompts; },
                     [](RunConfig& c, const std::string& v) { c.sample_prompts = v; }});
        f.push_back(WF_FIELD(std::size_t, "sample.count", c.sample_count));

        f.push_back(WF_FIELD(std::size_t, "eval.prompts", c.eval.prompts));
        f.push_back(WF_FIELD(std::size_t, "eval.equivalence_trials", c.eval.equivalence_trials));
        std::sort(f.begin(), f.end(), [](const Field& a, const Field& b) { return a.key < b.key; });
        return f;
    }();
    return table;
}

#undef WF_FIELD

}  // namespace

std::map<std::string, ConfigEntry> parse_config_text(const std::string& text, const std::string& origin) {
    std::map<std::string, ConfigEntry> out;
    std::istringstream is(text);
    std::string raw, section;
    int line = 0;
    while (std::getline(is, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (s.empty()) continue;
        const std::string where = origin + ":" + std::to_string(line);
        if (s.front() == '[') {
            if (s.back() != ']' || s.size() < 3) throw UsageError(where + ": malformed section header '" + s + "'");
            section = trim(s.substr(1, s.size() - 2));
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw UsageError(where + ": expected key = value, got '" + s + "'");
        if (section.empty()) throw UsageError(where + ": key outside of any [section]");
        const std::string key = section + "." + trim(s.substr(0, eq));
        if (out.count(key)) throw UsageError(where + ": duplicate key " + key + " (first set on line " + std::to_string(out[key].line) + ")");
        out[key] = {trim(s.substr(eq + 1)), line};
    }
    return out;
}

RunConfig run_config_from(const std::map<std::string, ConfigEntry>& entries) {
    RunConfig c;
    for (const auto& [key, e] : entries) {
        if (key == "paths.root") {
            c.root = e.value;
            continue;
        }
        const auto& table = fields();
        const auto it = std::lower_bound(table.begin(), table.end(), key, [](const Field& f, const std::string& k) { return f.key < k; });
        if (it == table.end() || it->key != key) throw UsageError("line " + std::to_string(e.line) + ": unknown key " + key);
        try {
            it->set(c, e.value);
        } catch (const UsageError& err) {
            throw UsageError("line " + std::to_string(e.line) + ": " + err.what());
        }
    }
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw UsageError("cannot read config " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    try {
        return run_config_from(parse_config_text(ss.str(), path.string()));
    } catch (const UsageError& e) {
        throw UsageError(path.string() + ": " + e.what());
    }
}

void RunConfig::validate() const {
    auto fail = [](const std::string& m) { throw UsageError("config: " + m); };
    try {
        world.validate();
        layout.validate();
        train.validate();
        guidance.validate();
        flow.validate();
    } catch (const UsageError&) {
        throw;
    } catch (const std::exception& e) {
        fail(e.what());
    }
    if (codec.patch == 0 || codec.temporal_patch == 0) fail("codec.patch and codec.temporal_patch must be positive");
    if (codec.channels() != layout.vae) {
        fail("codec channels 3*patch^2*temporal_patch = " + std::to_string(codec.channels()) + " must equal layout.vae = " +
             std::to_string(layout.vae));
    }
    if (layout.temporal != 0 && layout.temporal != layout.vae) fail("layout.temporal must equal layout.vae (flow colors share the codec)");
    if (k_semantic != layout.semantic) fail("features.k_semantic must equal layout.semantic");
    if (k_spatial != layout.spatial) fail("features.k_spatial must equal layout.spatial");
    if (world.height % int(codec.patch) || world.width % int(codec.patch)) fail("world height and width must be multiples of codec.patch");
    if (world.frames % int(codec.temporal_patch)) fail("world.frames must be a multiple of codec.temporal_patch");
    if (data.objects_min > data.objects_max || data.objects_max > worldsim::kMaxObjects) {
        fail("data.objects_min <= data.objects_max <= " + std::to_string(worldsim::kMaxObjects) + " is required");
    }
    if (data.gravity_fraction < 0 || data.gravity_fraction > 1) fail("data.gravity_fraction must lie in [0, 1]");
    if (feature_eps <= 0) fail("features.eps must be positive");
    if (pretrain_steps == 0) fail("pretrain.steps must be positive");
    try {
        pretrain().validate();
    } catch (const std::exception& e) {
        fail(std::string("pretrain: ") + e.what());
    }
    if (model.max_prompt < 2 + worldsim::kMaxObjects) {
        fail("model.max_prompt must be at least " + std::to_string(2 + worldsim::kMaxObjects) + " to hold the longest prompt");
    }
    try {
        model_config().validate();
    } catch (const std::exception& e) {
        fail(e.what());
    }
}

model::ModelConfig RunConfig::model_config() const {
    model::ModelConfig m = model;
    m.frames = std::size_t(world.frames) / codec.temporal_patch;
    m.height = std::size_t(world.height) / codec.patch;
    m.width = std::size_t(world.width) / codec.patch;
    m.vocab = worldsim::Vocabulary::size();
    return m;
}

std::string RunConfig::canonical() const {
    std::string out;
    for (const auto& f : fields()) out += f.key + " = " + f.get(*this) + "\n";
    return out;
}

std::uint64_t RunConfig::fingerprint() const { return fnv1a(canonical()); }

worldfeat::FeatureConfig RunConfig::features() const {
    worldfeat::FeatureConfig f;
    f.codec = codec;
    f.flow = flow;
    f.k_semantic = k_semantic;
    f.k_spatial = k_spatial;
    f.eps = feature_eps;
    return f;
}

train::TrainConfig RunConfig::pretrain() const {
    train::TrainConfig t = train;
    t.steps = pretrain_steps;
    t.lr = pretrain_lr;
    t.warmup = pretrain_warmup;
    t.lambda_base = 0;
    return t;
}

worldsim::WorldConfig RunConfig::episode_world(std::size_t index, bool heldout) const {
    Rng rng = substream(seed, heldout ? "heldout" : "episode", index);
    worldsim::WorldConfig w = world;
    w.n_objects = int(std::uniform_int_distribution<std::size_t>(data.objects_min, data.objects_max)(rng));
    const bool gravity = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < data.gravity_fraction;
    w.gravity = gravity ? world.gravity : 0.0;
    w.seed = rng();
    return w;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace worldflow::cli
