// Copyright (C) 2026 The worldflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "worldflow/model/checkpoint.hpp"

#include "worldflow/numerics/io.hpp"

#include <fstream>

namespace worldflow::model {

namespace {

constexpr std::array<char, 4> kMagic{'D', 'W', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void put(std::ostream& os, std::size_t v) { io::write_le<std::uint32_t>(os, std::uint32_t(v)); }
std::size_t get(std::istream& is) { return io::read_le<std::uint32_t>(is); }

}  // namespace

void write_checkpoint(std::ostream& os, const Checkpoint& ck) {
    const ModelConfig& c = ck.params.config;
    const ChannelLayout& l = ck.params.layout;
    io::write_magic(os, kMagic);
    io::write_le<std::uint32_t>(os, kVersion);
    for (std::size_t v : {l.vae, l.temporal, l.semantic, l.spatial}) put(os, v);
    for (std::size_t v : {c.hidden, c.layers, c.heads, c.mlp_ratio, c.time_freq, c.max_prompt, c.vocab, c.frames, c.height, c.width}) put(os, v);
    io::write_le<std::uint64_t>(os, ck.step);
    io::write_le<std::uint64_t>(os, ck.fingerprint);
    put(os, ck.params.tensors.size() + ck.state.size());
    for (const auto& [name, t] : ck.params.tensors) {
        io::write_string(os, "param." + name);
        write_array(os, t);
    }
    for (const auto& [name, t] : ck.state) {
        io::write_string(os, "state." + name);
        write_array(os, t);
    }
    if (!os) throw std::runtime_error("checkpoint write failed");
}

Checkpoint read_checkpoint(std::istream& is) {
    io::expect_magic(is, kMagic);
    if (const auto v = io::read_le<std::uint32_t>(is); v != kVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(v));
    }
    Checkpoint ck;
    ChannelLayout& l = ck.params.layout;
    ModelConfig& c = ck.params.config;
    for (std::size_t* f : {&l.vae, &l.temporal, &l.semantic, &l.spatial}) *f = get(is);
    for (std::size_t* f : {&c.hidden, &c.layers, &c.heads, &c.mlp_ratio, &c.time_freq, &c.max_prompt, &c.vocab, &c.frames, &c.height, &c.width}) {
        *f = get(is);
    }
    c.validate();
    l.validate();
    ck.step = io::read_le<std::uint64_t>(is);
    ck.fingerprint = io::read_le<std::uint64_t>(is);
    const std::size_t n = get(is);
    for (std::size_t i = 0; i < n; ++i) {
        const std::string name = io::read_string(is);
        ArrayF t = read_array<float>(is);
        if (name.starts_with("param.")) {
            ck.params.tensors.emplace(name.substr(6), std::move(t));
        } else if (name.starts_with("state.")) {
            ck.state.emplace(name.substr(6), std::move(t));
        } else {
            throw FormatError("checkpoint entry '" + name + "' has no param./state. prefix");
        }
    }
    // Structural check against a freshly built parameter set.
    const ModelParams<float> ref = init_params<float>(c, l, 0);
    if (ref.tensors.size() != ck.params.tensors.size()) throw FormatError("checkpoint parameter set does not match its header");
    for (const auto& [name, t] : ref.tensors) {
        auto it = ck.params.tensors.find(name);
        if (it == ck.params.tensors.end()) throw FormatError("checkpoint lacks parameter " + name);
        if (it->second.shape() != t.shape()) throw FormatError("checkpoint parameter " + name + " has shape " + shape_str(it->second.shape()));
    }
    return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        write_checkpoint(os, ck);
        os.flush();
        if (!os) throw std::runtime_error("failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("missing checkpoint " + path.string());
    return read_checkpoint(is);
}

}  // namespace worldflow::model
