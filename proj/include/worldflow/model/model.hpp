// Copyright (C) 2026 The worldflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "worldflow/model/layout.hpp"
#include "worldflow/numerics/ops.hpp"
#include "worldflow/rng.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

// Joint denoiser: one token per latent cell, pre-norm transformer layers with
// timestep-modulated norms, cross-attention to the prompt, and input/output
// projections spanning every channel of the joint state.

namespace worldflow::model {

struct ModelConfig {
    std::size_t hidden = 64;
    std::size_t layers = 4;
    std::size_t heads = 4;
    std::size_t mlp_ratio = 4;
    std::size_t time_freq = 64;  // sinusoidal features before the time MLP
    std::size_t max_prompt = 8;
    std::size_t vocab = 16;
    std::size_t frames = 8, height = 8, width = 8;  // latent grid

    std::size_t tokens() const { return frames * height * width; }

    void validate() const {
        if (hidden == 0 || layers == 0 || heads == 0 || mlp_ratio == 0) throw std::invalid_argument("ModelConfig: sizes must be positive");
        if (hidden % heads != 0) throw std::invalid_argument("ModelConfig: hidden must be divisible by heads");
        if (time_freq == 0 || time_freq % 2 != 0) throw std::invalid_argument("ModelConfig: time_freq must be positive and even");
        if (max_prompt == 0 || vocab == 0) throw std::invalid_argument("ModelConfig: prompt table sizes must be positive");
        if (tokens() == 0) throw std::invalid_argument("ModelConfig: latent grid must be non-empty");
    }

    bool operator==(const ModelConfig&) const = default;
};

/// Named parameter tensors. Keys sort deterministically, which fixes the
/// serialization and optimizer order.
template <typename S>
struct ModelParams {
    ModelConfig config;
    ChannelLayout layout;
    std::map<std::string, NdArray<S>> tensors;

    NdArray<S>& operator[](const std::string& name) { return find(tensors, name); }
    const NdArray<S>& operator[](const std::string& name) const { return find(tensors, name); }

    std::size_t count() const {
        std::size_t n = 0;
        for (const auto& [_, t] : tensors) n += t.size();
        return n;
    }

    bool all_finite() const {
        for (const auto& [_, t] : tensors)
            if (!t.all_finite()) return false;
        return true;
    }

    template <typename T>
    ModelParams<T> cast() const {
        ModelParams<T> out{config, layout, {}};
        for (const auto& [k, t] : tensors) out.tensors.emplace(k, t.template cast<T>());
        return out;
    }

   private:
    template <typename M>
    static auto& find(M& m, const std::string& name) {
        auto it = m.find(name);
        if (it == m.end()) throw std::out_of_range("model parameter '" + name + "' does not exist");
        return it->second;
    }
};

/// Norm gains/biases, biases, and embedding tables are exempt from weight decay.
inline bool decays(const std::string& name) {
    const auto ends = [&](std::string_view suffix) {
        return name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    if (ends(".b") || ends(".g")) return false;
    return !(name.starts_with("pos.") || name.starts_with("prompt."));
}

namespace detail {

inline std::string layer_key(std::size_t l, const char* name) { return "layer" + std::to_string(l) + "." + name; }

template <typename S>
NdArray<S> xavier(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const S a = S(std::sqrt(6.0 / double(fan_in + fan_out)));
    return uniform<S>({fan_in, fan_out}, rng, -a, a);
}

template <typename S>
NdArray<S> scaled_normal(Shape shape, S stddev, Rng& rng) {
    NdArray<S> out = standard_normal<S>(std::move(shape), rng);
    out.values() *= stddev;
    return out;
}

/// n x D table with sin/cos pairs of the position in columns
/// [offset, offset + len) and zeros elsewhere. Frequencies are spaced evenly
/// up to pi, so sum_k cos(w_k d) peaks sharply at d = 0.
template <typename S>
NdArray<S> sincos_table(std::size_t n, std::size_t D, std::size_t offset, std::size_t len) {
    NdArray<S> out({n, D});
    const std::size_t pairs = len / 2;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < pairs; ++k) {
            const double w = std::numbers::pi * double(k + 1) / double(pairs);
            out.at(i, offset + 2 * k) = S(std::sin(double(i) * w));
            out.at(i, offset + 2 * k + 1) = S(std::cos(double(i) * w));
        }
    }
    return out;
}

}  // namespace detail

/// Fresh parameters. Rows of in.w and columns of out.w (and out.b entries)
/// covering world channels start at exactly zero; modulation weights start
/// at zero so every norm begins as a plain layer norm.
template <typename S>
ModelParams<S> init_params(const ModelConfig& cfg, const ChannelLayout& layout, std::uint64_t seed) {
    cfg.validate();
    layout.validate();
    Rng rng = substream(seed, "init");
    const std::size_t D = cfg.hidden, C = layout.total(), Cv = layout.vae;
    ModelParams<S> p{cfg, layout, {}};
    auto& t = p.tensors;

    NdArray<S> w_in({C, D});
    const NdArray<S> w_in_vae = detail::xavier<S>(Cv, D, rng);
    std::copy_n(w_in_vae.data(), w_in_vae.size(), w_in.data());
    t["in.w"] = std::move(w_in);
    t["in.b"] = NdArray<S>({D});

    // Learned, but started from sin/cos codes on disjoint thirds of the width
    // so attention can tell neighbors apart from the first step.
    const std::size_t third = D / 3;
    t["pos.h"] = detail::sincos_table<S>(cfg.height, D, 0, third);
    t["pos.w"] = detail::sincos_table<S>(cfg.width, D, third, third);
    t["pos.f"] = detail::sincos_table<S>(cfg.frames, D, 2 * third, D - 2 * third);

    t["time.fc1.w"] = detail::xavier<S>(cfg.time_freq, D, rng);
    t["time.fc1.b"] = NdArray<S>({D});
    t["time.fc2.w"] = detail::xavier<S>(D, D, rng);
    t["time.fc2.b"] = NdArray<S>({D});

    t["prompt.embed"] = detail::scaled_normal<S>({cfg.vocab, D}, S(0.02), rng);
    t["prompt.pos"] = detail::scaled_normal<S>({cfg.max_prompt, D}, S(0.02), rng);

    const std::size_t H = cfg.mlp_ratio * D;
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        auto key = [l](const char* n) { return detail::layer_key(l, n); };
        t[key("mod.w")] = NdArray<S>({D, 6 * D});
        t[key("mod.b")] = NdArray<S>({6 * D});
        for (const char* norm : {"norm1", "norm2", "norm3"}) {
            t[key((std::string(norm) + ".g").c_str())] = NdArray<S>({D}, S(1));
            t[key((std::string(norm) + ".b").c_str())] = NdArray<S>({D});
        }
        t[key("attn.qkv.w")] = detail::xavier<S>(D, 3 * D, rng);
        t[key("attn.qkv.b")] = NdArray<S>({3 * D});
        t[key("attn.out.w")] = detail::xavier<S>(D, D, rng);
        t[key("attn.out.b")] = NdArray<S>({D});
        t[key("cross.q.w")] = detail::xavier<S>(D, D, rng);
        t[key("cross.q.b")] = NdArray<S>({D});
        t[key("cross.kv.w")] = detail::xavier<S>(D, 2 * D, rng);
        t[key("cross.kv.b")] = NdArray<S>({2 * D});
        t[key("cross.out.w")] = detail::xavier<S>(D, D, rng);
        t[key("cross.out.b")] = NdArray<S>({D});
        t[key("mlp.fc1.w")] = detail::xavier<S>(D, H, rng);
        t[key("mlp.fc1.b")] = NdArray<S>({H});
        t[key("mlp.fc2.w")] = detail::xavier<S>(H, D, rng);
        t[key("mlp.fc2.b")] = NdArray<S>({D});
    }

    t["final.mod.w"] = NdArray<S>({D, 2 * D});
    t["final.mod.b"] = NdArray<S>({2 * D});
    t["final.norm.g"] = NdArray<S>({D}, S(1));
    t["final.norm.b"] = NdArray<S>({D});

    NdArray<S> w_out({D, C});
    const NdArray<S> w_out_vae = detail::xavier<S>(D, Cv, rng);
    for (std::size_t r = 0; r < D; ++r) std::copy_n(w_out_vae.data() + r * Cv, Cv, w_out.data() + r * C);
    t["out.w"] = std::move(w_out);
    t["out.b"] = NdArray<S>({C});
    return p;
}

/// Widens a video-only base model to `layout`: in.w gains zero rows, out.w
/// zero columns and out.b zero entries for the world channels; everything
/// else is copied.
template <typename S>
ModelParams<S> init_expanded(const ModelParams<S>& base, const ChannelLayout& layout) {
    layout.validate();
    if (base.layout.has_world()) {
        throw std::invalid_argument("init_expanded: base model already has world channels, layout " + layout_str(base.layout));
    }
    if (base.layout.vae != layout.vae) {
        throw std::invalid_argument("init_expanded: base C_vae=" + std::to_string(base.layout.vae) + " but target layout " +
                                    layout_str(layout) + " needs C_vae=" + std::to_string(layout.vae));
    }
    const std::size_t D = base.config.hidden, Cv = layout.vae, C = layout.total();
    const NdArray<S>& w_in = base["in.w"];
    const NdArray<S>& w_out = base["out.w"];
    const NdArray<S>& b_out = base["out.b"];
    if (w_in.shape() != Shape{Cv, D}) throw ShapeError("init_expanded", w_in.shape(), Shape{Cv, D}, "base input projection");
    if (w_out.shape() != Shape{D, Cv}) throw ShapeError("init_expanded", w_out.shape(), Shape{D, Cv}, "base output projection");
    if (b_out.shape() != Shape{Cv}) throw ShapeError("init_expanded", b_out.shape(), Shape{Cv}, "base output bias");

    ModelParams<S> p = base;
    p.layout = layout;
    NdArray<S> wi({C, D}), wo({D, C}), bo({C});
    std::copy_n(w_in.data(), w_in.size(), wi.data());
    for (std::size_t r = 0; r < D; ++r) std::copy_n(w_out.data() + r * Cv, Cv, wo.data() + r * C);
    std::copy_n(b_out.data(), Cv, bo.data());
    p["in.w"] = std::move(wi);
    p["out.w"] = std::move(wo);
    p["out.b"] = std::move(bo);
    return p;
}

/// Parameters recorded as leaves of one graph.
template <typename S>
struct Bound {
    Graph<S>* graph = nullptr;
    const ModelConfig* config = nullptr;
    ChannelLayout layout;
    std::map<std::string, Var<S>> vars;

    Var<S> operator()(const std::string& name) const {
        auto it = vars.find(name);
        if (it == vars.end()) throw std::out_of_range("model parameter '" + name + "' does not exist");
        return it->second;
    }
};

template <typename S>
Bound<S> bind(Graph<S>& g, const ModelParams<S>& p, bool trainable) {
    Bound<S> b{&g, &p.config, p.layout, {}};
    for (const auto& [name, t] : p.tensors) b.vars.emplace(name, g.leaf(t, trainable));
    return b;
}

namespace detail {

template <typename S>
Var<S> linear(const Bound<S>& p, Var<S> x, const std::string& prefix) {
    return add_row(matmul(x, p(prefix + ".w")), p(prefix + ".b"));
}

template <typename S>
Var<S> norm(const Bound<S>& p, Var<S> x, const std::string& prefix) {
    return add_row(mul_row(layer_norm(x), p(prefix + ".g")), p(prefix + ".b"));
}

/// x * (1 + scale) + shift, with (1, D) shift/scale rows.
template <typename S>
Var<S> modulate(Var<S> x, Var<S> shift, Var<S> scale, Var<S> ones) {
    return add_row(mul_row(x, add(scale, ones)), shift);
}

/// Multi-head attention of queries q (Nq x D) over keys/values (Nk x D).
template <typename S>
Var<S> attention(Var<S> q, Var<S> k, Var<S> v, std::size_t heads) {
    const std::size_t D = q.shape()[1], dh = D / heads;
    const S inv = S(1) / std::sqrt(S(dh));
    std::vector<Var<S>> outs;
    outs.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        Var<S> qh = scale(slice(q, 1, h * dh, dh), inv);
        Var<S> kh = slice(k, 1, h * dh, dh);
        Var<S> vh = slice(v, 1, h * dh, dh);
        outs.push_back(matmul(softmax(matmul_nt(qh, kh)), vh));
    }
    return heads == 1 ? outs.front() : concat(outs, 1);
}

inline void check_prompt(const ModelConfig& cfg, const std::vector<int>& prompt) {
    if (prompt.empty()) throw std::invalid_argument("forward: prompt must hold at least one token (use the null token)");
    if (prompt.size() > cfg.max_prompt) {
        throw std::invalid_argument("forward: prompt has " + std::to_string(prompt.size()) + " tokens, limit is " +
                                    std::to_string(cfg.max_prompt));
    }
    for (int id : prompt) {
        if (id < 0 || std::size_t(id) >= cfg.vocab) throw std::invalid_argument("forward: token id " + std::to_string(id) + " outside the vocabulary");
    }
}

}  // namespace detail

/// Velocity for one sample. z: (tokens x C_total) on p's graph; returns the
/// same shape. World input rows and output columns are applied as separate
/// blocks so a zero block contributes exact zeros.
template <typename S>
Var<S> forward(const Bound<S>& p, Var<S> z, S t, const std::vector<int>& prompt) {
    const ModelConfig& cfg = *p.config;
    const ChannelLayout& L = p.layout;
    Graph<S>& g = *p.graph;
    const std::size_t N = cfg.tokens(), D = cfg.hidden, Cv = L.vae, Cw = L.world();
    if (z.shape() != Shape{N, L.total()}) throw ShapeError("forward", z.shape(), Shape{N, L.total()}, "joint tokens");
    if (!(t >= S(0) && t <= S(1))) throw std::invalid_argument("forward: t must lie in [0, 1]");
    detail::check_prompt(cfg, prompt);

    g.set_scope("embed");
    Var<S> w_in = p("in.w");
    Var<S> h = matmul(Cw ? slice(z, 1, 0, Cv) : z, Cw ? slice(w_in, 0, 0, Cv) : w_in);
    if (Cw) h = add(h, matmul(slice(z, 1, Cv, Cw), slice(w_in, 0, Cv, Cw)));
    h = add_row(h, p("in.b"));

    std::vector<std::size_t> fi(N), hi(N), wi(N);
    for (std::size_t n = 0; n < N; ++n) {
        fi[n] = n / (cfg.height * cfg.width);
        hi[n] = (n / cfg.width) % cfg.height;
        wi[n] = n % cfg.width;
    }
    h = add(h, add(gather_rows(p("pos.f"), std::move(fi)), add(gather_rows(p("pos.h"), std::move(hi)), gather_rows(p("pos.w"), std::move(wi)))));

    Var<S> tv = g.constant(NdArray<S>::scalar(t * S(1000)));
    Var<S> temb = detail::linear(p, gelu(detail::linear(p, sinusoidal_embed(tv, cfg.time_freq), "time.fc1")), "time.fc2");
    Var<S> cond = gelu(temb);

    std::vector<std::size_t> tok(prompt.begin(), prompt.end()), pos(prompt.size());
    for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = i;
    Var<S> ctx = add(gather_rows(p("prompt.embed"), std::move(tok)), gather_rows(p("prompt.pos"), std::move(pos)));

    Var<S> ones = g.constant(NdArray<S>({1, D}, S(1)));
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        g.set_scope("layer " + std::to_string(l));
        auto key = [l](const char* n) { return detail::layer_key(l, n); };
        Var<S> mod = detail::linear(p, cond, key("mod"));
        auto m = [&](std::size_t i) { return slice(mod, 1, i * D, D); };

        Var<S> a = detail::modulate(detail::norm(p, h, key("norm1")), m(0), m(1), ones);
        Var<S> qkv = detail::linear(p, a, key("attn.qkv"));
        Var<S> sa = detail::attention(slice(qkv, 1, 0, D), slice(qkv, 1, D, D), slice(qkv, 1, 2 * D, D), cfg.heads);
        h = add(h, detail::linear(p, sa, key("attn.out")));

        Var<S> c = detail::modulate(detail::norm(p, h, key("norm2")), m(2), m(3), ones);
        Var<S> kv = detail::linear(p, ctx, key("cross.kv"));
        Var<S> ca = detail::attention(detail::linear(p, c, key("cross.q")), slice(kv, 1, 0, D), slice(kv, 1, D, D), cfg.heads);
        h = add(h, detail::linear(p, ca, key("cross.out")));

        Var<S> f = detail::modulate(detail::norm(p, h, key("norm3")), m(4), m(5), ones);
        h = add(h, detail::linear(p, gelu(detail::linear(p, f, key("mlp.fc1"))), key("mlp.fc2")));
    }

    g.set_scope("head");
    Var<S> fm = detail::linear(p, cond, "final.mod");
    h = detail::modulate(detail::norm(p, h, "final.norm"), slice(fm, 1, 0, D), slice(fm, 1, D, D), ones);
    Var<S> w_out = p("out.w"), b_out = p("out.b");
    if (!Cw) return add_row(matmul(h, w_out), b_out);
    Var<S> vae = add_row(matmul(h, slice(w_out, 1, 0, Cv)), slice(b_out, 0, 0, Cv));
    Var<S> world = add_row(matmul(h, slice(w_out, 1, Cv, Cw)), slice(b_out, 0, Cv, Cw));
    return concat(std::vector<Var<S>>{vae, world}, 1);
}

/// Gradient-free velocity for a F_lat x H_lat x W_lat x C_total grid.
template <typename S>
NdArray<S> predict(const ModelParams<S>& params, const NdArray<S>& z, S t, const std::vector<int>& prompt) {
    const ModelConfig& cfg = params.config;
    const Shape grid{cfg.frames, cfg.height, cfg.width, params.layout.total()};
    if (z.shape() != grid) throw ShapeError("predict", z.shape(), grid, "joint latent grid");
    Graph<S> g;
    const Bound<S> b = bind(g, params, false);
    Var<S> out = forward(b, g.constant(z.reshaped({cfg.tokens(), params.layout.total()})), t, prompt);
    return out.value().reshaped(grid);
}

}  // namespace worldflow::model
