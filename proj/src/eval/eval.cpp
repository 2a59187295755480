// Copyright (C) 2026 The worldflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "worldflow/eval/eval.hpp"

#include "worldflow/worldsim/world.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace worldflow::eval {

int palette_class(const float* p) {
    auto dist = [&](const std::array<float, 3>& c) {
        return (p[0] - c[0]) * (p[0] - c[0]) + (p[1] - c[1]) * (p[1] - c[1]) + (p[2] - c[2]) * (p[2] - c[2]);
    };
    const auto& pal = worldsim::palette();
    float best = dist(worldsim::kBackground);
    int arg = -1;
    for (std::size_t c = 0; c < pal.size(); ++c) {
        const float d = dist(pal[c].rgb);
        if (d < best) {
            best = d;
            arg = int(c);
        }
    }
    return arg;
}

namespace {

struct Search {
    std::vector<double> cost;  // (2R+1)^2, row-major over (dy, dx); inf when not a candidate
    int dx = 0, dy = 0;
};

// Exhaustive search; the SAD for one displacement comes from `sad(dx, dy)`.
template <typename F>
Search exhaustive(int R, F&& sad) {
    const int side = 2 * R + 1;
    Search s;
    s.cost.assign(std::size_t(side * side), std::numeric_limits<double>::infinity());
    double best = std::numeric_limits<double>::infinity();
    int best_len = 0;
    for (int dy = -R; dy <= R; ++dy) {
        for (int dx = -R; dx <= R; ++dx) {
            const double c = sad(dx, dy);
            s.cost[std::size_t((dy + R) * side + dx + R)] = c;
            const int len = dx * dx + dy * dy;
            if (c < best || (c == best && len < best_len)) {
                best = c;
                s.dx = dx;
                s.dy = dy;
                best_len = len;
            }
        }
    }
    return s;
}

// Offset in [-0.5, 0.5] of the V-shaped cost minimum through three samples.
double equiangular(double left, double mid, double right) {
    if (!std::isfinite(left) || !std::isfinite(right)) return 0.0;
    const double den = std::max(left, right) - mid;
    if (den <= 0) return 0.0;
    return std::clamp((left - right) / (2 * den), -0.5, 0.5);
}

std::array<float, 2> refine(const Search& s, int R, bool subpixel) {
    double fx = s.dx, fy = s.dy;
    if (subpixel) {
        const int side = 2 * R + 1;
        auto at = [&](int dx, int dy) {
            if (dx < -R || dx > R || dy < -R || dy > R) return std::numeric_limits<double>::infinity();
            return s.cost[std::size_t((dy + R) * side + dx + R)];
        };
        const double c0 = at(s.dx, s.dy);
        fx += equiangular(at(s.dx - 1, s.dy), c0, at(s.dx + 1, s.dy));
        fy += equiangular(at(s.dx, s.dy - 1), c0, at(s.dx, s.dy + 1));
    }
    return {float(fx), float(fy)};
}

}  // namespace

ArrayF block_matching_flow(const ArrayF& video, const BlockMatchParams& params) {
    if (video.rank() != 4 || video.dim(3) != 3 || video.dim(0) < 2) {
        throw ShapeError("block_matching_flow", video.shape(), "expected F x H x W x 3 with F >= 2");
    }
    if (params.radius < 0) throw std::invalid_argument("block_matching_flow: radius must be non-negative");
    const std::size_t F = video.dim(0), H = video.dim(1), W = video.dim(2), B = params.block;
    const int R = params.radius;
    auto px = [&](std::size_t f, long y, long x) {
        y = std::clamp(y, 0L, long(H) - 1);
        x = std::clamp(x, 0L, long(W) - 1);
        return video.data() + ((f * H + std::size_t(y)) * W + std::size_t(x)) * 3;
    };
    auto diff = [](const float* a, const float* b) {
        return double(std::abs(a[0] - b[0])) + std::abs(a[1] - b[1]) + std::abs(a[2] - b[2]);
    };
    ArrayF flow({F - 1, H, W, 2});
    auto assign = [&](std::size_t f, std::size_t y, std::size_t x, std::array<float, 2> d) {
        flow.at(f, y, x, 0) = d[0];
        flow.at(f, y, x, 1) = d[1];
    };

    if (params.support == MatchSupport::block) {
        if (B == 0 || H % B || W % B) throw std::invalid_argument("block_matching_flow: frame extents must be multiples of the block size");
        for (std::size_t f = 0; f + 1 < F; ++f) {
            for (std::size_t by = 0; by < H; by += B) {
                for (std::size_t bx = 0; bx < W; bx += B) {
                    const Search s = exhaustive(R, [&](int dx, int dy) {
                        const long ty = long(by) + dy, tx = long(bx) + dx;
                        if (ty < 0 || tx < 0 || ty + long(B) > long(H) || tx + long(B) > long(W)) return std::numeric_limits<double>::infinity();
                        double sad = 0;
                        for (std::size_t y = 0; y < B; ++y)
                            for (std::size_t x = 0; x < B; ++x) sad += diff(px(f, long(by + y), long(bx + x)), px(f + 1, ty + long(y), tx + long(x)));
                        return sad;
                    });
                    const auto d = refine(s, R, params.subpixel);
                    for (std::size_t y = 0; y < B; ++y)
                        for (std::size_t x = 0; x < B; ++x) assign(f, by + y, bx + x, d);
                }
            }
        }
        return flow;
    }

    const std::size_t classes = worldsim::palette().size();
    std::vector<std::vector<std::size_t>> members(classes);
    for (std::size_t f = 0; f + 1 < F; ++f) {
        for (auto& m : members) m.clear();
        for (std::size_t i = 0; i < H * W; ++i) {
            const int c = palette_class(px(f, long(i / W), long(i % W)));
            if (c >= 0) members[std::size_t(c)].push_back(i);
        }
        for (const auto& support : members) {
            if (support.empty()) continue;
            const Search s = exhaustive(R, [&](int dx, int dy) {
                double sad = 0;
                for (std::size_t i : support) {
                    const long y = long(i / W), x = long(i % W);
                    sad += diff(px(f, y, x), px(f + 1, y + dy, x + dx));
                }
                return sad;
            });
            const auto d = refine(s, R, params.subpixel);
            for (std::size_t i : support) assign(f, i / W, i % W, d);
        }
    }
    return flow;
}

double flow_consistency(const ArrayF& video, const ArrayF& predicted_temporal, const codec::CodecConfig& codec,
                        const worldfeat::FlowRgbParams& flow, const BlockMatchParams& params) {
    ArrayF predicted = codec::decode(predicted_temporal, codec);
    if (predicted.shape() != video.shape()) {
        throw ShapeError("flow_consistency", video.shape(), predicted.shape(), "decoded temporal latent must match the video");
    }
    const ArrayF measured = worldfeat::flow_to_rgb(block_matching_flow(video, params), flow);
    predicted = slice(predicted, 0, 0, video.dim(0) - 1);
    const auto a = predicted.values().max(0.0f).min(1.0f).cast<double>();
    const auto b = measured.values().max(0.0f).min(1.0f).cast<double>();
    return 1.0 - (a - b).abs().mean();
}

namespace {

struct Segment {
    int color = 0;
    std::vector<std::uint8_t> mask;
    double cy = 0, cx = 0;
    std::size_t area = 0;
};

std::vector<Segment> segment_frame(const ArrayF& video, std::size_t f) {
    const std::size_t H = video.dim(1), W = video.dim(2);
    const auto& pal = worldsim::palette();
    std::vector<Segment> segs(pal.size());
    for (std::size_t c = 0; c < pal.size(); ++c) {
        segs[c].color = int(c);
        segs[c].mask.assign(H * W, 0);
    }
    for (std::size_t i = 0; i < H * W; ++i) {
        const int arg = palette_class(video.data() + (f * H * W + i) * 3);
        if (arg < 0) continue;
        Segment& s = segs[std::size_t(arg)];
        s.mask[i] = 1;
        s.cy += double(i / W);
        s.cx += double(i % W);
        ++s.area;
    }
    std::vector<Segment> out;
    for (auto& s : segs) {
        if (!s.area) continue;
        s.cy /= double(s.area);
        s.cx /= double(s.area);
        out.push_back(std::move(s));
    }
    return out;
}

// IoU of a and b after translating b by the rounded centroid offset.
double aligned_iou(const Segment& a, const Segment& b, std::size_t H, std::size_t W) {
    const long sy = std::lround(a.cy - b.cy), sx = std::lround(a.cx - b.cx);
    std::size_t inter = 0;
    for (std::size_t i = 0; i < H * W; ++i) {
        if (!b.mask[i]) continue;
        const long y = long(i / W) + sy, x = long(i % W) + sx;
        if (y < 0 || x < 0 || y >= long(H) || x >= long(W)) continue;
        inter += a.mask[std::size_t(y) * W + std::size_t(x)];
    }
    const std::size_t uni = a.area + b.area - inter;
    return uni ? double(inter) / double(uni) : 0.0;
}

}  // namespace

SubjectScore subject_consistency_proxy(const ArrayF& video) {
    if (video.rank() != 4 || video.dim(3) != 3) throw ShapeError("subject_consistency_proxy", video.shape(), "expected F x H x W x 3");
    const std::size_t F = video.dim(0), H = video.dim(1), W = video.dim(2);
    std::vector<std::vector<Segment>> frames;
    bool any = false;
    for (std::size_t f = 0; f < F; ++f) {
        frames.push_back(segment_frame(video, f));
        any = any || !frames.back().empty();
    }
    if (!any) return {0.0, true};
    if (F < 2) return {1.0, false};

    double total = 0;
    for (std::size_t f = 0; f + 1 < F; ++f) {
        const auto& A = frames[f];
        const auto& Bs = frames[f + 1];
        const std::size_t slots = std::max(A.size(), Bs.size());
        if (!slots) {
            total += 1.0;  // both frames empty: nothing changed
            continue;
        }
        struct Pair {
            double iou;
            std::size_t i, j;
        };
        std::vector<Pair> pairs;
        for (std::size_t i = 0; i < A.size(); ++i)
            for (std::size_t j = 0; j < Bs.size(); ++j) pairs.push_back({aligned_iou(A[i], Bs[j], H, W), i, j});
        std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) { return x.iou > y.iou; });
        std::vector<bool> used_a(A.size()), used_b(Bs.size());
        double sum = 0;
        for (const auto& p : pairs) {
            if (used_a[p.i] || used_b[p.j]) continue;
            used_a[p.i] = used_b[p.j] = true;
            sum += p.iou;
        }
        total += sum / double(slots);
    }
    return {total / double(F - 1), false};
}

EquivalenceReport base_equivalence_report(const model::ModelParams<float>& expanded, const model::ModelParams<float>& base,
                                          std::size_t trials, std::uint64_t seed) {
    EquivalenceReport r;
    r.trials = trials;
    if (trials == 0) {
        r.vacuous = true;
        return r;
    }
    if (expanded.layout.vae != base.layout.vae || base.layout.has_world()) {
        throw std::invalid_argument("base_equivalence_report: expanded layout " + model::layout_str(expanded.layout) +
                                    " is not a widening of base layout " + model::layout_str(base.layout));
    }
    const model::ModelConfig& c = expanded.config;
    std::uniform_real_distribution<float> unit(0.0f, 1.0f);
    std::uniform_int_distribution<int> word(1, int(c.vocab) - 1);
    std::uniform_int_distribution<std::size_t> length(1, c.max_prompt);
    for (std::size_t i = 0; i < trials; ++i) {
        Rng rng = substream(seed, "equivalence", i);
        const ArrayF z = standard_normal<float>({c.frames, c.height, c.width, expanded.layout.total()}, rng);
        const float t = unit(rng);
        std::vector<int> prompt(length(rng));
        for (int& w : prompt) w = word(rng);
        const auto parts = model::split(model::predict(expanded, z, t, prompt), expanded.layout);
        const ArrayF vb = model::predict(base, model::split(z, expanded.layout).vae, t, prompt);
        r.max_deviation = std::max(r.max_deviation, double(max_abs_diff(parts.vae, vb)));
        for (const ArrayF* w : {&parts.temporal, &parts.semantic, &parts.spatial}) {
            if (w->size()) r.world_max = std::max(r.world_max, double(w->values().abs().maxCoeff()));
        }
    }
    return r;
}

MetricReport MetricReport::from(std::string name, std::vector<double> values, std::uint64_t fingerprint) {
    MetricReport r{std::move(name), std::move(values), 0, 0, fingerprint};
    for (double v : r.values) {
        if (!std::isfinite(v)) throw std::invalid_argument("MetricReport: " + r.name + " has a non-finite value");
    }
    if (!r.values.empty()) {
        double s = 0;
        for (double v : r.values) s += v;
        r.mean = s / double(r.values.size());
        double q = 0;
        for (double v : r.values) q += (v - r.mean) * (v - r.mean);
        r.std = std::sqrt(q / double(r.values.size()));
    }
    return r;
}

std::string MetricReport::json() const {
    char fp[17];
    std::snprintf(fp, sizeof fp, "%016llx", static_cast<unsigned long long>(fingerprint));
    nlohmann::ordered_json j;
    j["metric"] = name;
    j["mean"] = mean;
    j["std"] = std;
    j["n"] = values.size();
    j["values"] = values;
    j["fingerprint"] = fp;
    return j.dump();
}

std::string summary_table(const std::vector<MetricReport>& reports) {
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof line, "%-28s %6s %10s %10s\n", "metric", "n", "mean", "std");
    os << line;
    for (const auto& r : reports) {
        std::snprintf(line, sizeof line, "%-28s %6zu %10.6f %10.6f\n", r.name.c_str(), r.values.size(), r.mean, r.std);
        os << line;
    }
    return os.str();
}

}  // namespace worldflow::eval
