// Copyright (C) 2026 The worldflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "worldflow/worldfeat/flow_rgb.hpp"

#include "worldflow/worldfeat/align.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace worldflow::worldfeat {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

void FlowRgbParams::validate() const {
    if (!(sigma > 0.0)) throw std::invalid_argument("FlowRgbParams: sigma must be positive");
}

double angle_to_hue(double angle) {
    double h = std::fmod(angle + kTwoPi, kTwoPi) / kTwoPi;
    if (h >= 1.0) h -= 1.0;
    return h;
}

std::array<double, 3> hsv_to_rgb(double hue, double s, double v) {
    const double h6 = hue * 6.0;
    const double sector = std::floor(h6);
    const double f = h6 - sector;
    const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    switch (int(sector) % 6) {
        case 0: return {v, t, p};
        case 1: return {q, v, p};
        case 2: return {p, v, t};
        case 3: return {p, q, v};
        case 4: return {t, p, v};
        default: return {v, p, q};
    }
}

std::array<double, 3> rgb_to_hsv(const std::array<double, 3>& c) {
    const double mx = std::max({c[0], c[1], c[2]});
    const double mn = std::min({c[0], c[1], c[2]});
    const double delta = mx - mn;
    double h = 0;
    if (delta > 0) {
        if (mx == c[0]) {
            h = std::fmod((c[1] - c[2]) / delta + 6.0, 6.0);
        } else if (mx == c[1]) {
            h = (c[2] - c[0]) / delta + 2.0;
        } else {
            h = (c[0] - c[1]) / delta + 4.0;
        }
        h /= 6.0;
    }
    const double s = mx > 0 ? delta / mx : 0.0;
    return {h, s, mx};
}

Motion flow_motion(double u, double v, std::size_t height, std::size_t width, const FlowRgbParams& params) {
    const double diag = std::sqrt(double(height * height + width * width));
    const double m = std::min(1.0, std::hypot(u, v) / (params.sigma * diag));
    return {m, std::atan2(v, u)};
}

std::array<double, 3> motion_to_rgb(const Motion& m) { return hsv_to_rgb(angle_to_hue(m.angle), 1.0, m.magnitude); }

Motion rgb_to_motion(const std::array<double, 3>& rgb) {
    const auto hsv = rgb_to_hsv(rgb);
    double angle = hsv[0] * kTwoPi;
    if (angle > std::numbers::pi) angle -= kTwoPi;
    return {hsv[2], hsv[2] > 0 ? angle : 0.0};
}

ArrayF flow_to_rgb(const ArrayF& flow, const FlowRgbParams& params) {
    params.validate();
    if (flow.rank() < 3 || flow.shape().back() != 2) throw ShapeError("flow_to_rgb", flow.shape(), "expected (..., H, W, 2)");
    const std::size_t H = flow.dim(flow.rank() - 3), W = flow.dim(flow.rank() - 2);
    Shape out_shape = flow.shape();
    out_shape.back() = 3;
    ArrayF out(out_shape);
    const std::size_t pixels = flow.size() / 2;
    for (std::size_t i = 0; i < pixels; ++i) {
        const auto rgb = motion_to_rgb(flow_motion(flow[2 * i], flow[2 * i + 1], H, W, params));
        for (int c = 0; c < 3; ++c) out[3 * i + std::size_t(c)] = float(rgb[std::size_t(c)]);
    }
    return out;
}

ArrayF flow_rgb_video(const ArrayF& flow, const FlowRgbParams& params) {
    if (flow.rank() != 4 || flow.dim(3) != 2 || flow.dim(0) == 0) {
        throw ShapeError("flow_rgb_video", flow.shape(), "expected (F-1) x H x W x 2 with F >= 2");
    }
    ArrayF rgb = flow_to_rgb(flow, params);
    return concat({rgb, slice(rgb, 0, rgb.dim(0) - 1, 1)}, 0);
}

ArrayF align(const ArrayF& feature, const GridExtent& target) {
    if (feature.rank() != 4) throw ShapeError("align", feature.shape(), "expected F x H x W x D");
    if (target.frames == 0 || target.height == 0 || target.width == 0) {
        throw std::invalid_argument("align: target extents must be positive");
    }
    const std::size_t F = feature.dim(0), H = feature.dim(1), W = feature.dim(2), D = feature.dim(3);
    if (F % target.frames != 0) {
        throw std::invalid_argument("align: " + std::to_string(F) + " frames cannot be pooled evenly into " +
                                    std::to_string(target.frames));
    }
    const std::size_t Ht = target.height, Wt = target.width;

    struct Tap {
        std::size_t i0, i1;
        float w;
    };
    auto taps = [](std::size_t src, std::size_t dst) {
        std::vector<Tap> out(dst);
        const double scale = double(src) / double(dst);
        for (std::size_t i = 0; i < dst; ++i) {
            double c = (double(i) + 0.5) * scale - 0.5;
            c = std::clamp(c, 0.0, double(src - 1));
            const auto i0 = std::size_t(std::floor(c));
            const std::size_t i1 = std::min(i0 + 1, src - 1);
            out[i] = {i0, i1, float(c - double(i0))};
        }
        return out;
    };
    const auto ty = taps(H, Ht), tx = taps(W, Wt);

    ArrayF resized({F, Ht, Wt, D});
    for (std::size_t f = 0; f < F; ++f)
        for (std::size_t i = 0; i < Ht; ++i)
            for (std::size_t j = 0; j < Wt; ++j) {
                float* dst = resized.data() + ((f * Ht + i) * Wt + j) * D;
                const auto& a = ty[i];
                const auto& b = tx[j];
                const float* p00 = feature.data() + ((f * H + a.i0) * W + b.i0) * D;
                const float* p01 = feature.data() + ((f * H + a.i0) * W + b.i1) * D;
                const float* p10 = feature.data() + ((f * H + a.i1) * W + b.i0) * D;
                const float* p11 = feature.data() + ((f * H + a.i1) * W + b.i1) * D;
                for (std::size_t d = 0; d < D; ++d) {
                    const float top = p00[d] + b.w * (p01[d] - p00[d]);
                    const float bottom = p10[d] + b.w * (p11[d] - p10[d]);
                    dst[d] = top + a.w * (bottom - top);
                }
            }

    const std::size_t group = F / target.frames;
    if (group == 1) return resized;
    ArrayF pooled({target.frames, Ht, Wt, D});
    const std::size_t frame_size = Ht * Wt * D;
    for (std::size_t f = 0; f < target.frames; ++f) {
        for (std::size_t g = 0; g < group; ++g) {
            const float* src = resized.data() + (f * group + g) * frame_size;
            float* dst = pooled.data() + f * frame_size;
            for (std::size_t i = 0; i < frame_size; ++i) dst[i] += src[i];
        }
    }
    pooled.values() /= float(group);
    return pooled;
}

}  // namespace worldflow::worldfeat
