// Copyright (C) 2026 The worldflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "worldflow/numerics/ndarray.hpp"

#include <array>

namespace worldflow::worldfeat {

/// Motion-to-color encoding. Magnitude drives HSV value, direction drives
/// hue, saturation is fixed at 1.
struct FlowRgbParams {
    double sigma = 0.1;  // magnitude reaching value 1 is sigma * sqrt(H^2 + W^2)

    void validate() const;
};

struct Motion {
    double magnitude = 0;  // normalized, in [0, 1]
    double angle = 0;      // radians, (-pi, pi]
};

/// hue = ((angle + 2 pi) mod 2 pi) / 2 pi
double angle_to_hue(double angle);
std::array<double, 3> hsv_to_rgb(double hue, double saturation, double value);
std::array<double, 3> rgb_to_hsv(const std::array<double, 3>& rgb);

Motion flow_motion(double u, double v, std::size_t height, std::size_t width, const FlowRgbParams& params);
std::array<double, 3> motion_to_rgb(const Motion& m);
/// Inverse of motion_to_rgb through HSV; exact up to rounding while the
/// magnitude is below the clamp. Zero magnitude maps to angle 0.
Motion rgb_to_motion(const std::array<double, 3>& rgb);

/// (..., H, W, 2) flow -> (..., H, W, 3) colors in [0,1].
ArrayF flow_to_rgb(const ArrayF& flow, const FlowRgbParams& params);

/// (F-1) x H x W x 2 flow -> F x H x W x 3 video; the final frame repeats the
/// last available flow so the result has the video's frame count.
ArrayF flow_rgb_video(const ArrayF& flow, const FlowRgbParams& params);

}  // namespace worldflow::worldfeat
