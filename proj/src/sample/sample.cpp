// Copyright (C) 2026 The worldflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "worldflow/sample/sample.hpp"

#include "worldflow/numerics/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace worldflow::sample {

ArrayF draw_noise(const ModelParams<float>& params, std::uint64_t seed, std::uint64_t index) {
    const model::ModelConfig& c = params.config;
    Rng rng = substream(seed, "sampling", index);
    return standard_normal<float>({c.frames, c.height, c.width, params.layout.total()}, rng);
}

SampleResult sample(const ModelParams<float>& params, const std::vector<int>& prompt, const GuidanceConfig& g,
                    const codec::CodecConfig& codec, std::uint64_t index) {
    g.validate();
    if (codec.channels() != params.layout.vae) {
        throw std::invalid_argument("sample: codec has " + std::to_string(codec.channels()) + " channels but the model's C_vae is " +
                                    std::to_string(params.layout.vae));
    }
    SampleResult r;
    const VelocityField<float> field = [&](const ArrayF& z, float t) { return guided_velocity(params, z, t, prompt, g); };
    const ArrayF z0 = euler_integrate(field, draw_noise(params, g.seed, index), g.steps, &r.velocity_norms);
    r.latent = model::split(z0, params.layout);
    r.video = codec::decode(r.latent.vae, codec);
    r.video.values() = r.video.values().max(0.0f).min(1.0f);
    return r;
}

void write_ppm(const std::filesystem::path& path, const ArrayF& frame) {
    if (frame.rank() != 3 || frame.dim(2) != 3) throw ShapeError("write_ppm", frame.shape(), "expected H x W x 3");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    os << "P6\n" << frame.dim(1) << ' ' << frame.dim(0) << "\n255\n";
    std::vector<unsigned char> bytes(frame.size());
    for (std::size_t i = 0; i < frame.size(); ++i) {
        const float v = std::clamp(frame[i], 0.0f, 1.0f);
        bytes[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
    }
    os.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!os) throw std::runtime_error("failed writing " + path.string());
}

ArrayF read_ppm(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    std::string magic;
    std::size_t w = 0, h = 0, maxval = 0;
    is >> magic >> w >> h >> maxval;
    if (magic != "P6" || maxval != 255 || !w || !h) throw FormatError(path.string() + " is not an 8-bit binary PPM");
    is.get();
    std::vector<unsigned char> bytes(w * h * 3);
    if (!is.read(reinterpret_cast<char*>(bytes.data()), std::streamsize(bytes.size()))) throw FormatError("truncated PPM " + path.string());
    ArrayF out({h, w, 3});
    for (std::size_t i = 0; i < bytes.size(); ++i) out[i] = float(bytes[i]) / 255.0f;
    return out;
}

namespace {

std::string numbered(const char* stem, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_%03zu.ppm", stem, i);
    return buf;
}

}  // namespace

void save_sample(const std::filesystem::path& dir, const SampleResult& r, const codec::CodecConfig& codec, const ArrayF* temporal_codec) {
    std::filesystem::create_directories(dir);
    for (std::size_t f = 0; f < r.video.dim(0); ++f) {
        write_ppm(dir / numbered("frame", f), slice(r.video, 0, f, 1).reshaped({r.video.dim(1), r.video.dim(2), 3}));
    }
    save_array(dir / "latent.dwnd", model::join(r.latent));
    const ArrayF& temporal = temporal_codec ? *temporal_codec : r.latent.temporal;
    if (temporal.size() && temporal.dim(3) == codec.channels()) {
        ArrayF flow = codec::decode(temporal, codec);
        flow.values() = flow.values().max(0.0f).min(1.0f);
        for (std::size_t f = 0; f < flow.dim(0); ++f) {
            write_ppm(dir / numbered("flow", f), slice(flow, 0, f, 1).reshaped({flow.dim(1), flow.dim(2), 3}));
        }
    }
}

}  // namespace worldflow::sample
