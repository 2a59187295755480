// Copyright (C) 2026 The worldflow Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "worldflow/codec/codec.hpp"
#include "worldflow/rng.hpp"

using namespace worldflow;
using namespace worldflow::codec;

TEST_CASE("encode shape arithmetic") {
    const ArrayF video({8, 32, 32, 3});
    const auto z = encode(video, CodecConfig{4, 1});
    CHECK(z.data.shape() == Shape{8, 8, 8, 48});
    CHECK(encode(ArrayF({8, 32, 32, 3}), CodecConfig{4, 2}).data.shape() == Shape{4, 8, 8, 96});
}

TEST_CASE("constant video maps to a constant latent") {
    const auto z = encode(ArrayF({4, 16, 16, 3}, 0.5f), CodecConfig{4, 1});
    CHECK((z.data.values() == 0.5f).all());
    CHECK((decode(ArrayF({2, 4, 4, 48}), CodecConfig{4, 1}).values() == 0.0f).all());
}

TEST_CASE("round trips are bit-exact") {
    Rng rng(11);
    for (auto [p, q] : {std::pair<std::size_t, std::size_t>{4, 1}, {2, 2}, {1, 1}, {8, 4}}) {
        CAPTURE(p);
        CAPTURE(q);
        const CodecConfig cfg{p, q};
        const ArrayF v = uniform<float>({8, 16, 24, 3}, rng, 0.0f, 1.0f);
        CHECK(decode(encode(v, cfg).data, cfg) == v);
        const ArrayF z = standard_normal<float>({8 / q, 16 / p, 24 / p, cfg.channels()}, rng);
        CHECK(encode(decode(z, cfg), cfg).data == z);
    }
}

TEST_CASE("single latent channel lights exactly one pixel channel per patch") {
    const CodecConfig cfg{4, 2};
    const std::size_t Fl = 2, Hl = 3, Wl = 2, C = cfg.channels();
    for (std::size_t c = 0; c < C; c += 7) {
        ArrayF z({Fl, Hl, Wl, C});
        for (std::size_t cell = 0; cell < Fl * Hl * Wl; ++cell) z[cell * C + c] = 1.0f;
        const ArrayF v = decode(z, cfg);
        // Enumerate the index map: channel c -> (dt, dy, dx, rgb).
        const std::size_t rgb = c % 3, dx = (c / 3) % 4, dy = (c / 12) % 4, dt = c / 48;
        std::size_t lit = 0;
        for (std::size_t f = 0; f < Fl * 2; ++f)
            for (std::size_t y = 0; y < Hl * 4; ++y)
                for (std::size_t x = 0; x < Wl * 4; ++x)
                    for (std::size_t k = 0; k < 3; ++k) {
                        const bool expect = f % 2 == dt && y % 4 == dy && x % 4 == dx && k == rgb;
                        CHECK(v.at(f, y, x, k) == (expect ? 1.0f : 0.0f));
                        lit += v.at(f, y, x, k) != 0.0f;
                    }
        CHECK(lit == Fl * Hl * Wl);
    }
}

TEST_CASE("linearity") {
    Rng rng(5);
    const CodecConfig cfg{4, 1};
    const ArrayF x = uniform<float>({2, 8, 8, 3}, rng), y = uniform<float>({2, 8, 8, 3}, rng);
    const float a = 0.75f, b = -2.0f;
    const ArrayF mix({2, 8, 8, 3}, NdArray<float>::Storage(a * x.values() + b * y.values()));
    const ArrayF lhs = encode(mix, cfg).data;
    const ArrayF rhs({2, 2, 2, 48}, NdArray<float>::Storage(a * encode(x, cfg).data.values() + b * encode(y, cfg).data.values()));
    CHECK(lhs == rhs);
}

TEST_CASE("errors") {
    try {
        encode(ArrayF({8, 30, 32, 3}), CodecConfig{4, 1});
        FAIL("expected error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("height") != std::string::npos);
    }
    CHECK_THROWS_AS(encode(ArrayF({3, 32, 32, 3}), CodecConfig{4, 2}), std::invalid_argument);
    CHECK_THROWS_AS(decode(ArrayF({1, 2, 2, 47}), CodecConfig{4, 1}), std::invalid_argument);
}
