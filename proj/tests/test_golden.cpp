// Copyright (C) 2026 The scalestory Authors
// SPDX-License-Identifier: Apache-2.0
//
// Constants below were produced by tests/oracle/reference.py.
#include <gtest/gtest.h>

#include "scalestory/image.hpp"
#include "scalestory/prompt.hpp"
#include "scalestory/random.hpp"
#include "scalestory/transformer.hpp"

using namespace scalestory;

namespace {

Grid golden_features(uint64_t seed, int h, int w, int c, double scale) {
    Grid g(h, w, c);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int k = 0; k < c; ++k) {
                g.at(y, x, k) = scale * uniform_signed(hash_key(
                                            {seed, static_cast<uint64_t>(y), static_cast<uint64_t>(x),
                                             static_cast<uint64_t>(k)}));
            }
        }
    }
    return g;
}

}  // namespace

TEST(Golden, TokenVector) {
    const auto v = token_vector("dog", 7, 32);
    EXPECT_NEAR(v[0], 0.1478127668268725, 1e-15);
    EXPECT_NEAR(v[31], -0.11031281276851664, 1e-15);
}

TEST(Golden, DecoderDigest) {
    const auto img = decode_image({golden_features(5, 8, 8, 32, 1.0), 4}, make_decoder(11, 32), 4);
    EXPECT_EQ(raster_digest(img), "7fa5688e9beb27be2f9d53094cb2eac515b8ba173ac3c76dbdb9df9c6e6e25f7");
    EXPECT_EQ(std::vector<uint8_t>(img.pixels.begin(), img.pixels.begin() + 6),
              (std::vector<uint8_t>{101, 59, 229, 122, 67, 95}));
}

TEST(Golden, ForwardLogits) {
    const auto params = init_model(1, ModelDims{});
    const Grid feats = golden_features(99, 8, 8, 32, 0.5);
    const Matrix prompt = encode_text("a dog springing toward a frisbee", 7).tokens;

    const Grid cond = forward_step(params, feats, prompt, {2, 2}, 2, Branch::conditional);
    double sum = 0, sumsq = 0;
    for (double v : cond.values()) {
        sum += v;
        sumsq += v * v;
    }
    EXPECT_NEAR(sum, -36.901025254657668, 1e-9);
    EXPECT_NEAR(sumsq, 174.73024587297158, 1e-9);
    EXPECT_NEAR(cond.values().front(), -0.69030200025122646, 1e-12);
    EXPECT_NEAR(cond.values().back(), 0.62759011183236779, 1e-12);

    const Grid uncond = forward_step(params, feats, Matrix(0, 32), {2, 2}, 2, Branch::unconditional);
    sum = 0;
    for (double v : uncond.values()) sum += v;
    EXPECT_NEAR(sum, -37.692330997069398, 1e-9);
    EXPECT_NEAR(uncond.values().front(), -0.90656001990910751, 1e-12);
}
