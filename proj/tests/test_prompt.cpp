// Copyright (C) 2026 The scalestory Authors
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "scalestory/prompt.hpp"

using namespace scalestory;

TEST(ParseStorySpec, DogStory) {
    const auto spec = parse_story_spec(
        R"({"identity": "a dog", "expressions": ["springing toward a frisbee", "on a porch swing with pillows"]})");
    EXPECT_EQ(spec.count(), 2);
    EXPECT_EQ(spec.identity_text, "a dog");
    EXPECT_EQ(spec.expression_texts[0], "springing toward a frisbee");
    EXPECT_EQ(spec.expression_texts[1], "on a porch swing with pillows");
    EXPECT_EQ(spec.prompt(1), "a dog springing toward a frisbee");
    EXPECT_FALSE(spec.seed.has_value());
}

TEST(ParseStorySpec, EmptyExpressionIsIdentityOnly) {
    const auto spec = parse_story_spec(R"({"identity": "x", "expressions": [""]})");
    ASSERT_EQ(spec.count(), 1);
    const auto entry = encode_prompt(spec, 1, 3);
    EXPECT_EQ(entry.expression.token_count(), 0);
    EXPECT_EQ(entry.identity.token_count(), 1);
    EXPECT_EQ(spec.prompt(1), "x");
}

TEST(ParseStorySpec, Errors) {
    EXPECT_THROW(parse_story_spec(R"({"expressions": ["a"]})"), ParseError);
    EXPECT_THROW(parse_story_spec(R"({"identity": "a dog"})"), ParseError);
    EXPECT_THROW(parse_story_spec(R"({"identity": "a dog", "expressions": []})"), ValidationError);
    EXPECT_THROW(parse_story_spec(R"({"identity": "   ", "expressions": ["x"]})"), ValidationError);
    EXPECT_THROW(parse_story_spec(R"({"identity": "a", "expressions": [3]})"), ParseError);
    EXPECT_THROW(parse_story_spec(R"(["a"])"), ParseError);
}

TEST(ParseStorySpec, SyntaxErrorNamesLine) {
    try {
        parse_story_spec("{\n  \"identity\": \"a dog\",\n  \"expressions\": [\"x\" \"y\"]\n}");
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
}

TEST(ParseStorySpec, UnknownFieldsWarnAndSeedIsRead) {
    std::vector<std::string> warnings;
    const auto spec = parse_story_spec(R"({"identity": "a", "expressions": ["b"], "seed": 9, "mood": 1, "x": 2})",
                                       &warnings);
    ASSERT_EQ(warnings.size(), 1u);
    EXPECT_NE(warnings[0].find("mood"), std::string::npos);
    EXPECT_NE(warnings[0].find("x"), std::string::npos);
    EXPECT_EQ(spec.seed, 9u);
}

TEST(EncodePrompt, RepeatedTokenGivesIdenticalRows) {
    const auto block = encode_text("dog chases dog", 7);
    ASSERT_EQ(block.token_count(), 3);
    EXPECT_EQ(block.tokens.row(0)[5], block.tokens.row(2)[5]);
    EXPECT_TRUE(std::equal(block.tokens.row(0).begin(), block.tokens.row(0).end(), block.tokens.row(2).begin()));
    EXPECT_NEAR(l2_norm(block.tokens.row(1)), 1.0, 1e-15);
}

TEST(EncodePrompt, IdentityBlockSharedAcrossPrompts) {
    StorySpec spec{"a dog", {"runs", "sleeps"}, {}};
    EXPECT_EQ(encode_prompt(spec, 1, 4).identity, encode_prompt(spec, 2, 4).identity);
    EXPECT_NE(encode_prompt(spec, 1, 4).expression, encode_prompt(spec, 2, 4).expression);
    EXPECT_THROW(encode_prompt(spec, 3, 4), std::out_of_range);
}

TEST(EncodePrompt, SeedChangesVectors) {
    EXPECT_NE(encode_text("a dog", 7), encode_text("a dog", 8));
    EXPECT_EQ(encode_text("a dog", 7), encode_text("a dog", 7));
}

TEST(EncodePrompt, EmptyTextIsZeroRows) {
    const auto b = encode_text("  \t ", 1);
    EXPECT_EQ(b.token_count(), 0);
    EXPECT_EQ(block_norm(b), 0.0);
}

TEST(BlockNorm, Examples) {
    Matrix m(1, 2);
    m(0, 0) = 3;
    m(0, 1) = 4;
    EXPECT_EQ(block_norm(EmbeddingBlock(m)), 5.0);
    EXPECT_EQ(block_norm(EmbeddingBlock()), 0.0);
    EXPECT_EQ(block_norm(EmbeddingBlock(Matrix(2, 2, 1.0))), 2.0);
}

namespace {

EmbeddingBlock row_block(std::initializer_list<double> values) {
    Matrix m(1, static_cast<int>(values.size()));
    std::copy(values.begin(), values.end(), m.values().begin());
    return EmbeddingBlock(m);
}

}  // namespace

TEST(IdentityReplacement, HandEvaluatedExample) {
    EmbeddingBatch batch;
    batch.entries.push_back({row_block({3, 4}), row_block({7, 1})});
    batch.entries.push_back({row_block({0, 2}), row_block({1, 0})});
    const auto out = apply_identity_replacement(batch);
    EXPECT_TRUE(out.replaced);
    EXPECT_EQ(out.entries[0], batch.entries[0]);
    EXPECT_EQ(out.entries[1].identity, row_block({3, 4}));
    EXPECT_DOUBLE_EQ(out.entries[1].expression.tokens(0, 0), 2.5);
    EXPECT_DOUBLE_EQ(out.entries[1].expression.tokens(0, 1), 0.0);
}

TEST(IdentityReplacement, SharedIdentityOnlySetsFlag) {
    StorySpec spec{"a red fox", {"in snow", "at dusk", "by a river"}, {}};
    EmbeddingBatch batch;
    for (int n = 1; n <= 3; ++n) batch.entries.push_back(encode_prompt(spec, n, 5));
    const auto out = apply_identity_replacement(batch);
    EXPECT_TRUE(out.replaced);
    for (size_t n = 0; n < 3; ++n) EXPECT_EQ(out.entries[n], batch.entries[n]);
}

TEST(IdentityReplacement, Errors) {
    EmbeddingBatch batch;
    batch.entries.push_back({row_block({1, 0}), row_block({1, 1})});
    batch.entries.push_back({row_block({0, 0}), row_block({1, 1})});
    EXPECT_THROW(apply_identity_replacement(batch), DegenerateError);

    batch.entries[1].identity = row_block({1, 1});
    const auto once = apply_identity_replacement(batch);
    EXPECT_THROW(apply_identity_replacement(once), StateError);

    EmbeddingBatch zero_ref;
    zero_ref.entries.push_back({row_block({0, 0}), row_block({1, 1})});
    EXPECT_THROW(apply_identity_replacement(zero_ref), DegenerateError);
    EXPECT_THROW(apply_identity_replacement(EmbeddingBatch{}), ValidationError);
}

TEST(IdentityReplacement, DifferentTokenCountsReplaceWholesale) {
    EmbeddingBatch batch;
    batch.entries.push_back({encode_text("a dog", 1, 4), encode_text("runs", 1, 4)});
    batch.entries.push_back({encode_text("a very large dog", 1, 4), encode_text("sleeps", 1, 4)});
    const auto out = apply_identity_replacement(batch);
    EXPECT_EQ(out.entries[1].identity.token_count(), 2);
    EXPECT_EQ(out.entries[1].all_tokens().rows(), 3);
}

TEST(IdentityReplacement, RandomBatchesKeepRatiosAndUniformity) {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 200; ++trial) {
        const auto batch = oracle::random_batch(rng);
        const auto out = apply_identity_replacement(batch);
        EXPECT_EQ(out.entries[0], batch.entries[0]);
        for (size_t n = 0; n < out.entries.size(); ++n) {
            EXPECT_EQ(out.entries[n].identity, out.entries[0].identity);
            const double before_exp = block_norm(batch.entries[n].expression);
            if (before_exp == 0.0) continue;
            const double before = block_norm(batch.entries[n].identity) / before_exp;
            const double after = block_norm(out.entries[n].identity) / block_norm(out.entries[n].expression);
            EXPECT_NEAR(after / before, 1.0, 1e-9);
        }
        // Re-applying the arithmetic to a replaced batch changes nothing.
        EmbeddingBatch again = out;
        again.replaced = false;
        const auto twice = apply_identity_replacement(again);
        for (size_t n = 0; n < out.entries.size(); ++n) EXPECT_EQ(twice.entries[n], out.entries[n]);
    }
}
