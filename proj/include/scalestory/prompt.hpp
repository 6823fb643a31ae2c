// Copyright (C) 2026 The scalestory Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "scalestory/errors.hpp"
#include "scalestory/random.hpp"
#include "scalestory/tensor.hpp"

namespace scalestory {

inline constexpr int kDefaultTextWidth = 32;

/// A story: one identity prompt shared by N expression prompts.
struct StorySpec {
    std::string identity_text;
    std::vector<std::string> expression_texts;
    std::optional<uint64_t> seed;

    int count() const { return static_cast<int>(expression_texts.size()); }

    /// Full prompt for 1-based index n.
    std::string prompt(int n) const {
        const auto& exp = expression_texts.at(static_cast<size_t>(n - 1));
        return exp.empty() ? identity_text : identity_text + " " + exp;
    }
};

inline std::vector<std::string> split_whitespace(std::string_view text) {
    std::vector<std::string> tokens;
    size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        if (j > i) tokens.emplace_back(text.substr(i, j - i));
        i = j;
    }
    return tokens;
}

inline void validate_story(const StorySpec& spec) {
    if (split_whitespace(spec.identity_text).empty()) {
        throw ValidationError("story identity must be non-empty");
    }
    if (spec.expression_texts.empty()) {
        throw ValidationError("story needs at least one expression");
    }
}

namespace detail {

inline int line_of_offset(std::string_view doc, size_t byte) {
    byte = std::min(byte, doc.size());
    return 1 + static_cast<int>(std::count(doc.begin(), doc.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

}  // namespace detail

/// Parses a story document:
///
///     { "identity": "a dog",
///       "expressions": ["springing toward a frisbee", "on a porch swing"],
///       "seed": 7 }
///
/// `seed` is optional. Unknown keys are reported through `warnings` and
/// otherwise ignored.
inline StorySpec parse_story_spec(std::string_view document, std::vector<std::string>* warnings = nullptr) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(document);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("story spec line " + std::to_string(detail::line_of_offset(document, e.byte)) + ": " +
                         e.what());
    }
    if (!doc.is_object()) throw ParseError("story spec line 1: top level must be an object");

    StorySpec spec;
    auto identity = doc.find("identity");
    if (identity == doc.end()) throw ParseError("story spec line 1: missing field 'identity'");
    if (!identity->is_string()) throw ParseError("story spec: 'identity' must be a string");
    spec.identity_text = identity->get<std::string>();

    auto expressions = doc.find("expressions");
    if (expressions == doc.end()) throw ParseError("story spec line 1: missing field 'expressions'");
    if (!expressions->is_array()) throw ParseError("story spec: 'expressions' must be an array");
    for (const auto& e : *expressions) {
        if (!e.is_string()) throw ParseError("story spec: every expression must be a string");
        spec.expression_texts.push_back(e.get<std::string>());
    }

    if (auto seed = doc.find("seed"); seed != doc.end()) {
        if (!seed->is_number_integer()) throw ParseError("story spec: 'seed' must be an integer");
        spec.seed = seed->get<uint64_t>();
    }

    std::vector<std::string> unknown;
    for (const auto& [key, _] : doc.items()) {
        if (key != "identity" && key != "expressions" && key != "seed") unknown.push_back(key);
    }
    if (!unknown.empty() && warnings != nullptr) {
        std::string msg = "story spec: ignoring unknown fields:";
        for (const auto& k : unknown) msg += " " + k;
        warnings->push_back(msg);
    }

    validate_story(spec);
    return spec;
}

inline nlohmann::json story_to_json(const StorySpec& spec) {
    nlohmann::json j;
    j["identity"] = spec.identity_text;
    j["expressions"] = spec.expression_texts;
    if (spec.seed) j["seed"] = *spec.seed;
    return j;
}

/// m x d_text token rows.
struct EmbeddingBlock {
    Matrix tokens;

    EmbeddingBlock() = default;
    explicit EmbeddingBlock(Matrix m) : tokens(std::move(m)) {}

    int token_count() const { return tokens.rows(); }
    int width() const { return tokens.cols(); }

    bool operator==(const EmbeddingBlock&) const = default;
};

struct EmbeddingEntry {
    EmbeddingBlock identity;
    EmbeddingBlock expression;

    /// Identity rows followed by expression rows.
    Matrix all_tokens() const {
        const int width = std::max(identity.width(), expression.width());
        Matrix out(identity.token_count() + expression.token_count(), width);
        int r = 0;
        for (const auto* block : {&identity, &expression}) {
            for (int i = 0; i < block->token_count(); ++i, ++r) {
                std::copy(block->tokens.row(i).begin(), block->tokens.row(i).end(), out.row(r).begin());
            }
        }
        return out;
    }

    bool operator==(const EmbeddingEntry&) const = default;
};

struct EmbeddingBatch {
    std::vector<EmbeddingEntry> entries;
    bool replaced = false;
};

/// Unit-norm vector for one token. Depends only on (token, seed, width).
inline std::vector<double> token_vector(std::string_view token, uint64_t seed, int width) {
    std::vector<double> v(static_cast<size_t>(width));
    const uint64_t th = hash_string(token);
    double sq = 0.0;
    for (int i = 0; i < width; ++i) {
        v[i] = uniform_signed(hash_key({seed, key_of(StreamTag::text_encoder), th, static_cast<uint64_t>(i)}));
        sq += v[i] * v[i];
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (auto& x : v) x *= inv;
    return v;
}

inline EmbeddingBlock encode_text(std::string_view text, uint64_t seed, int width = kDefaultTextWidth) {
    if (width <= 0) throw ValidationError("text embedding width must be positive");
    const auto tokens = split_whitespace(text);
    Matrix m(static_cast<int>(tokens.size()), width);
    for (size_t r = 0; r < tokens.size(); ++r) {
        const auto v = token_vector(tokens[r], seed, width);
        std::copy(v.begin(), v.end(), m.row(static_cast<int>(r)).begin());
    }
    return EmbeddingBlock(std::move(m));
}

/// Identity and expression blocks for 1-based prompt index n.
inline EmbeddingEntry encode_prompt(const StorySpec& spec, int n, uint64_t seed, int width = kDefaultTextWidth) {
    if (n < 1 || n > spec.count()) {
        throw std::out_of_range("prompt index " + std::to_string(n) + " outside 1.." + std::to_string(spec.count()));
    }
    return {encode_text(spec.identity_text, seed, width),
            encode_text(spec.expression_texts[static_cast<size_t>(n - 1)], seed, width)};
}

/// Frobenius norm; 0 for an empty block.
inline double block_norm(const EmbeddingBlock& block) {
    return l2_norm(block.tokens.values());
}

/// Substitutes every identity block with entry 0's and rescales each
/// expression block by |identity_0| / |identity_n|. Entry 0 passes through
/// untouched.
inline EmbeddingBatch apply_identity_replacement(const EmbeddingBatch& batch) {
    if (batch.replaced) throw StateError("identity replacement already applied to this batch");
    if (batch.entries.empty()) throw ValidationError("identity replacement needs a non-empty batch");

    const auto& reference = batch.entries.front().identity;
    const double ref_norm = block_norm(reference);
    if (!(ref_norm > 0.0)) throw DegenerateError("reference identity block has zero norm");
    for (const auto& e : batch.entries) {
        for (const auto* b : {&e.identity, &e.expression}) {
            if (b->token_count() > 0 && b->width() != reference.width()) {
                throw ValidationError("embedding widths differ within batch");
            }
        }
    }

    EmbeddingBatch out;
    out.replaced = true;
    out.entries.reserve(batch.entries.size());
    out.entries.push_back(batch.entries.front());
    for (size_t n = 1; n < batch.entries.size(); ++n) {
        const auto& e = batch.entries[n];
        const double norm = block_norm(e.identity);
        if (!(norm > 0.0)) {
            throw DegenerateError("identity block of sample " + std::to_string(n + 1) + " has zero norm");
        }
        const double factor = ref_norm / norm;
        EmbeddingEntry replaced{reference, e.expression};
        for (auto& x : replaced.expression.tokens.values()) x *= factor;
        out.entries.push_back(std::move(replaced));
    }
    return out;
}

}  // namespace scalestory
