// Copyright (C) 2026 The scalestory Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scalestory/errors.hpp"
#include "scalestory/image.hpp"
#include "scalestory/prompt.hpp"
#include "scalestory/random.hpp"
#include "scalestory/tensor.hpp"

namespace scalestory {

/// Table-style scores. dreamsim is a distance; the other three are
/// similarities.
struct ScoreSet {
    double clip_t = 0.0;
    double clip_i = 0.0;
    double dreamsim = 0.0;
    double dino = 0.0;
};

/// Harmonic mean of (clip_t, clip_i, 1 - dreamsim, dino).
inline double harmonic_score(const ScoreSet& s) {
    const double v[4] = {s.clip_t, s.clip_i, 1.0 - s.dreamsim, s.dino};
    double inv = 0.0;
    for (double x : v) {
        if (!(x > 0.0) || !std::isfinite(x)) {
            throw DegenerateError("harmonic score needs every converted score > 0");
        }
        inv += 1.0 / x;
    }
    return 4.0 / inv;
}

/// Mean cosine over unordered pairs i < j.
inline double pairwise_mean_similarity(std::span<const std::vector<double>> vectors) {
    if (vectors.size() < 2) throw ValidationError("pairwise similarity needs at least two vectors");
    for (const auto& v : vectors) {
        if (v.size() != vectors.front().size()) throw ValidationError("pairwise similarity: dimension mismatch");
    }
    double sum = 0.0;
    size_t pairs = 0;
    for (size_t i = 0; i < vectors.size(); ++i) {
        for (size_t j = i + 1; j < vectors.size(); ++j, ++pairs) {
            try {
                sum += cosine_similarity(vectors[i], vectors[j]);
            } catch (const std::domain_error&) {
                throw DegenerateError("pairwise similarity: zero-norm vector");
            }
        }
    }
    return sum / static_cast<double>(pairs);
}

inline constexpr const char* kTextScorePrefix = "A photo depicts ";
inline constexpr double kTextScoreScale = 2.5;

inline std::string text_score_prompt(const std::string& prompt) {
    return kTextScorePrefix + prompt;
}

/// 2.5 x cosine, unclamped. The text vector is expected to come from the
/// prefixed prompt (see text_score_prompt).
inline double text_image_score(std::span<const double> image_vec, std::span<const double> text_vec) {
    try {
        return kTextScoreScale * cosine_similarity(image_vec, text_vec);
    } catch (const std::domain_error&) {
        throw DegenerateError("text-image score: zero-norm embedding");
    }
}

/// Foreground mask, 1 = subject.
struct Mask {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> foreground;

    static Mask filled(int w, int h, bool fg) {
        return {w, h, std::vector<uint8_t>(static_cast<size_t>(w) * h, fg ? 1 : 0)};
    }
};

/// Pixel is foreground when its mean channel value is >= 128.
inline Mask mask_from_raster(const ImageRaster& img) {
    Mask m = Mask::filled(img.width, img.height, false);
    for (size_t i = 0; i < m.foreground.size(); ++i) {
        const int sum = img.pixels[i * 3] + img.pixels[i * 3 + 1] + img.pixels[i * 3 + 2];
        m.foreground[i] = sum >= 3 * 128 ? 1 : 0;
    }
    return m;
}

inline ImageRaster apply_background_noise(const ImageRaster& image, const Mask& mask, uint64_t seed) {
    if (mask.width != image.width || mask.height != image.height) {
        throw ValidationError("mask is " + std::to_string(mask.width) + "x" + std::to_string(mask.height) +
                              " but image is " + std::to_string(image.width) + "x" + std::to_string(image.height));
    }
    ImageRaster out = image;
    for (size_t i = 0; i < mask.foreground.size(); ++i) {
        if (mask.foreground[i]) continue;
        for (uint64_t c = 0; c < 3; ++c) {
            out.pixels[i * 3 + c] =
                static_cast<uint8_t>(hash_key({seed, key_of(StreamTag::background_noise), i, c}) >> 56);
        }
    }
    return out;
}

inline constexpr int kToyEmbeddingWidth = 36;

/// Per-channel 8-bin histograms (fractions of pixels) followed by the mean of
/// each channel over the four image quadrants (scaled to [0, 1]), then
/// L2-normalised. Nearest-neighbour enlargement by an even factor leaves it
/// unchanged.
inline std::vector<double> toy_embed_image(const ImageRaster& img) {
    if (img.width < 1 || img.height < 1) throw ValidationError("cannot embed an empty image");
    std::vector<double> v(kToyEmbeddingWidth, 0.0);
    double quad_count[4] = {0, 0, 0, 0};
    const double npix = static_cast<double>(img.width) * img.height;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const uint8_t* p = img.at(y, x);
            const int quad = (y * 2 / img.height) * 2 + (x * 2 / img.width);
            quad_count[quad] += 1;
            for (int c = 0; c < 3; ++c) {
                v[static_cast<size_t>(c * 8 + p[c] / 32)] += 1.0 / npix;
                v[static_cast<size_t>(24 + quad * 3 + c)] += p[c] / 255.0;
            }
        }
    }
    for (int q = 0; q < 4; ++q) {
        if (quad_count[q] == 0) continue;
        for (int c = 0; c < 3; ++c) v[static_cast<size_t>(24 + q * 3 + c)] /= quad_count[q];
    }
    const double n = l2_norm(v);
    if (n > 0.0) {
        for (double& x : v) x /= n;
    }
    return v;
}

/// Bag of hashed non-negative token vectors in the toy image-embedding space.
inline std::vector<double> toy_embed_text(const std::string& text, uint64_t seed, int width = kToyEmbeddingWidth) {
    std::vector<double> v(static_cast<size_t>(width), 0.0);
    for (const auto& tok : split_whitespace(text)) {
        const uint64_t th = hash_string(tok);
        for (int i = 0; i < width; ++i) {
            v[static_cast<size_t>(i)] +=
                uniform01(hash_key({seed, key_of(StreamTag::text_embedder), th, static_cast<uint64_t>(i)}));
        }
    }
    const double n = l2_norm(v);
    if (n > 0.0) {
        for (double& x : v) x /= n;
    }
    return v;
}

struct ImageEmbedder {
    std::string name;
    std::function<std::vector<double>(const ImageRaster&)> embed;
};

struct TextEmbedder {
    std::string name;
    std::function<std::vector<double>(const std::string&)> embed;
};

/// Perceptual distance between two images in [0, 1].
struct DistanceEmbedder {
    std::string name;
    std::function<double(const ImageRaster&, const ImageRaster&)> distance;
};

struct EmbedderSet {
    ImageEmbedder identity;      // CLIP-I slot
    ImageEmbedder style;         // DINO slot
    ImageEmbedder prompt_image;  // image side of CLIP-T
    TextEmbedder prompt_text;    // text side of CLIP-T
    std::optional<DistanceEmbedder> distance;  // DreamSim slot

    static EmbedderSet toy(uint64_t seed = 0) {
        ImageEmbedder img{"toy-histogram", [](const ImageRaster& r) { return toy_embed_image(r); }};
        return {img, img, img,
                TextEmbedder{"toy-bag-of-tokens", [seed](const std::string& t) { return toy_embed_text(t, seed); }},
                std::nullopt};
    }
};

struct EvaluationOptions {
    uint64_t noise_seed = 0;
};

struct EvaluationReport {
    ScoreSet scores;
    double harmonic = 0.0;
    bool dreamsim_proxy = false;
    double identity_axis = 0.0;
    double style_axis = 0.0;
    std::vector<double> per_image_text_scores;
    std::vector<std::string> warnings;
    std::string identity_embedder, style_embedder, text_embedder, distance_embedder;
    bool masked = false;
};

/// Assembles the four scores. Identity uses background-noised images when
/// masks are supplied; style always uses the raw images. Without a distance
/// embedder the DreamSim slot is 1 - identity axis (reported as a proxy).
inline EvaluationReport evaluate_run(const std::vector<ImageRaster>& images, const std::vector<std::string>& prompts,
                                     const std::vector<Mask>* masks, const EmbedderSet& embedders,
                                     const EvaluationOptions& options = {}) {
    if (images.size() < 2) throw ValidationError("evaluation needs at least two images");
    if (prompts.size() != images.size()) throw ValidationError("evaluation needs one prompt per image");
    if (masks != nullptr && masks->size() != images.size()) throw ValidationError("evaluation needs one mask per image");

    EvaluationReport rep;
    rep.masked = masks != nullptr;
    rep.identity_embedder = embedders.identity.name;
    rep.style_embedder = embedders.style.name;
    rep.text_embedder = embedders.prompt_image.name + "+" + embedders.prompt_text.name;

    std::vector<ImageRaster> identity_images;
    for (size_t i = 0; i < images.size(); ++i) {
        identity_images.push_back(masks ? apply_background_noise(images[i], (*masks)[i],
                                                                 hash_key({options.noise_seed, i}))
                                        : images[i]);
    }

    std::vector<std::vector<double>> id_vecs, style_vecs;
    for (size_t i = 0; i < images.size(); ++i) {
        id_vecs.push_back(embedders.identity.embed(identity_images[i]));
        style_vecs.push_back(embedders.style.embed(images[i]));
    }
    rep.identity_axis = pairwise_mean_similarity(id_vecs);
    rep.style_axis = pairwise_mean_similarity(style_vecs);

    double text_sum = 0.0;
    for (size_t i = 0; i < images.size(); ++i) {
        const double t = text_image_score(embedders.prompt_image.embed(images[i]),
                                          embedders.prompt_text.embed(text_score_prompt(prompts[i])));
        rep.per_image_text_scores.push_back(t);
        text_sum += t;
    }

    rep.scores.clip_t = text_sum / static_cast<double>(images.size());
    rep.scores.clip_i = rep.identity_axis;
    rep.scores.dino = rep.style_axis;
    if (embedders.distance) {
        rep.distance_embedder = embedders.distance->name;
        double sum = 0.0;
        size_t pairs = 0;
        for (size_t i = 0; i < images.size(); ++i) {
            for (size_t j = i + 1; j < images.size(); ++j, ++pairs) {
                sum += embedders.distance->distance(identity_images[i], identity_images[j]);
            }
        }
        rep.scores.dreamsim = sum / static_cast<double>(pairs);
    } else {
        rep.distance_embedder = "proxy:1-identity";
        rep.dreamsim_proxy = true;
        rep.scores.dreamsim = 1.0 - rep.identity_axis;
    }
    if (rep.scores.clip_t > 1.0) {
        rep.warnings.push_back("text score exceeds 1 and is reported unclamped");
    }

    rep.harmonic = harmonic_score(rep.scores);
    return rep;
}

inline nlohmann::json to_json(const ScoreSet& s) {
    return {{"clip_t", s.clip_t}, {"clip_i", s.clip_i}, {"dreamsim", s.dreamsim}, {"dino", s.dino}};
}

inline nlohmann::json to_json(const EvaluationReport& r) {
    nlohmann::json j;
    j["scores"] = to_json(r.scores);
    j["harmonic_score"] = r.harmonic;
    j["identity_axis"] = r.identity_axis;
    j["style_axis"] = r.style_axis;
    j["per_image_text_scores"] = r.per_image_text_scores;
    j["embedders"] = {{"identity", r.identity_embedder},
                      {"style", r.style_embedder},
                      {"text", r.text_embedder},
                      {"distance", r.distance_embedder}};
    j["dreamsim_proxy"] = r.dreamsim_proxy;
    j["masked"] = r.masked;
    j["warnings"] = r.warnings;
    return j;
}

/// Both reports plus a - b per field.
inline nlohmann::json compare_reports(const EvaluationReport& a, const EvaluationReport& b) {
    nlohmann::json diff = {{"clip_t", a.scores.clip_t - b.scores.clip_t},
                           {"clip_i", a.scores.clip_i - b.scores.clip_i},
                           {"dreamsim", a.scores.dreamsim - b.scores.dreamsim},
                           {"dino", a.scores.dino - b.scores.dino}};
    diff["harmonic_score"] = a.harmonic - b.harmonic;
    return {{"a", to_json(a)}, {"b", to_json(b)}, {"difference", diff}};
}

}  // namespace scalestory
