// Copyright (C) 2026 The scalestory Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "scalestory/errors.hpp"
#include "scalestory/guidance.hpp"
#include "scalestory/image.hpp"
#include "scalestory/prompt.hpp"
#include "scalestory/random.hpp"
#include "scalestory/scalewise.hpp"
#include "scalestory/transformer.hpp"

namespace scalestory {

struct GenerationConfig {
    ScaleSchedule schedule = toy_schedule();
    GuidanceConfig guidance;
    ModelDims dims;
    uint64_t global_seed = 1;  // bit-sampling streams
    uint64_t model_seed = 2024;  // frozen weights, text encoder, decoder
    int batch_size = 4;
    double temperature = 0.0;
    double gamma = 0.0;  // residual magnitude; 0 selects 1/sqrt(channels)
    int pixel_scale = 0;  // nearest-neighbour enlargement of written images; 0 = auto

    double residual_gamma() const { return gamma > 0.0 ? gamma : default_gamma(dims.channels); }
    int output_scale() const {
        if (pixel_scale > 0) return pixel_scale;
        const int w = schedule.final_size().w;
        return w >= 64 ? 1 : (64 + w - 1) / w;
    }
};

inline void validate_generation(const GenerationConfig& cfg) {
    validate_guidance(cfg.guidance, cfg.schedule.steps());
    if (cfg.batch_size < 1) throw ValidationError("batch size must be >= 1");
    if (cfg.batch_size < 2 && cfg.guidance.any_enabled()) {
        throw ValidationError("batch size must be >= 2 when guidance is enabled (reference + follower)");
    }
    if (!(cfg.temperature >= 0.0) || !std::isfinite(cfg.temperature)) {
        throw ValidationError("temperature must be >= 0");
    }
    if (cfg.gamma < 0.0) throw ValidationError("residual magnitude must be positive");
    if (cfg.pixel_scale < 0) throw ValidationError("pixel scale must be >= 0");
}

/// Prompt indices (1-based) per batch. Slot 0 of every batch is prompt 1.
struct BatchPlan {
    std::vector<std::vector<int>> batches;
};

inline BatchPlan plan_batches(int prompt_count, int batch_size, bool guidance_enabled = true) {
    if (prompt_count < 1) throw ValidationError("story needs at least one prompt");
    if (batch_size < 1 || (guidance_enabled && batch_size < 2)) {
        throw ValidationError("batch size must be >= 2 when guidance is enabled");
    }
    BatchPlan plan;
    if (batch_size == 1) {
        for (int i = 1; i <= prompt_count; ++i) plan.batches.push_back({i});
        return plan;
    }
    if (prompt_count == 1) {
        plan.batches.push_back({1});
        return plan;
    }
    for (int next = 2; next <= prompt_count;) {
        std::vector<int> batch{1};
        while (static_cast<int>(batch.size()) < batch_size && next <= prompt_count) batch.push_back(next++);
        plan.batches.push_back(std::move(batch));
    }
    return plan;
}

/// Per-run frozen state shared by every batch.
struct GenerationContext {
    ModelParams model;
    DecoderParams decoder;
};

inline GenerationContext make_context(const GenerationConfig& cfg) {
    return {init_model(cfg.model_seed, cfg.dims), make_decoder(cfg.model_seed, cfg.dims.channels)};
}

inline uint64_t stream_key(uint64_t global_seed, int prompt_index) {
    return hash_key({global_seed, key_of(StreamTag::bit_sampling), static_cast<uint64_t>(prompt_index)});
}

/// Intermediate tensors of one step, for inspection.
struct StepTrace {
    int step = 0;
    std::vector<Grid> inputs;  // F_{s-1}
    std::vector<Grid> conditional;
    std::vector<Grid> unconditional;
    std::vector<Grid> guided;
};

struct BatchResult {
    std::vector<int> prompt_indices;
    std::vector<ImageRaster> images;  // latent resolution
    std::vector<AlphaRecord> alpha_records;  // sample_index = slot
    std::vector<AlphaRecord> consumed_alphas;
    std::vector<StepTrace> trace;
    int conditional_passes = 0;
    int unconditional_passes = 0;
};

namespace detail {

inline std::vector<uint8_t> sample_bits(const Grid& logits, double temperature, uint64_t stream, int step) {
    std::vector<uint8_t> bits(logits.numel());
    const auto& v = logits.values();
    const int d = logits.d();
    for (size_t i = 0; i < v.size(); ++i) {
        if (temperature == 0.0) {
            bits[i] = v[i] >= 0.0 ? 1 : 0;
        } else {
            const uint64_t token = i / static_cast<size_t>(d);
            const uint64_t bit = i % static_cast<size_t>(d);
            const double u = uniform01(hash_key({stream, static_cast<uint64_t>(step), token, bit}));
            bits[i] = u < logistic(v[i] / temperature) ? 1 : 0;
        }
    }
    return bits;
}

}  // namespace detail

inline uint64_t encoder_seed(const StorySpec& story, const GenerationConfig& cfg) {
    return story.seed.value_or(cfg.model_seed);
}

/// Runs the full step loop for one batch. `prompt_indices[0]` is the
/// reference.
inline BatchResult generate_batch(const StorySpec& story, const std::vector<int>& prompt_indices,
                                  const GenerationContext& ctx, const GenerationConfig& cfg,
                                  bool keep_trace = false) {
    if (prompt_indices.empty()) throw std::invalid_argument("generate_batch: empty batch");
    const auto& dims = cfg.dims;
    const auto& schedule = cfg.schedule;
    const size_t batch = prompt_indices.size();

    EmbeddingBatch embeddings;
    for (int idx : prompt_indices) {
        embeddings.entries.push_back(encode_prompt(story, idx, encoder_seed(story, cfg), dims.text_width));
    }
    if (cfg.guidance.enable_ipr) embeddings = apply_identity_replacement(embeddings);

    std::vector<Matrix> prompts;
    std::vector<Matrix> null_prompts(batch, Matrix(0, dims.text_width));
    std::vector<FeatureMap> features;
    for (const auto& e : embeddings.entries) {
        prompts.push_back(e.all_tokens());
        features.push_back(initial_feature_map(e, cfg.model_seed, dims.channels, schedule.final_size()));
    }

    UnifiedAttentionGuidance guidance(cfg.guidance);
    const AttentionHook cond_hook = guidance.conditional_hook();
    const AttentionHook uncond_hook = guidance.unconditional_hook();

    BatchResult result;
    result.prompt_indices = prompt_indices;
    const double gamma = cfg.residual_gamma();
    for (int s = 1; s <= schedule.steps(); ++s) {
        const GridSize grid = schedule.size_at(s);
        std::vector<Grid> inputs;
        inputs.reserve(batch);
        for (const auto& f : features) inputs.push_back(f.data);

        auto cond = forward_batch(ctx.model, inputs, prompts, grid, s, Branch::conditional, cond_hook);
        auto uncond = forward_batch(ctx.model, inputs, null_prompts, grid, s, Branch::unconditional, uncond_hook);
        result.conditional_passes += static_cast<int>(batch);
        result.unconditional_passes += static_cast<int>(batch);

        std::vector<Grid> guided;
        for (size_t n = 0; n < batch; ++n) {
            guided.push_back(apply_cfg(cond[n], uncond[n], cfg.guidance.cfg_scale));
            const auto bits = detail::sample_bits(guided[n], cfg.temperature,
                                                  stream_key(cfg.global_seed, prompt_indices[n]), s);
            const auto residual = residual_from_bits(grid.h, grid.w, dims.channels, bits, gamma);
            features[n] = accumulate(features[n], residual, s);
        }
        if (keep_trace) {
            result.trace.push_back({s, std::move(inputs), std::move(cond), std::move(uncond), std::move(guided)});
        }
    }

    for (const auto& f : features) result.images.push_back(decode_image(f, ctx.decoder, schedule.steps()));
    result.alpha_records = guidance.records();
    result.consumed_alphas = guidance.consumed();
    return result;
}

struct GeneratedImage {
    int prompt_index = 0;
    int batch = 0;
    std::string stream_id;
    ImageRaster latent;  // one pixel per latent position
    ImageRaster output;  // enlarged raster that gets written
    std::string digest;  // sha256 of the P6 encoding of `output`
};

struct StoryAlphaRecord {
    int batch = 0;
    int slot = 0;
    int prompt_index = 0;
    AlphaRecord record;
};

struct AnchorCheck {
    int batch = 0;
    std::string digest;
};

struct StoryResult {
    std::vector<GeneratedImage> images;  // ordered by prompt index
    std::vector<StoryAlphaRecord> alpha_records;
    std::vector<AnchorCheck> anchor_checks;
    std::vector<double> batch_seconds;
};

inline std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Generates every prompt of the story. The anchor is regenerated in each
/// batch and must come out byte-identical; only its first copy is kept.
inline StoryResult generate_story(const StorySpec& story, const GenerationConfig& cfg) {
    validate_story(story);
    validate_generation(cfg);
    const GenerationContext ctx = make_context(cfg);
    const BatchPlan plan = plan_batches(story.count(), cfg.batch_size, cfg.guidance.any_enabled());
    const int scale = cfg.output_scale();

    StoryResult out;
    out.images.resize(static_cast<size_t>(story.count()));
    for (size_t b = 0; b < plan.batches.size(); ++b) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto& indices = plan.batches[b];
        BatchResult r = generate_batch(story, indices, ctx, cfg);
        out.batch_seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());

        for (size_t slot = 0; slot < indices.size(); ++slot) {
            const int idx = indices[slot];
            GeneratedImage img;
            img.prompt_index = idx;
            img.batch = static_cast<int>(b);
            img.stream_id = hex64(stream_key(cfg.global_seed, idx));
            img.output = enlarge_nearest(r.images[slot], scale);
            img.latent = std::move(r.images[slot]);
            img.digest = raster_digest(img.output);

            auto& existing = out.images[static_cast<size_t>(idx - 1)];
            if (existing.prompt_index == 0) {
                existing = std::move(img);
            } else {
                if (existing.digest != img.digest) {
                    throw IntegrityError("anchor image differs between batch " + std::to_string(existing.batch) +
                                         " and batch " + std::to_string(b));
                }
                out.anchor_checks.push_back({static_cast<int>(b), img.digest});
            }
        }
        for (const auto& rec : r.alpha_records) {
            out.alpha_records.push_back(
                {static_cast<int>(b), rec.sample_index, indices[static_cast<size_t>(rec.sample_index)], rec});
        }
    }
    return out;
}

}  // namespace scalestory
