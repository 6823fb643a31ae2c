// Copyright (C) 2026 The scalestory Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scalestory/config.hpp"
#include "scalestory/errors.hpp"
#include "scalestory/image.hpp"
#include "scalestory/metrics.hpp"
#include "scalestory/orchestrator.hpp"
#include "scalestory/prompt.hpp"

namespace scalestory {

namespace fs = std::filesystem;

inline constexpr const char* kManifestFormat = "scalestory-manifest/1";

inline std::string image_file_name(int prompt_index) {
    return "story_" + std::to_string(prompt_index) + ".ppm";
}

inline StorySpec load_story(const fs::path& path, std::ostream& err) {
    const auto bytes = read_file_bytes(path);
    std::vector<std::string> warnings;
    StorySpec spec = parse_story_spec(std::string(bytes.begin(), bytes.end()), &warnings);
    for (const auto& w : warnings) err << "warning: " << w << "\n";
    return spec;
}

inline nlohmann::json build_manifest(const RunConfig& cfg, const StorySpec& story, const StoryResult& result) {
    nlohmann::json images = nlohmann::json::array();
    for (const auto& img : result.images) {
        images.push_back({{"prompt_index", img.prompt_index},
                          {"batch", img.batch},
                          {"stream_id", img.stream_id},
                          {"path", image_file_name(img.prompt_index)},
                          {"width", img.output.width},
                          {"height", img.output.height},
                          {"sha256", img.digest}});
    }
    nlohmann::json alphas = nlohmann::json::array();
    for (const auto& a : result.alpha_records) {
        alphas.push_back({{"batch", a.batch},
                          {"slot", a.slot},
                          {"prompt_index", a.prompt_index},
                          {"step", a.record.step},
                          {"layer", a.record.layer},
                          {"alpha", a.record.alpha}});
    }
    nlohmann::json anchors = nlohmann::json::array();
    for (const auto& c : result.anchor_checks) anchors.push_back({{"batch", c.batch}, {"sha256", c.digest}});
    return {{"format", kManifestFormat},
            {"config", to_json(cfg)},
            {"story", story_to_json(story)},
            {"images", images},
            {"anchor_checks", anchors},
            {"alpha_records", alphas}};
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
    const std::string text = j.dump(2) + "\n";
    write_file_bytes(path, std::vector<uint8_t>(text.begin(), text.end()));
}

inline nlohmann::json read_json(const fs::path& path) {
    const auto bytes = read_file_bytes(path);
    try {
        return nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

/// Re-reads every image listed in the manifest and compares digests.
inline bool verify_run_directory(const fs::path& dir, std::ostream& log) {
    const auto manifest = read_json(dir / "manifest.json");
    bool ok = true;
    for (const auto& img : manifest.at("images")) {
        const auto name = img.at("path").get<std::string>();
        std::string actual;
        try {
            actual = sha256_hex(read_file_bytes(dir / name));
        } catch (const IoError& e) {
            log << "missing " << name << "\n";
            ok = false;
            continue;
        }
        if (actual != img.at("sha256").get<std::string>()) {
            log << "mismatch " << name << "\n";
            ok = false;
        }
    }
    return ok;
}

struct GenerateOutcome {
    StorySpec story;
    StoryResult result;
    nlohmann::json manifest;
};

/// Generates, writes images + manifest.json + timing.json, then verifies the
/// files against the manifest. Throws on any failure.
inline GenerateOutcome run_generate(const RunConfig& cfg, std::ostream& err) {
    if (cfg.story.empty()) throw ValidationError("--story is required");
    const GenerationConfig gen = to_generation_config(cfg);
    GenerateOutcome o{load_story(cfg.story, err), {}, {}};
    o.result = generate_story(o.story, gen);

    const fs::path dir(cfg.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    for (const auto& img : o.result.images) write_file_bytes(dir / image_file_name(img.prompt_index), encode_ppm(img.output));

    o.manifest = build_manifest(cfg, o.story, o.result);
    write_json(dir / "manifest.json", o.manifest);

    nlohmann::json timing = nlohmann::json::array();
    double total = 0.0;
    const BatchPlan plan = plan_batches(o.story.count(), gen.batch_size, gen.guidance.any_enabled());
    for (size_t b = 0; b < o.result.batch_seconds.size(); ++b) {
        const double secs = o.result.batch_seconds[b];
        total += secs;
        timing.push_back({{"batch", b},
                          {"seconds", secs},
                          {"per_image_seconds", secs / static_cast<double>(plan.batches[b].size())}});
    }
    write_json(dir / "timing.json", {{"batches", timing}, {"total_seconds", total}});

    if (!verify_run_directory(dir, err)) throw IntegrityError("written images do not match manifest digests");
    return o;
}

inline int report_failure(std::ostream& err, const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
}

inline int cmd_generate(const RunConfig& cfg, std::ostream& err) {
    try {
        run_generate(cfg, err);
        return 0;
    } catch (const std::exception& e) {
        return report_failure(err, e);
    }
}

inline std::string format_lambda(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

inline EvaluationReport evaluate_outcome(const GenerateOutcome& o, uint64_t seed) {
    std::vector<ImageRaster> images;
    std::vector<std::string> prompts;
    for (const auto& img : o.result.images) {
        images.push_back(img.latent);
        prompts.push_back(o.story.prompt(img.prompt_index));
    }
    return evaluate_run(images, prompts, nullptr, EmbedderSet::toy(seed));
}

/// One generate per lambda under <out>/sweep_<lambda>/, plus
/// <out>/sweep_summary.json and a table on `out`.
inline int cmd_sweep(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        if (cfg.sweep.empty()) throw ValidationError("sweep list is empty");
        for (double l : cfg.sweep) {
            if (!(l >= 0.0 && l <= 1.0)) throw ValidationError("sweep lambda " + format_lambda(l) + " outside [0, 1]");
        }
        nlohmann::json rows = nlohmann::json::array();
        char line[160];
        std::snprintf(line, sizeof line, "%-8s %8s %8s %8s %8s %8s\n", "lambda", "S_H", "style", "identity",
                      "text", "proxy_ds");
        out << line;
        for (double l : cfg.sweep) {
            RunConfig sub = cfg;
            sub.lambda = l;
            sub.sweep.clear();
            sub.out = (fs::path(cfg.out) / ("sweep_" + format_lambda(l))).string();
            const auto outcome = run_generate(sub, err);
            const auto rep = evaluate_outcome(outcome, cfg.model_seed);
            rows.push_back({{"lambda", l}, {"dir", sub.out}, {"report", to_json(rep)}});
            std::snprintf(line, sizeof line, "%-8s %8.4f %8.4f %8.4f %8.4f %8.4f\n", format_lambda(l).c_str(),
                          rep.harmonic, rep.style_axis, rep.identity_axis, rep.scores.clip_t, rep.scores.dreamsim);
            out << line;
        }
        write_json(fs::path(cfg.out) / "sweep_summary.json", {{"config", to_json(cfg)}, {"runs", rows}});
        return 0;
    } catch (const std::exception& e) {
        return report_failure(err, e);
    }
}

struct EvaluateOptions {
    std::string images_dir;
    std::string story;
    std::string masks_dir;
    std::string report;
    std::vector<double> scores;
    std::vector<std::string> compare;
    uint64_t seed = 2024;
};

/// Loads story_<i>.ppm for every prompt of the story, and mask_<i>.pgm (or
/// .ppm) from `masks_dir` when given.
inline EvaluationReport evaluate_directory(const fs::path& dir, const StorySpec& story, const std::string& masks_dir,
                                           uint64_t seed) {
    std::vector<ImageRaster> images;
    std::vector<std::string> prompts;
    std::vector<Mask> masks;
    for (int i = 1; i <= story.count(); ++i) {
        const fs::path p = dir / image_file_name(i);
        if (!fs::exists(p)) throw IoError("missing image " + p.string());
        images.push_back(read_pnm(p));
        prompts.push_back(story.prompt(i));
        if (!masks_dir.empty()) {
            fs::path m = fs::path(masks_dir) / ("mask_" + std::to_string(i) + ".pgm");
            if (!fs::exists(m)) m.replace_extension(".ppm");
            masks.push_back(mask_from_raster(read_pnm(m)));
        }
    }
    return evaluate_run(images, prompts, masks_dir.empty() ? nullptr : &masks, EmbedderSet::toy(seed),
                        EvaluationOptions{seed});
}

inline int cmd_evaluate(const EvaluateOptions& opt, std::ostream& out, std::ostream& err) {
    try {
        if (!opt.scores.empty()) {
            if (opt.scores.size() != 4) throw ValidationError("--scores needs clip_t,clip_i,dreamsim,dino");
            const ScoreSet s{opt.scores[0], opt.scores[1], opt.scores[2], opt.scores[3]};
            const double h = harmonic_score(s);
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.4f\n", h);
            out << buf;
            if (!opt.report.empty()) write_json(opt.report, {{"scores", to_json(s)}, {"harmonic_score", h}});
            return 0;
        }
        if (opt.story.empty()) throw ValidationError("--story is required");
        const StorySpec story = load_story(opt.story, err);
        if (story.count() < 2) throw ValidationError("evaluation needs at least two images");

        if (!opt.compare.empty()) {
            if (opt.compare.size() != 2) throw ValidationError("--compare needs two directories");
            const auto a = evaluate_directory(opt.compare[0], story, opt.masks_dir, opt.seed);
            const auto b = evaluate_directory(opt.compare[1], story, opt.masks_dir, opt.seed);
            const auto report = compare_reports(a, b);
            const fs::path path = opt.report.empty() ? fs::path(opt.compare[0]) / "compare_report.json" : fs::path(opt.report);
            write_json(path, report);
            out << report["difference"].dump() << "\n";
            return 0;
        }

        if (opt.images_dir.empty()) throw ValidationError("--images is required");
        const auto rep = evaluate_directory(opt.images_dir, story, opt.masks_dir, opt.seed);
        for (const auto& w : rep.warnings) err << "warning: " << w << "\n";
        const fs::path path = opt.report.empty() ? fs::path(opt.images_dir) / "report.json" : fs::path(opt.report);
        write_json(path, to_json(rep));
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f\n", rep.harmonic);
        out << buf;
        return 0;
    } catch (const std::exception& e) {
        return report_failure(err, e);
    }
}

inline int cmd_golden_check(const std::string& dir, std::ostream& out, std::ostream& err) {
    try {
        if (!verify_run_directory(dir, err)) {
            err << "error: golden check failed for " << dir << "\n";
            return 1;
        }
        out << "ok\n";
        return 0;
    } catch (const std::exception& e) {
        return report_failure(err, e);
    }
}

}  // namespace scalestory
