// Copyright (C) 2026 The scalestory Authors
// SPDX-License-Identifier: Apache-2.0
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "scalestory/scalestory.hpp"

namespace {

using scalestory::RunConfig;

struct RunFlags {
    std::string config_file;
    RunConfig values;
    std::string early_steps;
    std::string sweep;
    bool no_ipr = false, no_asi = false, no_sga = false;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
    cmd->add_option("--config", f.config_file, "JSON config file; flags override its values");
    cmd->add_option("--story", f.values.story, "story spec (JSON)");
    cmd->add_option("--out", f.values.out, "output directory");
    cmd->add_option("--seed", f.values.seed, "global seed for sampling streams");
    cmd->add_option("--model-seed", f.values.model_seed, "seed of the frozen toy weights");
    cmd->add_option("--schedule", f.values.schedule, "toy | full | comma list such as 1x1,2x2,4x4");
    cmd->add_option("--lambda", f.values.lambda, "style-injection scaling coefficient in [0, 1]");
    cmd->add_option("--early-steps", f.early_steps, "comma list of 1-based guided steps, e.g. 2,3");
    cmd->add_option("--cfg-scale", f.values.cfg_scale, "classifier-free guidance scale");
    cmd->add_option("--batch-size", f.values.batch_size, "images per batch including the anchor");
    cmd->add_option("--temperature", f.values.temperature, "bit sampling temperature (0 = argmax)");
    cmd->add_option("--alpha-scope", f.values.alpha_scope, "per_layer | per_step");
    cmd->add_option("--pixel-scale", f.values.pixel_scale, "nearest-neighbour enlargement (0 = auto)");
    cmd->add_flag("--no-ipr", f.no_ipr, "disable identity prompt replacement");
    cmd->add_flag("--no-asi", f.no_asi, "disable adaptive style injection");
    cmd->add_flag("--no-sga", f.no_sga, "disable synchronized guidance adaptation");
}

template <typename T>
std::vector<T> parse_list(const std::string& text) {
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::stringstream is(item);
        T v{};
        if (!(is >> v) || !is.eof()) throw scalestory::ValidationError("bad list entry '" + item + "'");
        out.push_back(v);
    }
    return out;
}

// Values from --config, then every flag that was given on the command line.
RunConfig resolve(const CLI::App* cmd, const RunFlags& f) {
    RunConfig c = f.config_file.empty() ? RunConfig{} : scalestory::load_config_file(f.config_file);
    const RunConfig& v = f.values;
    auto given = [cmd](const char* name) {
        const auto* opt = cmd->get_option_no_throw(name);
        return opt != nullptr && opt->count() > 0;
    };
    if (given("--story")) c.story = v.story;
    if (given("--out")) c.out = v.out;
    if (given("--seed")) c.seed = v.seed;
    if (given("--model-seed")) c.model_seed = v.model_seed;
    if (given("--schedule")) c.schedule = v.schedule;
    if (given("--lambda")) c.lambda = v.lambda;
    if (given("--early-steps")) c.early_steps = parse_list<int>(f.early_steps);
    if (given("--cfg-scale")) c.cfg_scale = v.cfg_scale;
    if (given("--batch-size")) c.batch_size = v.batch_size;
    if (given("--temperature")) c.temperature = v.temperature;
    if (given("--alpha-scope")) c.alpha_scope = v.alpha_scope;
    if (given("--pixel-scale")) c.pixel_scale = v.pixel_scale;
    if (f.no_ipr) c.enable_ipr = false;
    if (f.no_asi) c.enable_asi = false;
    if (f.no_sga) c.enable_sga = false;
    if (given("--sweep")) c.sweep = f.sweep == "default" ? scalestory::default_sweep() : parse_list<double>(f.sweep);
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Consistent multi-prompt generation on a toy scale-wise generator"};
    app.require_subcommand(1);

    RunFlags gen_flags;
    auto* generate = app.add_subcommand("generate", "generate every prompt of a story");
    add_run_flags(generate, gen_flags);

    RunFlags sweep_flags;
    auto* sweep = app.add_subcommand("sweep", "one generate per lambda value");
    add_run_flags(sweep, sweep_flags);
    sweep->add_option("--sweep", sweep_flags.sweep, "comma list of lambda values, or 'default'");

    scalestory::EvaluateOptions eval_opts;
    std::string scores;
    auto* evaluate = app.add_subcommand("evaluate", "score a generated story");
    evaluate->add_option("--images", eval_opts.images_dir, "directory holding story_<i>.ppm");
    evaluate->add_option("--story", eval_opts.story, "story spec (JSON)");
    evaluate->add_option("--masks", eval_opts.masks_dir, "directory holding mask_<i>.pgm foreground masks");
    evaluate->add_option("--report", eval_opts.report, "report path");
    evaluate->add_option("--scores", scores, "clip_t,clip_i,dreamsim,dino: print the harmonic score only");
    evaluate->add_option("--compare", eval_opts.compare, "two run directories to compare")->expected(2);
    evaluate->add_option("--seed", eval_opts.seed, "embedder / noise seed");

    std::string golden_dir;
    auto* golden = app.add_subcommand("golden-check", "verify a run directory against its manifest");
    golden->add_option("dir", golden_dir, "run directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (generate->parsed()) return scalestory::cmd_generate(resolve(generate, gen_flags), std::cerr);
        if (sweep->parsed()) {
            RunConfig c = resolve(sweep, sweep_flags);
            if (sweep->count("--sweep") == 0 && c.sweep.empty()) c.sweep = scalestory::default_sweep();
            return scalestory::cmd_sweep(c, std::cout, std::cerr);
        }
        if (evaluate->parsed()) {
            if (!scores.empty()) eval_opts.scores = parse_list<double>(scores);
            return scalestory::cmd_evaluate(eval_opts, std::cout, std::cerr);
        }
        if (golden->parsed()) return scalestory::cmd_golden_check(golden_dir, std::cout, std::cerr);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
