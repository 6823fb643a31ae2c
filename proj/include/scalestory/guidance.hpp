// Copyright (C) 2026 The scalestory Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "scalestory/errors.hpp"
#include "scalestory/tensor.hpp"
#include "scalestory/transformer.hpp"

namespace scalestory {

enum class AlphaScope { per_layer, per_step };

inline const char* alpha_scope_name(AlphaScope s) {
    return s == AlphaScope::per_layer ? "per_layer" : "per_step";
}

struct GuidanceConfig {
    double lambda = 0.85;
    std::set<int> early_steps{2, 3};
    double cfg_scale = 3.0;
    bool enable_ipr = true;
    bool enable_asi = true;
    bool enable_sga = true;
    AlphaScope alpha_scope = AlphaScope::per_layer;

    bool any_enabled() const { return enable_ipr || enable_asi || enable_sga; }
    bool operator==(const GuidanceConfig&) const = default;
};

inline void validate_guidance(const GuidanceConfig& cfg, int schedule_steps) {
    if (!(cfg.lambda >= 0.0 && cfg.lambda <= 1.0)) {
        throw ValidationError("lambda must lie in [0, 1], got " + std::to_string(cfg.lambda));
    }
    if (!(cfg.cfg_scale >= 0.0) || !std::isfinite(cfg.cfg_scale)) throw ValidationError("cfg scale must be >= 0");
    if (cfg.enable_sga && !cfg.enable_asi) {
        throw ValidationError("synchronized guidance consumes style-injection weights; enable style injection too");
    }
    for (int s : cfg.early_steps) {
        if (s < 1 || s > schedule_steps) {
            throw ValidationError("early step " + std::to_string(s) + " outside 1.." + std::to_string(schedule_steps));
        }
    }
}

struct AlphaRecord {
    int step = 0;
    int layer = 0;
    int sample_index = 0;
    double alpha = 0.0;

    bool operator==(const AlphaRecord&) const = default;
};

/// lambda * clamp(cos(V_ref, V_n), 0, 1) with both arrays flattened.
inline double compute_alpha(std::span<const double> v_ref, std::span<const double> v_n, double lambda) {
    if (v_ref.size() != v_n.size()) throw std::invalid_argument("compute_alpha: shape mismatch");
    double cos = 0.0;
    try {
        cos = cosine_similarity(v_ref, v_n);
    } catch (const std::domain_error&) {
        throw DegenerateError("compute_alpha: zero-norm value features");
    }
    return lambda * std::clamp(cos, 0.0, 1.0);
}

/// K <- K_ref; V <- V_ref + alpha_n (V_n - V_ref). std::lerp is exact at both
/// ends, so the reference and the alpha = 0 case come out bitwise.
inline void blend_states(std::span<AttentionState> states, std::span<const double> alphas) {
    if (states.empty()) throw std::invalid_argument("blend_states: no reference state");
    if (alphas.size() != states.size()) throw std::invalid_argument("blend_states: alpha count mismatch");
    const Matrix k_ref = states.front().k;
    const Matrix v_ref = states.front().v;
    for (size_t n = 0; n < states.size(); ++n) {
        auto& s = states[n];
        if (s.k.rows() != k_ref.rows() || s.k.cols() != k_ref.cols() || s.v.rows() != v_ref.rows() ||
            s.v.cols() != v_ref.cols()) {
            throw std::invalid_argument("style injection: state shapes differ across batch");
        }
        s.k = k_ref;
        auto& v = s.v.values();
        const auto& r = v_ref.values();
        const double a = alphas[n];
        for (size_t i = 0; i < v.size(); ++i) v[i] = std::lerp(r[i], v[i], a);
    }
}

/// Style injection on the conditional branch. states[0] is the reference and
/// always gets alpha = lambda. `alphas_override` skips the similarity
/// computation (per-step scope reuses the first layer's weights).
inline std::vector<AlphaRecord> inject_style_conditional(std::span<AttentionState> states, double lambda,
                                                         std::span<const double> alphas_override = {}) {
    if (states.empty()) throw std::invalid_argument("style injection: missing reference state");
    std::vector<double> alphas(states.size());
    if (!alphas_override.empty()) {
        if (alphas_override.size() != states.size()) throw std::invalid_argument("alpha override count mismatch");
        std::copy(alphas_override.begin(), alphas_override.end(), alphas.begin());
    } else {
        alphas[0] = lambda;
        for (size_t n = 1; n < states.size(); ++n) {
            alphas[n] = compute_alpha(states[0].v.values(), states[n].v.values(), lambda);
        }
    }
    blend_states(states, alphas);

    std::vector<AlphaRecord> records;
    records.reserve(states.size());
    for (size_t n = 0; n < states.size(); ++n) {
        states[n].recorded_alpha = alphas[n];
        records.push_back({states[n].step, states[n].layer, states[n].sample_index, alphas[n]});
    }
    return records;
}

/// Recorded weights keyed by (step, layer, sample).
class AlphaLedger {
public:
    void add(const AlphaRecord& r) {
        if (!index_.emplace(std::tuple{r.step, r.layer, r.sample_index}, r.alpha).second) {
            throw StateError("alpha already recorded for step " + std::to_string(r.step) + " layer " +
                             std::to_string(r.layer) + " sample " + std::to_string(r.sample_index));
        }
        records_.push_back(r);
    }

    const double* find(int step, int layer, int sample) const {
        auto it = index_.find({step, layer, sample});
        return it == index_.end() ? nullptr : &it->second;
    }

    const std::vector<AlphaRecord>& records() const { return records_; }

private:
    std::map<std::tuple<int, int, int>, double> index_;
    std::vector<AlphaRecord> records_;
};

/// Same transform on the unconditional branch, reusing the conditional
/// branch's weights. Returns the weights it used.
inline std::vector<double> inject_style_unconditional(std::span<AttentionState> states, const AlphaLedger& ledger) {
    if (states.empty()) throw std::invalid_argument("style injection: missing reference state");
    std::vector<double> alphas(states.size());
    for (size_t n = 0; n < states.size(); ++n) {
        const auto& s = states[n];
        const double* a = ledger.find(s.step, s.layer, s.sample_index);
        if (a == nullptr) {
            throw SynchronizationError("no conditional alpha for step " + std::to_string(s.step) + " layer " +
                                       std::to_string(s.layer) + " sample " + std::to_string(s.sample_index));
        }
        alphas[n] = *a;
    }
    blend_states(states, alphas);
    return alphas;
}

/// uncond + w (cond - uncond), exact at w = 0 and w = 1.
inline Grid apply_cfg(const Grid& cond, const Grid& uncond, double w) {
    if (!cond.same_shape(uncond)) throw std::invalid_argument("apply_cfg: shape mismatch");
    if (!(w >= 0.0)) throw std::invalid_argument("apply_cfg: guidance scale must be >= 0");
    Grid out = uncond;
    auto& o = out.values();
    const auto& c = cond.values();
    for (size_t i = 0; i < o.size(); ++i) o[i] = std::lerp(o[i], c[i], w);
    return out;
}

/// Stateful pair of hooks for one batch: the conditional hook records the
/// weights the unconditional hook later consumes.
class UnifiedAttentionGuidance {
public:
    explicit UnifiedAttentionGuidance(GuidanceConfig cfg) : cfg_(std::move(cfg)) {}

    bool active_at(int step) const { return cfg_.early_steps.count(step) != 0; }

    AttentionHook conditional_hook() {
        if (!cfg_.enable_asi) return {};
        return [this](std::span<AttentionState> states) {
            if (states.size() < 2 || !active_at(states.front().step)) return;
            std::vector<double> reuse;
            if (cfg_.alpha_scope == AlphaScope::per_step && states.front().layer > 0) {
                for (const auto& s : states) {
                    const double* a = ledger_.find(s.step, 0, s.sample_index);
                    if (a == nullptr) throw SynchronizationError("per-step alpha missing for first layer");
                    reuse.push_back(*a);
                }
            }
            for (const auto& r : inject_style_conditional(states, cfg_.lambda, reuse)) ledger_.add(r);
        };
    }

    AttentionHook unconditional_hook() {
        if (!cfg_.enable_asi || !cfg_.enable_sga) return {};
        return [this](std::span<AttentionState> states) {
            if (states.size() < 2 || !active_at(states.front().step)) return;
            const auto used = inject_style_unconditional(states, ledger_);
            for (size_t n = 0; n < states.size(); ++n) {
                consumed_.push_back({states[n].step, states[n].layer, states[n].sample_index, used[n]});
            }
        };
    }

    const GuidanceConfig& config() const { return cfg_; }
    const std::vector<AlphaRecord>& records() const { return ledger_.records(); }
    /// Weights actually applied on the unconditional branch.
    const std::vector<AlphaRecord>& consumed() const { return consumed_; }

private:
    GuidanceConfig cfg_;
    AlphaLedger ledger_;
    std::vector<AlphaRecord> consumed_;
};

}  // namespace scalestory
