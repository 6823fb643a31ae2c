// Copyright (C) 2026 The scalestory Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "scalestory/errors.hpp"
#include "scalestory/prompt.hpp"
#include "scalestory/random.hpp"
#include "scalestory/tensor.hpp"

namespace scalestory {

inline constexpr int kDefaultChannels = 32;

/// Ordered grid sizes for steps 1..S. Early steps are 1-based.
struct ScaleSchedule {
    std::vector<GridSize> sizes;
    std::set<int> early_steps;

    int steps() const { return static_cast<int>(sizes.size()); }
    GridSize final_size() const { return sizes.back(); }
    GridSize size_at(int step) const { return sizes.at(static_cast<size_t>(step - 1)); }
    bool is_early(int step) const { return early_steps.count(step) != 0; }

    bool operator==(const ScaleSchedule&) const = default;
};

inline ScaleSchedule make_schedule(std::vector<GridSize> sizes, std::set<int> early_steps) {
    if (sizes.empty()) throw ValidationError("schedule needs at least one size");
    for (size_t i = 0; i < sizes.size(); ++i) {
        if (sizes[i].h < 1 || sizes[i].w < 1) throw ValidationError("schedule sizes must be positive");
        if (i > 0 && (sizes[i].h < sizes[i - 1].h || sizes[i].w < sizes[i - 1].w)) {
            throw ValidationError("schedule sizes must be non-decreasing (step " + std::to_string(i + 1) + ")");
        }
    }
    for (int s : early_steps) {
        if (s < 1 || s > static_cast<int>(sizes.size())) {
            throw ValidationError("early step " + std::to_string(s) + " outside 1.." + std::to_string(sizes.size()));
        }
    }
    return {std::move(sizes), std::move(early_steps)};
}

inline ScaleSchedule toy_schedule() {
    return make_schedule({{1, 1}, {2, 2}, {4, 4}, {8, 8}}, {2, 3});
}

inline ScaleSchedule full_schedule() {
    return make_schedule({{1, 1}, {2, 2}, {4, 4}, {6, 6}, {8, 8}, {12, 12}, {16, 16}, {20, 20}, {24, 24}, {32, 32},
                          {48, 48}, {64, 64}},
                         {2, 3});
}

/// Parses "1x1,2x2,4x4" (or a bare "8" for 8x8).
inline std::vector<GridSize> parse_sizes(const std::string& text) {
    std::vector<GridSize> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            const auto x = item.find('x');
            size_t used = 0;
            if (x == std::string::npos) {
                const int v = std::stoi(item, &used);
                if (used != item.size()) throw std::invalid_argument(item);
                out.push_back({v, v});
            } else {
                const std::string hs = item.substr(0, x), ws = item.substr(x + 1);
                size_t uh = 0, uw = 0;
                const int h = std::stoi(hs, &uh);
                const int w = std::stoi(ws, &uw);
                if (uh != hs.size() || uw != ws.size()) throw std::invalid_argument(item);
                out.push_back({h, w});
            }
        } catch (const std::exception&) {
            throw ValidationError("bad schedule entry '" + item + "'");
        }
    }
    return out;
}

inline std::string format_sizes(const std::vector<GridSize>& sizes) {
    std::string out;
    for (size_t i = 0; i < sizes.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(sizes[i].h) + "x" + std::to_string(sizes[i].w);
    }
    return out;
}

/// Bilinear resize with half-pixel centers and edge clamping. Equal sizes
/// copy exactly. Also used to shrink F_{s-1} to the next step's grid.
inline Grid resize_bilinear(const Grid& src, GridSize target) {
    if (target.h < 1 || target.w < 1) throw std::invalid_argument("resize target must be positive");
    if (src.h() < 1 || src.w() < 1) throw std::invalid_argument("resize source is empty");
    if (src.size() == target) return src;

    Grid out(target.h, target.w, src.d());
    const double sy_scale = static_cast<double>(src.h()) / target.h;
    const double sx_scale = static_cast<double>(src.w()) / target.w;
    for (int y = 0; y < target.h; ++y) {
        const double sy = std::clamp((y + 0.5) * sy_scale - 0.5, 0.0, static_cast<double>(src.h() - 1));
        const int y0 = static_cast<int>(std::floor(sy));
        const int y1 = std::min(y0 + 1, src.h() - 1);
        const double fy = sy - y0;
        for (int x = 0; x < target.w; ++x) {
            const double sx = std::clamp((x + 0.5) * sx_scale - 0.5, 0.0, static_cast<double>(src.w() - 1));
            const int x0 = static_cast<int>(std::floor(sx));
            const int x1 = std::min(x0 + 1, src.w() - 1);
            const double fx = sx - x0;
            auto dst = out.pixel(y, x);
            auto p00 = src.pixel(y0, x0), p01 = src.pixel(y0, x1);
            auto p10 = src.pixel(y1, x0), p11 = src.pixel(y1, x1);
            for (int c = 0; c < src.d(); ++c) {
                const double top = (1.0 - fx) * p00[c] + fx * p01[c];
                const double bottom = (1.0 - fx) * p10[c] + fx * p11[c];
                dst[c] = (1.0 - fy) * top + fy * bottom;
            }
        }
    }
    return out;
}

inline Grid upsample_bilinear(const Grid& src, GridSize target) {
    if (target.h < src.h() || target.w < src.w()) {
        throw std::invalid_argument("upsample_bilinear cannot downscale " + std::to_string(src.h()) + "x" +
                                    std::to_string(src.w()) + " to " + std::to_string(target.h) + "x" +
                                    std::to_string(target.w));
    }
    return resize_bilinear(src, target);
}

/// Binary residual at one step: values = gamma * (2 * bits - 1).
struct ResidualMap {
    int h = 0;
    int w = 0;
    int d = 0;
    std::vector<uint8_t> bits;
    Grid values;
};

inline double default_gamma(int channels) {
    return 1.0 / std::sqrt(static_cast<double>(channels));
}

inline ResidualMap residual_from_bits(int h, int w, int d, std::vector<uint8_t> bits, double gamma) {
    if (!(gamma > 0.0)) throw ValidationError("residual magnitude must be positive");
    if (bits.size() != static_cast<size_t>(h) * w * d) throw std::invalid_argument("bit count mismatch");
    ResidualMap r{h, w, d, std::move(bits), Grid(h, w, d)};
    auto& v = r.values.values();
    for (size_t i = 0; i < v.size(); ++i) v[i] = r.bits[i] ? gamma : -gamma;
    return r;
}

/// bit = 1 iff raw >= 0.
inline ResidualMap quantize_bits(const Grid& raw, double gamma) {
    std::vector<uint8_t> bits(raw.numel());
    const auto& v = raw.values();
    for (size_t i = 0; i < v.size(); ++i) bits[i] = v[i] >= 0.0 ? 1 : 0;
    return residual_from_bits(raw.h(), raw.w(), raw.d(), std::move(bits), gamma);
}

struct FeatureMap {
    Grid data;
    int step = 0;
};

/// F_s = F_{s-1} + up(R_s).
inline FeatureMap accumulate(const FeatureMap& prev, const ResidualMap& residual, int step) {
    if (prev.step != step - 1) {
        throw StateError("accumulate: feature map is at step " + std::to_string(prev.step) + ", expected " +
                         std::to_string(step - 1));
    }
    if (residual.d != prev.data.d()) throw std::invalid_argument("accumulate: channel mismatch");
    const Grid up = upsample_bilinear(residual.values, prev.data.size());
    FeatureMap next{prev.data, step};
    auto& dst = next.data.values();
    const auto& add = up.values();
    for (size_t i = 0; i < dst.size(); ++i) dst[i] += add[i];
    return next;
}

/// F_0: a seeded d_text -> channels projection of the mean token embedding,
/// broadcast over the whole grid. Zero when the entry has no tokens.
inline FeatureMap initial_feature_map(const EmbeddingEntry& entry, uint64_t seed, int channels, GridSize size) {
    const Matrix tokens = entry.all_tokens();
    Grid grid(size.h, size.w, channels);
    if (tokens.rows() == 0) return {std::move(grid), 0};

    std::vector<double> mean(static_cast<size_t>(tokens.cols()), 0.0);
    for (int r = 0; r < tokens.rows(); ++r) {
        for (int c = 0; c < tokens.cols(); ++c) mean[c] += tokens(r, c);
    }
    for (auto& m : mean) m /= tokens.rows();

    const double a = std::sqrt(3.0 / tokens.cols());
    std::vector<double> f0(static_cast<size_t>(channels), 0.0);
    for (int o = 0; o < channels; ++o) {
        for (int i = 0; i < tokens.cols(); ++i) {
            const double wgt =
                a * uniform_signed(hash_key({seed, key_of(StreamTag::initial_projection), static_cast<uint64_t>(o),
                                             static_cast<uint64_t>(i)}));
            f0[o] += wgt * mean[i];
        }
    }
    for (int y = 0; y < size.h; ++y) {
        for (int x = 0; x < size.w; ++x) std::copy(f0.begin(), f0.end(), grid.pixel(y, x).begin());
    }
    return {std::move(grid), 0};
}

}  // namespace scalestory
