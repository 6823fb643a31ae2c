// Copyright (C) 2026 The scalestory Authors
// SPDX-License-Identifier: Apache-2.0
//
// Straight-line reference implementations used only by tests. They follow the
// written formulas directly and share no code with the library kernels.
#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "scalestory/scalestory.hpp"

namespace oracle {

using scalestory::Grid;
using scalestory::Matrix;

/// Coordinate-by-coordinate bilinear sample, half-pixel centres, clamped.
inline Grid bilinear(const Grid& src, int th, int tw) {
    Grid out(th, tw, src.d());
    for (int y = 0; y < th; ++y) {
        for (int x = 0; x < tw; ++x) {
            double sy = (y + 0.5) * src.h() / th - 0.5;
            double sx = (x + 0.5) * src.w() / tw - 0.5;
            sy = std::min(std::max(sy, 0.0), src.h() - 1.0);
            sx = std::min(std::max(sx, 0.0), src.w() - 1.0);
            const int y0 = static_cast<int>(sy), x0 = static_cast<int>(sx);
            const int y1 = std::min(y0 + 1, src.h() - 1), x1 = std::min(x0 + 1, src.w() - 1);
            const double wy = sy - y0, wx = sx - x0;
            for (int c = 0; c < src.d(); ++c) {
                out.at(y, x, c) = src.at(y0, x0, c) * (1 - wy) * (1 - wx) + src.at(y0, x1, c) * (1 - wy) * wx +
                                  src.at(y1, x0, c) * wy * (1 - wx) + src.at(y1, x1, c) * wy * wx;
            }
        }
    }
    return out;
}

/// Dense softmax attention, one head at a time, probabilities materialised.
inline Matrix attention(const Matrix& q, const Matrix& k, const Matrix& v, int heads) {
    const int dh = q.cols() / heads;
    Matrix out(q.rows(), v.cols());
    for (int h = 0; h < heads; ++h) {
        for (int i = 0; i < q.rows(); ++i) {
            std::vector<double> logits(k.rows());
            for (int j = 0; j < k.rows(); ++j) {
                double s = 0;
                for (int c = 0; c < dh; ++c) s += q(i, h * dh + c) * k(j, h * dh + c);
                logits[j] = s / std::sqrt(static_cast<double>(dh));
            }
            double z = 0;
            for (double l : logits) z += std::exp(l);
            for (int j = 0; j < k.rows(); ++j) {
                const double p = std::exp(logits[j]) / z;
                for (int c = 0; c < dh; ++c) out(i, h * dh + c) += p * v(j, h * dh + c);
            }
        }
    }
    return out;
}

/// K_bar = K_ref, V_bar = a V_n + (1 - a) V_ref, with a = lambda * max(0, cos).
struct InjectionResult {
    Matrix k, v;
    double alpha;
};

inline double flat_cosine(const Matrix& a, const Matrix& b) {
    double ab = 0, aa = 0, bb = 0;
    for (size_t i = 0; i < a.values().size(); ++i) {
        ab += a.values()[i] * b.values()[i];
        aa += a.values()[i] * a.values()[i];
        bb += b.values()[i] * b.values()[i];
    }
    return ab / (std::sqrt(aa) * std::sqrt(bb));
}

inline InjectionResult inject(const Matrix& k_ref, const Matrix& v_ref, const Matrix& v_n, double alpha) {
    InjectionResult r{k_ref, v_n, alpha};
    for (size_t i = 0; i < r.v.values().size(); ++i) {
        r.v.values()[i] = alpha * v_n.values()[i] + (1 - alpha) * v_ref.values()[i];
    }
    return r;
}

inline Matrix random_matrix(std::mt19937_64& rng, int rows, int cols, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    Matrix m(rows, cols);
    for (auto& v : m.values()) v = u(rng);
    return m;
}

inline Grid random_grid(std::mt19937_64& rng, int h, int w, int d, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    Grid g(h, w, d);
    for (auto& v : g.values()) v = u(rng);
    return g;
}

inline scalestory::EmbeddingBatch random_batch(std::mt19937_64& rng, int width = 8) {
    std::uniform_int_distribution<int> count(1, 6), tokens(1, 5), exp_tokens(0, 5);
    scalestory::EmbeddingBatch b;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
        b.entries.push_back({scalestory::EmbeddingBlock(random_matrix(rng, tokens(rng), width)),
                             scalestory::EmbeddingBlock(random_matrix(rng, exp_tokens(rng), width))});
    }
    return b;
}

inline std::vector<scalestory::AttentionState> random_states(std::mt19937_64& rng, int samples, int tokens,
                                                             int width, int heads) {
    std::vector<scalestory::AttentionState> states;
    for (int n = 0; n < samples; ++n) {
        scalestory::AttentionState s;
        s.step = 2;
        s.layer = 0;
        s.sample_index = n;
        s.n_heads = heads;
        s.q = random_matrix(rng, tokens, width);
        s.k = random_matrix(rng, tokens, width);
        s.v = random_matrix(rng, tokens, width);
        states.push_back(std::move(s));
    }
    return states;
}

inline bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i) {
        if (std::bit_cast<uint64_t>(a[i]) != std::bit_cast<uint64_t>(b[i])) return false;
    }
    return true;
}

}  // namespace oracle
