// Copyright (C) 2026 The scalestory Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scalestory/errors.hpp"
#include "scalestory/random.hpp"
#include "scalestory/scalewise.hpp"
#include "scalestory/tensor.hpp"

namespace scalestory {

struct ModelDims {
    int d_model = 32;
    int n_heads = 2;
    int n_blocks = 2;
    int channels = kDefaultChannels;
    int text_width = kDefaultTextWidth;

    int d_head() const { return d_model / n_heads; }
    int ff_width() const { return 2 * d_model; }

    bool operator==(const ModelDims&) const = default;
};

struct AffineMap {
    Matrix weight;  // in x out
    std::vector<double> bias;

    Matrix apply(const Matrix& x) const { return matmul(x, weight, bias); }
    bool operator==(const AffineMap&) const = default;
};

struct AttentionWeights {
    AffineMap query, key, value, output;
    bool operator==(const AttentionWeights&) const = default;
};

struct BlockWeights {
    AttentionWeights self_attn;
    AttentionWeights cross_attn;  // key/value read text rows
    AffineMap ff_in, ff_out;
    bool operator==(const BlockWeights&) const = default;
};

/// Frozen toy generator. Every weight w[i] of tensor t is
/// sqrt(3 / fan_in) * u(seed, t, i) with u uniform in [-1, 1); biases are
/// the same recipe scaled by 0.1.
struct ModelParams {
    uint64_t seed = 0;
    ModelDims dims;
    AffineMap input;
    std::vector<BlockWeights> blocks;
    AffineMap head;

    bool operator==(const ModelParams&) const = default;
};

namespace detail {

class WeightFactory {
public:
    explicit WeightFactory(uint64_t seed) : seed_(seed) {}

    AffineMap affine(int in, int out) {
        const uint64_t id = next_++;
        AffineMap m{Matrix(in, out), std::vector<double>(static_cast<size_t>(out))};
        const double a = std::sqrt(3.0 / in);
        auto& w = m.weight.values();
        for (size_t i = 0; i < w.size(); ++i) w[i] = a * draw(id, i);
        for (size_t i = 0; i < m.bias.size(); ++i) m.bias[i] = 0.1 * draw(id, w.size() + i);
        return m;
    }

private:
    double draw(uint64_t tensor, uint64_t i) const {
        return uniform_signed(hash_key({seed_, key_of(StreamTag::model_weights), tensor, i}));
    }

    uint64_t seed_;
    uint64_t next_ = 0;
};

}  // namespace detail

inline ModelParams init_model(uint64_t seed, const ModelDims& dims) {
    if (dims.d_model <= 0 || dims.n_heads <= 0 || dims.n_blocks <= 0 || dims.channels <= 0 || dims.text_width <= 0) {
        throw ValidationError("model dimensions must be positive");
    }
    if (dims.d_model % dims.n_heads != 0) throw ValidationError("d_model must be divisible by n_heads");

    detail::WeightFactory f(seed);
    ModelParams p;
    p.seed = seed;
    p.dims = dims;
    p.input = f.affine(dims.channels, dims.d_model);
    for (int b = 0; b < dims.n_blocks; ++b) {
        BlockWeights bw;
        bw.self_attn = {f.affine(dims.d_model, dims.d_model), f.affine(dims.d_model, dims.d_model),
                        f.affine(dims.d_model, dims.d_model), f.affine(dims.d_model, dims.d_model)};
        bw.cross_attn = {f.affine(dims.d_model, dims.d_model), f.affine(dims.text_width, dims.d_model),
                         f.affine(dims.text_width, dims.d_model), f.affine(dims.d_model, dims.d_model)};
        bw.ff_in = f.affine(dims.d_model, dims.ff_width());
        bw.ff_out = f.affine(dims.ff_width(), dims.d_model);
        p.blocks.push_back(std::move(bw));
    }
    p.head = f.affine(dims.d_model, dims.channels);
    return p;
}

enum class Branch { conditional, unconditional };

inline const char* branch_name(Branch b) {
    return b == Branch::conditional ? "conditional" : "unconditional";
}

/// Self-attention projections of one sample at one (step, layer, branch).
/// Q, K, V are tokens x d_model; head h owns columns [h*d_head, (h+1)*d_head).
struct AttentionState {
    Branch branch = Branch::conditional;
    int step = 0;
    int layer = 0;
    int sample_index = 0;  // 0 = batch reference
    int n_heads = 1;
    Matrix q, k, v;
    std::optional<double> recorded_alpha;
};

/// Called once per (step, layer, branch) with every sample of the batch.
/// May rewrite k and v; must not change shapes. An empty hook is the identity.
using AttentionHook = std::function<void(std::span<AttentionState>)>;

/// Non-causal scaled dot-product attention per head, heads concatenated.
inline Matrix attend(const Matrix& q, const Matrix& k, const Matrix& v, int n_heads) {
    if (q.cols() != k.cols() || k.rows() != v.rows() || q.cols() % n_heads != 0 || v.cols() != q.cols()) {
        throw std::logic_error("attention shape mismatch");
    }
    const int dh = q.cols() / n_heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Matrix out(q.rows(), v.cols());
    std::vector<double> w(static_cast<size_t>(k.rows()));
    for (int h = 0; h < n_heads; ++h) {
        const int off = h * dh;
        for (int i = 0; i < q.rows(); ++i) {
            double mx = -INFINITY;
            for (int j = 0; j < k.rows(); ++j) {
                double s = 0.0;
                for (int c = 0; c < dh; ++c) s += q(i, off + c) * k(j, off + c);
                w[j] = s * scale;
                mx = std::max(mx, w[j]);
            }
            double z = 0.0;
            for (int j = 0; j < k.rows(); ++j) {
                w[j] = std::exp(w[j] - mx);
                z += w[j];
            }
            for (int j = 0; j < k.rows(); ++j) {
                const double p = w[j] / z;
                for (int c = 0; c < dh; ++c) out(i, off + c) += p * v(j, off + c);
            }
        }
    }
    return out;
}

inline Matrix self_attention(const AttentionState& state) {
    return attend(state.q, state.k, state.v, state.n_heads);
}

namespace detail {

inline Matrix rms_normalize(const Matrix& x) {
    Matrix out = x;
    for (int r = 0; r < x.rows(); ++r) {
        auto row = out.row(r);
        double ms = 0.0;
        for (double v : row) ms += v * v;
        const double inv = 1.0 / std::sqrt(ms / x.cols() + 1e-6);
        for (double& v : row) v *= inv;
    }
    return out;
}

inline void add_in_place(Matrix& x, const Matrix& y) {
    auto& a = x.values();
    const auto& b = y.values();
    for (size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

/// Fixed 2-D sinusoidal code: first half of the width encodes the row,
/// second half the column.
inline void add_positional_encoding(Matrix& tokens, GridSize grid) {
    const int width = tokens.cols();
    const int half = std::max(1, width / 2);
    for (int y = 0; y < grid.h; ++y) {
        for (int x = 0; x < grid.w; ++x) {
            auto row = tokens.row(y * grid.w + x);
            for (int j = 0; j < width; ++j) {
                const int k = j < half ? j : j - half;
                const double pos = j < half ? y : x;
                const double freq = std::pow(10000.0, -static_cast<double>(2 * (k / 2)) / half);
                row[j] += (k % 2 == 0) ? std::sin(pos * freq) : std::cos(pos * freq);
            }
        }
    }
}

inline Matrix grid_to_tokens(const Grid& g) {
    Matrix m(g.h() * g.w(), g.d());
    std::copy(g.values().begin(), g.values().end(), m.values().begin());
    return m;
}

}  // namespace detail

/// One step of the generator for a whole batch, samples in lockstep so the
/// hook can see every sample's K/V at each layer. `prompts[n]` holds the
/// sample's text rows; an empty matrix (null prompt) skips cross-attention.
/// Returns per-sample bit logits of shape grid.h x grid.w x channels.
inline std::vector<Grid> forward_batch(const ModelParams& params, std::span<const Grid> features,
                                       std::span<const Matrix> prompts, GridSize grid, int step, Branch branch,
                                       const AttentionHook& hook = {}) {
    const auto& dims = params.dims;
    const size_t batch = features.size();
    if (prompts.size() != batch) throw std::logic_error("forward_batch: prompt count mismatch");

    std::vector<Matrix> x(batch);
    for (size_t n = 0; n < batch; ++n) {
        if (features[n].d() != dims.channels) throw std::logic_error("forward_batch: feature channel mismatch");
        if (!prompts[n].empty() && prompts[n].cols() != dims.text_width) {
            throw std::logic_error("forward_batch: prompt width mismatch");
        }
        x[n] = params.input.apply(detail::grid_to_tokens(resize_bilinear(features[n], grid)));
        detail::add_positional_encoding(x[n], grid);
    }

    std::vector<AttentionState> states(batch);
    for (int layer = 0; layer < dims.n_blocks; ++layer) {
        const auto& blk = params.blocks[static_cast<size_t>(layer)];

        for (size_t n = 0; n < batch; ++n) {
            const Matrix h = detail::rms_normalize(x[n]);
            states[n] = AttentionState{branch,
                                       step,
                                       layer,
                                       static_cast<int>(n),
                                       dims.n_heads,
                                       blk.self_attn.query.apply(h),
                                       blk.self_attn.key.apply(h),
                                       blk.self_attn.value.apply(h),
                                       std::nullopt};
        }
        if (hook) {
            hook(states);
            for (const auto& s : states) {
                if (s.k.rows() != grid.h * grid.w || s.k.cols() != dims.d_model || s.v.rows() != s.k.rows() ||
                    s.v.cols() != dims.d_model) {
                    throw std::logic_error("attention hook changed K/V shape");
                }
            }
        }
        for (size_t n = 0; n < batch; ++n) {
            detail::add_in_place(x[n], blk.self_attn.output.apply(self_attention(states[n])));
        }

        for (size_t n = 0; n < batch; ++n) {
            if (prompts[n].empty()) continue;
            const Matrix h = detail::rms_normalize(x[n]);
            const Matrix attended = attend(blk.cross_attn.query.apply(h), blk.cross_attn.key.apply(prompts[n]),
                                           blk.cross_attn.value.apply(prompts[n]), dims.n_heads);
            detail::add_in_place(x[n], blk.cross_attn.output.apply(attended));
        }

        for (size_t n = 0; n < batch; ++n) {
            Matrix u = blk.ff_in.apply(detail::rms_normalize(x[n]));
            for (double& v : u.values()) v *= logistic(v);  // logistic-gated unit
            detail::add_in_place(x[n], blk.ff_out.apply(u));
        }
    }

    std::vector<Grid> logits;
    logits.reserve(batch);
    for (size_t n = 0; n < batch; ++n) {
        const Matrix out = params.head.apply(detail::rms_normalize(x[n]));
        Grid g(grid.h, grid.w, dims.channels);
        std::copy(out.values().begin(), out.values().end(), g.values().begin());
        logits.push_back(std::move(g));
    }
    return logits;
}

inline Grid forward_step(const ModelParams& params, const Grid& features, const Matrix& prompt, GridSize grid,
                         int step, Branch branch, const AttentionHook& hook = {}) {
    return std::move(forward_batch(params, std::span<const Grid>(&features, 1), std::span<const Matrix>(&prompt, 1),
                                   grid, step, branch, hook)
                         .front());
}

}  // namespace scalestory
