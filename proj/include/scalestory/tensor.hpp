// Copyright (C) 2026 The scalestory Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace scalestory {

struct GridSize {
    int h = 0;
    int w = 0;

    bool operator==(const GridSize&) const = default;
};

/// Dense h x w x d array stored row-major with channels innermost.
class Grid {
public:
    Grid() = default;
    Grid(int h, int w, int d, double fill = 0.0) : h_(h), w_(w), d_(d) {
        if (h < 0 || w < 0 || d < 0) {
            throw std::invalid_argument("grid dimensions must be non-negative");
        }
        data_.assign(static_cast<size_t>(h) * w * d, fill);
    }

    int h() const { return h_; }
    int w() const { return w_; }
    int d() const { return d_; }
    GridSize size() const { return {h_, w_}; }
    size_t numel() const { return data_.size(); }

    double& at(int y, int x, int c) { return data_[index(y, x, c)]; }
    double at(int y, int x, int c) const { return data_[index(y, x, c)]; }

    std::span<double> pixel(int y, int x) {
        return {data_.data() + index(y, x, 0), static_cast<size_t>(d_)};
    }
    std::span<const double> pixel(int y, int x) const {
        return {data_.data() + index(y, x, 0), static_cast<size_t>(d_)};
    }

    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    bool same_shape(const Grid& o) const { return h_ == o.h_ && w_ == o.w_ && d_ == o.d_; }

    bool operator==(const Grid&) const = default;

private:
    size_t index(int y, int x, int c) const {
        return (static_cast<size_t>(y) * w_ + x) * d_ + c;
    }

    int h_ = 0;
    int w_ = 0;
    int d_ = 0;
    std::vector<double> data_;
};

/// Row-major matrix, used for token sequences and weights.
class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols, double fill = 0.0) : rows_(rows), cols_(cols) {
        if (rows < 0 || cols < 0) {
            throw std::invalid_argument("matrix dimensions must be non-negative");
        }
        data_.assign(static_cast<size_t>(rows) * cols, fill);
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool empty() const { return rows_ == 0; }

    double& operator()(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
    double operator()(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }

    std::span<double> row(int r) { return {data_.data() + static_cast<size_t>(r) * cols_, static_cast<size_t>(cols_)}; }
    std::span<const double> row(int r) const {
        return {data_.data() + static_cast<size_t>(r) * cols_, static_cast<size_t>(cols_)};
    }

    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

/// out = a * b (+ bias broadcast over rows when non-empty).
inline Matrix matmul(const Matrix& a, const Matrix& b, std::span<const double> bias = {}) {
    if (a.cols() != b.rows()) {
        throw std::logic_error("matmul shape mismatch: " + std::to_string(a.cols()) + " vs " +
                               std::to_string(b.rows()));
    }
    if (!bias.empty() && static_cast<int>(bias.size()) != b.cols()) {
        throw std::logic_error("matmul bias width mismatch");
    }
    Matrix out(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i) {
        auto dst = out.row(i);
        if (!bias.empty()) {
            for (int j = 0; j < b.cols(); ++j) dst[j] = bias[j];
        }
        for (int k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            auto brow = b.row(k);
            for (int j = 0; j < b.cols(); ++j) dst[j] += aik * brow[j];
        }
    }
    return out;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double l2_norm(std::span<const double> a) {
    return std::sqrt(dot(a, a));
}

/// Cosine of two equal-length vectors; throws on a zero-norm input.
inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    const double na = dot(a, a);
    const double nb = dot(b, b);
    if (!(na > 0.0) || !(nb > 0.0)) {
        throw std::domain_error("cosine similarity of a zero-norm vector");
    }
    return dot(a, b) / std::sqrt(na * nb);
}

inline double logistic(double x) {
    return 1.0 / (1.0 + std::exp(-x));
}

}  // namespace scalestory
