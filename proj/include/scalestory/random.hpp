// Copyright (C) 2026 The scalestory Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace scalestory {

// Counter-based generator: every draw is a pure function of its key tuple, so
// draws never depend on evaluation order.
constexpr uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr uint64_t hash_key(std::initializer_list<uint64_t> parts) {
    uint64_t h = 0x6a09e667f3bcc908ULL;
    for (uint64_t p : parts) {
        h = splitmix64(h ^ splitmix64(p));
    }
    return h;
}

// FNV-1a; stable across platforms, unlike std::hash.
constexpr uint64_t hash_string(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// [0, 1) with 53 bits of precision.
inline double uniform01(uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

inline double uniform_signed(uint64_t bits) {
    return 2.0 * uniform01(bits) - 1.0;
}

// Stream tags keep the different consumers of one seed apart.
enum class StreamTag : uint64_t {
    text_encoder = 1,
    model_weights = 2,
    decoder = 3,
    initial_projection = 4,
    bit_sampling = 5,
    background_noise = 6,
    text_embedder = 7,
};

inline uint64_t key_of(StreamTag tag) {
    return static_cast<uint64_t>(tag);
}

}  // namespace scalestory
