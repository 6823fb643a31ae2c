// Copyright (C) 2026 The scalestory Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "scalestory/errors.hpp"
#include "scalestory/random.hpp"
#include "scalestory/scalewise.hpp"
#include "scalestory/tensor.hpp"

namespace scalestory {

/// 8-bit RGB raster, row-major.
struct ImageRaster {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> pixels;

    ImageRaster() = default;
    ImageRaster(int w, int h) : width(w), height(h), pixels(static_cast<size_t>(w) * h * 3, 0) {}

    uint8_t* at(int y, int x) { return pixels.data() + (static_cast<size_t>(y) * width + x) * 3; }
    const uint8_t* at(int y, int x) const { return pixels.data() + (static_cast<size_t>(y) * width + x) * 3; }

    bool operator==(const ImageRaster&) const = default;
};

/// Per-run colour map standing in for the image decoder.
struct DecoderParams {
    Matrix weight;  // 3 x channels
    std::array<double, 3> bias{};
};

inline DecoderParams make_decoder(uint64_t seed, int channels) {
    DecoderParams p{Matrix(3, channels), {}};
    const double a = 2.0 * std::sqrt(3.0 / channels);
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < channels; ++c) {
            p.weight(r, c) = a * uniform_signed(hash_key(
                                     {seed, key_of(StreamTag::decoder), static_cast<uint64_t>(r), static_cast<uint64_t>(c)}));
        }
        p.bias[r] = 0.25 * uniform_signed(hash_key({seed, key_of(StreamTag::decoder), 3, static_cast<uint64_t>(r)}));
    }
    return p;
}

/// round(255 * logistic(v)), halves rounded up.
inline uint8_t to_channel_byte(double v) {
    return static_cast<uint8_t>(std::floor(255.0 * logistic(v) + 0.5));
}

/// Maps every latent position to one pixel.
inline ImageRaster decode_image(const FeatureMap& final_map, const DecoderParams& decoder, int expected_step) {
    if (final_map.step != expected_step) {
        throw StateError("decode_image: feature map at step " + std::to_string(final_map.step) + ", expected " +
                         std::to_string(expected_step));
    }
    const Grid& f = final_map.data;
    if (decoder.weight.cols() != f.d()) throw std::invalid_argument("decoder channel mismatch");
    ImageRaster img(f.w(), f.h());
    for (int y = 0; y < f.h(); ++y) {
        for (int x = 0; x < f.w(); ++x) {
            const auto px = f.pixel(y, x);
            for (int r = 0; r < 3; ++r) {
                img.at(y, x)[r] = to_channel_byte(dot(decoder.weight.row(r), px) + decoder.bias[r]);
            }
        }
    }
    return img;
}

inline ImageRaster enlarge_nearest(const ImageRaster& src, int factor) {
    if (factor < 1) throw std::invalid_argument("enlargement factor must be >= 1");
    if (factor == 1) return src;
    ImageRaster out(src.width * factor, src.height * factor);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            const uint8_t* s = src.at(y / factor, x / factor);
            std::copy(s, s + 3, out.at(y, x));
        }
    }
    return out;
}

/// P6 bytes: "P6\n<w> <h>\n255\n" followed by raw RGB.
inline std::vector<uint8_t> encode_ppm(const ImageRaster& img) {
    const std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    std::vector<uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.pixels.begin(), img.pixels.end());
    return out;
}

namespace detail {

inline int read_header_int(const std::vector<uint8_t>& buf, size_t& pos) {
    while (pos < buf.size()) {
        if (buf[pos] == '#') {
            while (pos < buf.size() && buf[pos] != '\n') ++pos;
        } else if (std::isspace(buf[pos])) {
            ++pos;
        } else {
            break;
        }
    }
    int v = 0;
    bool any = false;
    while (pos < buf.size() && buf[pos] >= '0' && buf[pos] <= '9') {
        v = v * 10 + (buf[pos] - '0');
        ++pos;
        any = true;
        if (v > (1 << 24)) throw ParseError("pnm header value too large");
    }
    if (!any) throw ParseError("malformed pnm header");
    return v;
}

}  // namespace detail

/// Reads P6 (RGB) or P5 (grey, expanded to RGB) with maxval 255.
inline ImageRaster decode_pnm(const std::vector<uint8_t>& buf) {
    if (buf.size() < 2 || buf[0] != 'P' || (buf[1] != '6' && buf[1] != '5')) {
        throw ParseError("not a binary PPM/PGM file");
    }
    const bool rgb = buf[1] == '6';
    size_t pos = 2;
    const int w = detail::read_header_int(buf, pos);
    const int h = detail::read_header_int(buf, pos);
    const int maxval = detail::read_header_int(buf, pos);
    if (maxval != 255) throw ParseError("only maxval 255 is supported");
    if (pos >= buf.size() || !std::isspace(buf[pos])) throw ParseError("malformed pnm header");
    ++pos;
    const size_t channels = rgb ? 3 : 1;
    const size_t need = static_cast<size_t>(w) * h * channels;
    if (buf.size() - pos < need) throw ParseError("truncated pnm data");
    ImageRaster img(w, h);
    for (size_t i = 0; i < static_cast<size_t>(w) * h; ++i) {
        for (size_t c = 0; c < 3; ++c) img.pixels[i * 3 + c] = buf[pos + i * channels + (rgb ? c : 0)];
    }
    return img;
}

inline std::vector<uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, const std::vector<uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

inline ImageRaster read_pnm(const std::filesystem::path& path) {
    return decode_pnm(read_file_bytes(path));
}

inline std::string sha256_hex(const void* data, size_t size) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(data, size, md.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256 failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xf];
    }
    return out;
}

inline std::string sha256_hex(const std::vector<uint8_t>& bytes) {
    return sha256_hex(bytes.data(), bytes.size());
}

inline std::string sha256_hex(const std::string& s) {
    return sha256_hex(s.data(), s.size());
}

/// Digest of the P6 encoding, i.e. of the file as written.
inline std::string raster_digest(const ImageRaster& img) {
    return sha256_hex(encode_ppm(img));
}

}  // namespace scalestory
