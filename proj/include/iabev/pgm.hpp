#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace iabev::pgm {

/// 16-bit binary portable graymap (P5, maxval 65535, big-endian samples).
struct Image16 {
    int width = 0;
    int height = 0;
    std::vector<std::uint16_t> pixels;  // row-major

    std::uint16_t at(int u, int v) const { return pixels[static_cast<std::size_t>(v) * width + u]; }
};

/// 8-bit binary portable graymap (P5, maxval 255); used for indexed masks.
struct Image8 {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;
};

void write(const std::filesystem::path& path, const Image16& img);
void write(const std::filesystem::path& path, const Image8& img);
Image16 read16(const std::filesystem::path& path);

/// Depth map encoding: value = round(depth * 256), saturating; non-finite
/// (background) encodes as 0.
Image16 encode_depth(const std::vector<double>& depth, int width, int height);
std::vector<double> decode_depth(const Image16& img);  // 0 -> +inf

}  // namespace iabev::pgm
