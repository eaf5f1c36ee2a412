#pragma once

#include <cstdint>
#include <filesystem>

#include "cfield/depth_map.hpp"
#include "cfield/grid.hpp"

namespace cfield {

// 8-bit RGB PNG. Channels are clamped to [0, 1] and rounded to k / 255.
void write_png(const std::filesystem::path& path, const Image& image);
// Accepts gray, gray+alpha, RGB and RGBA PNGs of any bit depth; alpha is dropped.
Image read_png(const std::filesystem::path& path);

void write_gray_png(const std::filesystem::path& path, const Grid<std::uint8_t>& gray);
Grid<std::uint8_t> read_gray_png(const std::filesystem::path& path);

// Grayscale PFM ("Pf", scale -1.0 => little-endian), rows stored bottom to top.
void write_pfm(const std::filesystem::path& path, const Grid<float>& values);
Grid<float> read_pfm(const std::filesystem::path& path);

// Depth maps round-trip through PFM with invalid pixels stored as +inf.
void write_depth_pfm(const std::filesystem::path& path, const DepthMap& depth);
DepthMap read_depth_pfm(const std::filesystem::path& path);

// Quantizes a [0, 1] channel value exactly as write_png does.
inline double quantize_8bit(double value) {
    const double c = value < 0.0 ? 0.0 : (value > 1.0 ? 1.0 : value);
    return static_cast<double>(static_cast<int>(c * 255.0 + 0.5)) / 255.0;
}

}  // namespace cfield
