#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sketchedit/raster.hpp"

namespace sketchedit {

using Bytes = std::vector<std::uint8_t>;

/// Decodes PNG or JPEG bytes into an RGB image. Throws DataError.
Image decode_image(const Bytes& encoded);

/// Decodes a PNG/JPEG and thresholds its luminance at 0.5 into a binary sketch.
SketchMap decode_sketch(const Bytes& encoded);

/// 8-bit RGB PNG.
Bytes encode_png(const Image& img);

/// 8-bit grayscale PNG of a single-channel raster.
Bytes encode_png(const Raster<1>& gray);

Image load_image(const std::filesystem::path& path);
SketchMap load_sketch(const std::filesystem::path& path);

/// Writes a PNG via a temporary file and rename.
void save_image(const Image& img, const std::filesystem::path& path);
void save_gray(const Raster<1>& gray, const std::filesystem::path& path);

Bytes read_file(const std::filesystem::path& path);

/// Writes `data` to `path` through a sibling temporary file and an atomic rename.
void write_file_atomic(const std::filesystem::path& path, const void* data, std::size_t size);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

/// Sorted list of *.png / *.jpg / *.jpeg files in a directory.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

}  // namespace sketchedit
