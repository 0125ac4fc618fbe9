#pragma once

#include "comir/image.hpp"

#include <filesystem>

namespace comir {

/// Reads an 8/16-bit integer or 32-bit float TIFF, or an 8/16-bit PNG.
/// Integer data is scaled to [0, 1]; float data is returned as stored.
/// Channel order is kept as stored in the file.
Image read_image(const std::filesystem::path& path);

enum class SampleFormat { uint8, uint16, float32 };

/// Writes a TIFF. Integer formats clamp values to [0, 1] before scaling.
void write_tiff(const std::filesystem::path& path, const Image& img, SampleFormat format = SampleFormat::float32);

/// Writes a PNG with 1, 2, 3 or 4 channels. Values are clamped to [0, 1].
void write_png(const std::filesystem::path& path, const Image& img, int bit_depth = 8);

/// Dispatches on the extension (.png, .tif, .tiff).
void write_image(const std::filesystem::path& path, const Image& img);

}  // namespace comir
