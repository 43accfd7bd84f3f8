#pragma once

#include <string>

#include "beamsplit/image.hpp"

namespace beamsplit {

/// Lossless float image I/O (PFM, little-endian, bottom-to-top rows).
/// 3-channel maps use "PF", 1-channel "Pf"; values are float32 on disk.
void write_pfm(const std::string& path, const Image& image);
Image read_pfm(const std::string& path);

/// 8-bit preview with display gamma 2.2 applied; 1- or 3-channel input.
void write_png_preview(const std::string& path, const Image& image);

}  // namespace beamsplit
