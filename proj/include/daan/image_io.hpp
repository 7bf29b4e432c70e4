// PNG encode/decode for dataset images and CAM overlays.

#pragma once

#include <string>

#include "daan/dataset.hpp"

namespace daan {

/// Reads an 8- or 16-bit gray/RGB(A) PNG into a [0,1] image (alpha dropped).
Image read_png(const std::string& path);

/// Writes a 1- or 3-channel image. `bit_depth` is 8 or 16; values are
/// clamped to [0,1] and rounded.
void write_png(const std::string& path, const Image& image, int bit_depth = 16);

}  // namespace daan
