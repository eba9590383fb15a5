#pragma once

#include "her2flex/tensor.hpp"

#include <string>

namespace her2flex {

// 8-bit RGB PNG round trip. Values are scaled to [0, 255] with rounding on
// write and back to [0, 1] on read.
ImageF read_png(const std::string& path);
void write_png(const std::string& path, const ImageF& img);

}  // namespace her2flex
