#pragma once

#include <string>

#include "gc/image.hpp"

namespace gc {

// NetPBM binary formats, maxval 255 only. P5 masks binarize at >= 128.
Mask load_p5(const std::string& path);
void save_p5(const std::string& path, const Mask& mask);

Image load_p6(const std::string& path);
// Values are clamped to [0,1] and rounded to bytes; deterministic.
void save_p6(const std::string& path, const Image& img);

}  // namespace gc
