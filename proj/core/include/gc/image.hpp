#pragma once

#include <cstdint>
#include <vector>

namespace gc {

// RGB image, values in [0,1], row-major, 3 channels interleaved.
struct Image {
    int width = 0, height = 0;
    std::vector<double> pix;  // 3*W*H

    static Image zeros(int w, int h) { return {w, h, std::vector<double>(size_t(3) * w * h, 0.0)}; }
    double& at(int y, int x, int c) { return pix[(size_t(y) * width + x) * 3 + c]; }
    double at(int y, int x, int c) const { return pix[(size_t(y) * width + x) * 3 + c]; }
};

// Binary foreground mask (true = garment).
struct Mask {
    int width = 0, height = 0;
    std::vector<std::uint8_t> on;  // W*H

    static Mask zeros(int w, int h) { return {w, h, std::vector<std::uint8_t>(size_t(w) * h, 0)}; }
    bool at(int y, int x) const { return on[size_t(y) * width + x] != 0; }
    void set(int y, int x, bool v) { on[size_t(y) * width + x] = v ? 1 : 0; }
    long long foreground_count() const {
        long long n = 0;
        for (auto b : on) n += b != 0;
        return n;
    }
};

}  // namespace gc
