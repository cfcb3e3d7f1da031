#include "gc/distance_transform.hpp"

#include <limits>

namespace gc {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

DistanceTransform distance_transform(const Mask& mask) {
    const int W = mask.width, H = mask.height;
    DistanceTransform out;
    out.width = W;
    out.height = H;
    out.dist2.assign(size_t(W) * H, kInf);
    out.site.assign(size_t(W) * H, -1);

    // Pass 1: per column, squared distance to the nearest foreground row
    // (two linear sweeps), remembering that row.
    std::vector<double> g(size_t(W) * H, kInf);   // column-wise squared distance
    std::vector<int> grow(size_t(W) * H, -1);     // nearest fg row per column cell
    for (int x = 0; x < W; ++x) {
        int last = -1;
        for (int y = 0; y < H; ++y) {
            if (mask.at(y, x)) last = y;
            if (last >= 0) {
                const double d = y - last;
                g[size_t(y) * W + x] = d * d;
                grow[size_t(y) * W + x] = last;
            }
        }
        last = -1;
        for (int y = H - 1; y >= 0; --y) {
            if (mask.at(y, x)) last = y;
            if (last >= 0) {
                const double d = last - y;
                const double d2 = d * d;
                if (d2 < g[size_t(y) * W + x]) {
                    g[size_t(y) * W + x] = d2;
                    grow[size_t(y) * W + x] = last;
                }
            }
        }
    }

    // Pass 2: per row, lower envelope of parabolas x -> (x - x')^2 + g(x').
    std::vector<int> v(static_cast<size_t>(W));
    std::vector<double> z(static_cast<size_t>(W) + 1);
    for (int y = 0; y < H; ++y) {
        const double* f = &g[size_t(y) * W];
        int kk = -1;
        for (int q = 0; q < W; ++q) {
            if (f[q] == kInf) continue;
            double s;
            while (true) {
                if (kk < 0) break;
                const int p = v[size_t(kk)];
                s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
                if (s > z[size_t(kk)]) break;
                --kk;
            }
            if (kk < 0) {
                kk = 0;
                v[0] = q;
                z[0] = -kInf;
                z[1] = kInf;
            } else {
                ++kk;
                v[size_t(kk)] = q;
                z[size_t(kk)] = s;
                z[size_t(kk) + 1] = kInf;
            }
        }
        if (kk < 0) continue;  // empty row contribution (mask column-empty everywhere)
        int j = 0;
        for (int q = 0; q < W; ++q) {
            while (z[size_t(j) + 1] < q) ++j;
            const int p = v[size_t(j)];
            const double dx = q - p;
            out.dist2[size_t(y) * W + q] = dx * dx + f[p];
            out.site[size_t(y) * W + q] = grow[size_t(y) * W + p] * W + p;
        }
    }
    return out;
}

}  // namespace gc
