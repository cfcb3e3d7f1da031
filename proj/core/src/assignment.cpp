#include "gc/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <immintrin.h>
#include <limits>

#include "gc/error.hpp"
#include "gc/tensor.hpp"

namespace gc {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

inline double pdist(const double* a, const double* b) {
    const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

double mean_matched(const PointCloud3& a, const PointCloud3& b, const std::vector<int>& perm) {
    double sum = 0;
    for (int i = 0; i < a.count(); ++i) sum += pdist(a.p(i), b.p(perm[size_t(i)]));
    return sum / double(a.count());
}

// Median over a strided subsample of cross distances; the auction's scale.
double distance_scale(const PointCloud3& a, const PointCloud3& b) {
    const int n = a.count();
    const int ns = std::min(n, 192);
    const int stride = std::max(1, n / ns);
    std::vector<double> d;
    d.reserve(size_t(ns) * ns);
    for (int i = 0; i < n; i += stride)
        for (int j = 0; j < n; j += stride) d.push_back(pdist(a.p(i), b.p(j)));
    const size_t mid = d.size() / 2;
    std::nth_element(d.begin(), d.begin() + mid, d.end());
    if (d[mid] > 0) return d[mid];
    return *std::max_element(d.begin(), d.end());
}

}  // namespace

Assignment emd_exact(const PointCloud3& a, const PointCloud3& b) {
    const int n = a.count();
    if (n != b.count()) throw NumericError("emd_exact: cloud sizes differ");
    if (n == 0) throw NumericError("emd_exact: empty clouds");
    if (n > 256) throw NumericError("emd_exact: oracle limited to n <= 256");

    // Shortest-augmenting-path assignment with potentials (1-based work arrays).
    std::vector<double> u(size_t(n) + 1, 0), v(size_t(n) + 1, 0);
    std::vector<int> match(size_t(n) + 1, 0), way(size_t(n) + 1, 0);
    for (int i = 1; i <= n; ++i) {
        match[0] = i;
        int j0 = 0;
        std::vector<double> minv(size_t(n) + 1, kInf);
        std::vector<char> used(size_t(n) + 1, 0);
        do {
            used[size_t(j0)] = 1;
            const int i0 = match[size_t(j0)];
            double delta = kInf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[size_t(j)]) continue;
                const double cur = pdist(a.p(i0 - 1), b.p(j - 1)) - u[size_t(i0)] - v[size_t(j)];
                if (cur < minv[size_t(j)]) {
                    minv[size_t(j)] = cur;
                    way[size_t(j)] = j0;
                }
                if (minv[size_t(j)] < delta) {
                    delta = minv[size_t(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[size_t(j)]) {
                    u[size_t(match[size_t(j)])] += delta;
                    v[size_t(j)] -= delta;
                } else {
                    minv[size_t(j)] -= delta;
                }
            }
            j0 = j1;
        } while (match[size_t(j0)] != 0);
        do {
            const int j1 = way[size_t(j0)];
            match[size_t(j0)] = match[size_t(j1)];
            j0 = j1;
        } while (j0);
    }

    Assignment out;
    out.perm.assign(size_t(n), -1);
    for (int j = 1; j <= n; ++j) out.perm[size_t(match[size_t(j)] - 1)] = j - 1;
    out.cost = mean_matched(a, b, out.perm);
    return out;
}

Assignment auction_assign(const PointCloud3& a, const PointCloud3& b) {
    const int n = a.count();
    if (n != b.count()) throw NumericError("emd_approx: cloud sizes differ");
    if (n == 0) throw NumericError("emd_approx: empty clouds");

    Assignment out;
    out.perm.assign(static_cast<size_t>(n), -1);
    if (n == 1) {
        out.perm[0] = 0;
        out.cost = pdist(a.p(0), b.p(0));
        return out;
    }

    const double scale = distance_scale(a, b);
    if (scale <= 0) {  // all points coincide
        for (int i = 0; i < n; ++i) out.perm[size_t(i)] = i;
        out.cost = 0;
        return out;
    }
    const double eps_min = 1e-4 * scale;
    double eps = 0.1 * scale;

    // The search runs in float32 (rounding is orders of magnitude below
    // eps_min); the reported cost is re-evaluated in float64. Coordinates
    // are split per axis so the scan kernel vectorizes.
    using fvec = std::vector<float, AlignedAlloc<float>>;
    fvec ax(static_cast<size_t>(n), 0.f), ay(ax), az(ax), bx(ax), by(ax), bz(ax), price(ax),
        value(ax);
    for (int i = 0; i < n; ++i) {
        ax[size_t(i)] = float(a.p(i)[0]);
        ay[size_t(i)] = float(a.p(i)[1]);
        az[size_t(i)] = float(a.p(i)[2]);
        bx[size_t(i)] = float(b.p(i)[0]);
        by[size_t(i)] = float(b.p(i)[1]);
        bz[size_t(i)] = float(b.p(i)[2]);
    }

    std::vector<int> owner(static_cast<size_t>(n));     // object -> person
    std::vector<int> assigned(static_cast<size_t>(n));  // person -> object

    // Fused bid scan: value_j = -dist(i, j) - price_j together with the
    // exact top two values and the lowest-index argmax, in one pass.
    auto scan_bid = [&](int i, float& v1, int& j1, float& v2) {
        const float axi = ax[size_t(i)], ayi = ay[size_t(i)], azi = az[size_t(i)];
        const float* px = bx.data();
        const float* py = by.data();
        const float* pz = bz.data();
        const float* pr = price.data();
        const float ninf = -std::numeric_limits<float>::infinity();
        int j = 0;
        v1 = ninf;
        v2 = ninf;
        j1 = -1;
#ifdef __AVX512F__
        if (n >= 32) {
            const __m512 vax = _mm512_set1_ps(axi);
            const __m512 vay = _mm512_set1_ps(ayi);
            const __m512 vaz = _mm512_set1_ps(azi);
            __m512 top1 = _mm512_set1_ps(ninf), top2 = top1;
            __m512i idx1 = _mm512_set1_epi32(-1);
            __m512i lane = _mm512_setr_epi32(0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15);
            const __m512i step = _mm512_set1_epi32(16);
            for (; j + 16 <= n; j += 16) {
                const __m512 dx = _mm512_sub_ps(vax, _mm512_load_ps(px + j));
                const __m512 dy = _mm512_sub_ps(vay, _mm512_load_ps(py + j));
                const __m512 dz = _mm512_sub_ps(vaz, _mm512_load_ps(pz + j));
                __m512 d2 = _mm512_mul_ps(dx, dx);
                d2 = _mm512_add_ps(d2, _mm512_mul_ps(dy, dy));
                d2 = _mm512_add_ps(d2, _mm512_mul_ps(dz, dz));
                const __m512 v = _mm512_sub_ps(
                    _mm512_sub_ps(_mm512_setzero_ps(), _mm512_sqrt_ps(d2)),
                    _mm512_load_ps(pr + j));
                // per-lane running top-2 (strict > keeps the earliest index)
                const __mmask16 better = _mm512_cmp_ps_mask(v, top1, _CMP_GT_OQ);
                top2 = _mm512_mask_mov_ps(_mm512_max_ps(top2, _mm512_min_ps(v, top1)), better,
                                          top1);
                top1 = _mm512_mask_mov_ps(top1, better, v);
                idx1 = _mm512_mask_mov_epi32(idx1, better, lane);
                lane = _mm512_add_epi32(lane, step);
            }
            alignas(64) float t1[16], t2[16];
            alignas(64) int i1[16];
            _mm512_store_ps(t1, top1);
            _mm512_store_ps(t2, top2);
            _mm512_store_epi32(i1, idx1);
            for (int l = 0; l < 16; ++l) {
                if (i1[l] < 0) continue;
                if (t1[l] > v1) {
                    v2 = std::max(v2, v1);
                    v1 = t1[l];
                    j1 = i1[l];
                } else {
                    // an equal top in another lane is also the runner-up
                    if (t1[l] > v2) v2 = t1[l];
                    if (t1[l] == v1 && i1[l] < j1) j1 = i1[l];
                }
                if (t2[l] > v2) v2 = t2[l];
            }
        }
#endif
        for (; j < n; ++j) {
            const float dx = axi - px[j], dy = ayi - py[j], dz = azi - pz[j];
            const float v = -std::sqrt(dx * dx + dy * dy + dz * dz) - pr[j];
            if (v > v1) {
                v2 = v1;
                v1 = v;
                j1 = j;
            } else if (v > v2) {
                v2 = v;
            }
        }
    };

    while (true) {
        std::fill(owner.begin(), owner.end(), -1);
        std::fill(assigned.begin(), assigned.end(), -1);
        std::deque<int> queue;
        for (int i = 0; i < n; ++i) queue.push_back(i);
        const float feps = float(eps);
        long long kicks = 0;

        while (!queue.empty()) {
            const int i = queue.front();
            queue.pop_front();
            if (assigned[size_t(i)] >= 0) continue;

            float v1, v2;
            int j1;
            scan_bid(i, v1, j1, v2);
            if (!(v2 > -std::numeric_limits<float>::infinity())) v2 = v1;

            price[size_t(j1)] += (v1 - v2) + feps;
            const int prev = owner[size_t(j1)];
            if (prev >= 0) {
                assigned[size_t(prev)] = -1;
                queue.push_back(prev);
                ++kicks;
            }
            owner[size_t(j1)] = i;
            assigned[size_t(i)] = j1;
        }

        // A displacement-free round assigned every person their individual
        // maximum as a bijection, which is already the optimal matching;
        // further eps rounds cannot improve it.
        if (kicks == 0) break;
        if (eps <= eps_min) break;
        eps = std::max(eps * 0.5, eps_min);
    }

    out.perm = assigned;
    out.cost = mean_matched(a, b, out.perm);
    return out;
}

}  // namespace gc
