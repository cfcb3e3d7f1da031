#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace gc {

// Exact nearest-neighbor index over a flat coordinate array (non-owning).
// Median-split on the cycling axis; queries prune on the splitting distance
// with a tiny relative margin so floating-point rounding can never skip the
// true minimum.
template <int DIM>
class KdTree {
public:
    KdTree(const double* pts, int n) : pts_(pts), n_(n), idx_(size_t(n)) {
        std::iota(idx_.begin(), idx_.end(), 0);
        if (n_ > 0) build(0, n_, 0);
    }

    static double dist2(const double* a, const double* b) {
        double s = 0;
        for (int d = 0; d < DIM; ++d) {
            const double t = a[d] - b[d];
            s += t * t;
        }
        return s;
    }

    // (point index, squared distance); n must be > 0.
    std::pair<int, double> nearest(const double* q) const {
        int best = -1;
        double best_d2 = std::numeric_limits<double>::infinity();
        nearest_rec(q, 0, n_, 0, best, best_d2);
        return {best, best_d2};
    }

    // k nearest as (squared distance, index), ascending; k > n returns n.
    void knn(const double* q, int k, std::vector<std::pair<double, int>>& out) const {
        out.clear();
        if (k <= 0 || n_ == 0) return;
        k = std::min(k, n_);
        heap_.clear();
        knn_rec(q, 0, n_, 0, k);
        out.assign(heap_.begin(), heap_.end());
        std::sort(out.begin(), out.end());
    }

private:
    void build(int lo, int hi, int depth) {
        if (hi - lo <= kLeaf) return;
        const int axis = depth % DIM;
        const int mid = (lo + hi) / 2;
        std::nth_element(idx_.begin() + lo, idx_.begin() + mid, idx_.begin() + hi,
                         [&](int a, int b) {
                             return pts_[size_t(a) * DIM + axis] < pts_[size_t(b) * DIM + axis];
                         });
        build(lo, mid, depth + 1);
        build(mid + 1, hi, depth + 1);
    }

    void nearest_rec(const double* q, int lo, int hi, int depth, int& best,
                     double& best_d2) const {
        if (hi - lo <= kLeaf) {
            for (int i = lo; i < hi; ++i) {
                const double d2 = dist2(q, &pts_[size_t(idx_[size_t(i)]) * DIM]);
                if (d2 < best_d2 || (d2 == best_d2 && idx_[size_t(i)] < best)) {
                    best_d2 = d2;
                    best = idx_[size_t(i)];
                }
            }
            return;
        }
        const int axis = depth % DIM;
        const int mid = (lo + hi) / 2;
        const double split = pts_[size_t(idx_[size_t(mid)]) * DIM + axis];
        const double gap = q[axis] - split;
        const double d2m = dist2(q, &pts_[size_t(idx_[size_t(mid)]) * DIM]);
        if (d2m < best_d2 || (d2m == best_d2 && idx_[size_t(mid)] < best)) {
            best_d2 = d2m;
            best = idx_[size_t(mid)];
        }
        const bool left_first = gap < 0;
        if (left_first) {
            nearest_rec(q, lo, mid, depth + 1, best, best_d2);
            if (gap * gap <= best_d2 * (1 + kMargin)) nearest_rec(q, mid + 1, hi, depth + 1, best, best_d2);
        } else {
            nearest_rec(q, mid + 1, hi, depth + 1, best, best_d2);
            if (gap * gap <= best_d2 * (1 + kMargin)) nearest_rec(q, lo, mid, depth + 1, best, best_d2);
        }
    }

    void heap_push(const double* q, int id, int k) const {
        const double d2 = dist2(q, &pts_[size_t(id) * DIM]);
        if (int(heap_.size()) < k) {
            heap_.emplace_back(d2, id);
            std::push_heap(heap_.begin(), heap_.end());
        } else if (d2 < heap_.front().first) {
            std::pop_heap(heap_.begin(), heap_.end());
            heap_.back() = {d2, id};
            std::push_heap(heap_.begin(), heap_.end());
        }
    }

    void knn_rec(const double* q, int lo, int hi, int depth, int k) const {
        if (hi - lo <= kLeaf) {
            for (int i = lo; i < hi; ++i) heap_push(q, idx_[size_t(i)], k);
            return;
        }
        const int axis = depth % DIM;
        const int mid = (lo + hi) / 2;
        heap_push(q, idx_[size_t(mid)], k);
        const double split = pts_[size_t(idx_[size_t(mid)]) * DIM + axis];
        const double gap = q[axis] - split;
        const auto worst = [&] {
            return int(heap_.size()) < k ? std::numeric_limits<double>::infinity()
                                         : heap_.front().first;
        };
        if (gap < 0) {
            knn_rec(q, lo, mid, depth + 1, k);
            if (gap * gap <= worst() * (1 + kMargin)) knn_rec(q, mid + 1, hi, depth + 1, k);
        } else {
            knn_rec(q, mid + 1, hi, depth + 1, k);
            if (gap * gap <= worst() * (1 + kMargin)) knn_rec(q, lo, mid, depth + 1, k);
        }
    }

    static constexpr int kLeaf = 8;
    static constexpr double kMargin = 1e-12;
    const double* pts_;
    int n_;
    std::vector<int> idx_;
    mutable std::vector<std::pair<double, int>> heap_;
};

}  // namespace gc
