#pragma once

#include <cstddef>
#include <initializer_list>
#include <new>
#include <string>
#include <vector>

namespace gc {

// 64-byte aligned storage for every numeric buffer. Keeping all buffers on
// the same alignment pins the SIMD peel path of the matrix kernels, which
// is what makes repeated forward passes bit-identical.
template <class T>
struct AlignedAlloc {
    using value_type = T;
    static constexpr std::size_t kAlign = 64;
    AlignedAlloc() = default;
    template <class U>
    AlignedAlloc(const AlignedAlloc<U>&) {}
    T* allocate(std::size_t n) {
        return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(kAlign)));
    }
    void deallocate(T* p, std::size_t) noexcept {
        ::operator delete(p, std::align_val_t(kAlign));
    }
    // resize() leaves trivial elements uninitialized (ops overwrite them);
    // explicit fills like assign(n, v) still initialize.
    template <class U>
    void construct(U* p) noexcept(noexcept(::new(static_cast<void*>(p)) U)) {
        ::new (static_cast<void*>(p)) U;
    }
    template <class U, class... Args>
    void construct(U* p, Args&&... args) {
        ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
    }
    template <class U>
    bool operator==(const AlignedAlloc<U>&) const {
        return true;
    }
};

using dvec = std::vector<double, AlignedAlloc<double>>;

// Dense float64 n-d array in row-major order. `grad` stays empty until a
// backward pass populates it (only for tensors with requires_grad).
struct Tensor {
    std::vector<int> shape;
    dvec data;
    bool requires_grad = false;
    dvec grad;

    Tensor() = default;
    Tensor(std::vector<int> s, dvec d) : shape(std::move(s)), data(std::move(d)) {}

    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, double value);
    static Tensor scalar(double value) { return Tensor({1}, {value}); }
    // 2-d convenience: rows given as nested lists.
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

    long long numel() const {
        long long n = 1;
        for (int d : shape) n *= d;
        return n;
    }
    int rank() const { return int(shape.size()); }
    int rows() const { return shape.at(0); }
    int cols() const { return shape.at(1); }

    double& at(int i) { return data[size_t(i)]; }
    double at(int i) const { return data[size_t(i)]; }
    double& at(int r, int c) { return data[size_t(r) * cols() + c]; }
    double at(int r, int c) const { return data[size_t(r) * cols() + c]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    bool all_finite() const;
    void zero_grad() { grad.clear(); }

    // Throws NumericError unless every value is finite.
    void validate_finite(const std::string& what) const;
};

std::string shape_str(const std::vector<int>& shape);
long long shape_numel(const std::vector<int>& shape);

}  // namespace gc
