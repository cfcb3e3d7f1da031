#include "gc/tensor.hpp"

#include <cmath>
#include <sstream>

#include "gc/error.hpp"

namespace gc {

Tensor Tensor::zeros(std::vector<int> shape) {
    Tensor t;
    t.shape = std::move(shape);
    t.data.assign(size_t(shape_numel(t.shape)), 0.0);
    return t;
}

Tensor Tensor::full(std::vector<int> shape, double value) {
    Tensor t = zeros(std::move(shape));
    for (auto& x : t.data) x = value;
    return t;
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
    Tensor t;
    const int m = int(rows.size());
    const int n = m ? int(rows.begin()->size()) : 0;
    t.shape = {m, n};
    t.data.reserve(size_t(m) * n);
    for (const auto& r : rows) {
        if (int(r.size()) != n) throw NumericError("Tensor::matrix: ragged rows");
        t.data.insert(t.data.end(), r.begin(), r.end());
    }
    return t;
}

bool Tensor::all_finite() const {
    for (double x : data)
        if (!std::isfinite(x)) return false;
    return true;
}

void Tensor::validate_finite(const std::string& what) const {
    if (!all_finite())
        throw NumericError("non-finite value in " + what + " (shape " + shape_str(shape) + ")");
}

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "]";
    return os.str();
}

long long shape_numel(const std::vector<int>& shape) {
    long long n = 1;
    for (int d : shape) {
        if (d < 0) throw NumericError("negative dimension in shape " + shape_str(shape));
        n *= d;
    }
    return n;
}

}  // namespace gc
