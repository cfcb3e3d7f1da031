#include "gc/adam.hpp"

#include <cmath>

#include "gc/error.hpp"

namespace gc {

void adam_step(const std::vector<Tensor*>& params, AdamState& st) {
    if (st.learning_rate < 0) throw NumericError("adam: learning_rate must be >= 0");
    size_t total = 0;
    for (const Tensor* p : params) total += p->data.size();
    if (st.m.empty()) {
        st.m.assign(total, 0.0);
        st.v.assign(total, 0.0);
    } else if (st.m.size() != total || st.v.size() != total) {
        throw NumericError("adam: state sized for a different parameter set");
    }
    for (const Tensor* p : params)
        if (!p->grad.empty() && p->grad.size() != p->data.size())
            throw NumericError("adam: grad/param size mismatch");

    st.step += 1;
    const double c1 = 1.0 - std::pow(st.beta1, double(st.step));
    const double c2 = 1.0 - std::pow(st.beta2, double(st.step));
    size_t off = 0;
    for (Tensor* p : params) {
        const bool has_grad = !p->grad.empty();
        for (size_t i = 0; i < p->data.size(); ++i) {
            const double g = has_grad ? p->grad[i] : 0.0;
            double& m = st.m[off + i];
            double& v = st.v[off + i];
            m = st.beta1 * m + (1.0 - st.beta1) * g;
            v = st.beta2 * v + (1.0 - st.beta2) * g * g;
            p->data[i] -= st.learning_rate * (m / c1) / (std::sqrt(v / c2) + st.epsilon);
        }
        off += p->data.size();
        p->grad.clear();
    }
}

}  // namespace gc
