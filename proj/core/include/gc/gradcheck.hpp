#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "gc/tape.hpp"

namespace gc {

// Result of comparing analytic gradients against central finite differences.
struct GradCheckReport {
    struct Entry {
        std::string name;
        double max_rel_err = 0.0;
        double max_abs_err = 0.0;
    };
    std::vector<Entry> entries;
    double tolerance = 1e-5;

    bool pass() const {
        for (const auto& e : entries)
            if (!(e.max_rel_err < tolerance)) return false;
        return true;
    }
    std::string summary() const;
};

// `build` must construct the loss graph from the current parameter contents;
// it is re-invoked for every probe. Relative error uses
// |a - n| / max(|a|, |n|, 1e-4) so that near-zero gradients are compared
// absolutely at the 1e-9 level.
GradCheckReport grad_check(const std::function<Var(Tape&)>& build,
                           const std::vector<std::pair<std::string, Tensor*>>& params,
                           double tolerance = 1e-5, double h = 1e-6);

}  // namespace gc
