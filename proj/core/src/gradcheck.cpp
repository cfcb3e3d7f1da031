#include "gc/gradcheck.hpp"

#include <cmath>
#include <sstream>

#include "gc/error.hpp"

namespace gc {

std::string GradCheckReport::summary() const {
    std::ostringstream os;
    for (const auto& e : entries) {
        os << (e.max_rel_err < tolerance ? "  ok  " : "  FAIL") << "  " << e.name
           << "  rel=" << e.max_rel_err << "  abs=" << e.max_abs_err << "\n";
    }
    os << (pass() ? "gradcheck: pass" : "gradcheck: FAIL") << " (tol " << tolerance << ")\n";
    return os.str();
}

GradCheckReport grad_check(const std::function<Var(Tape&)>& build,
                           const std::vector<std::pair<std::string, Tensor*>>& params,
                           double tolerance, double h) {
    GradCheckReport report;
    report.tolerance = tolerance;

    auto eval = [&]() -> double {
        Tape tape;
        Var loss = build(tape);
        if (loss.value().numel() != 1) throw NumericError("grad_check: loss must be scalar");
        return loss.value().data[0];
    };

    // Analytic pass.
    for (auto& [name, p] : params) p->zero_grad();
    {
        Tape tape;
        Var loss = build(tape);
        tape.backward(loss);
    }

    for (auto& [name, p] : params) {
        GradCheckReport::Entry entry;
        entry.name = name;
        std::vector<double> analytic(p->data.size(), 0.0);
        if (!p->grad.empty()) analytic.assign(p->grad.begin(), p->grad.end());
        for (size_t i = 0; i < p->data.size(); ++i) {
            const double keep = p->data[i];
            p->data[i] = keep + h;
            const double fp = eval();
            p->data[i] = keep - h;
            const double fm = eval();
            p->data[i] = keep;
            const double numeric = (fp - fm) / (2.0 * h);
            const double a = analytic[i];
            const double abs_err = std::fabs(a - numeric);
            const double rel = abs_err / std::max({std::fabs(a), std::fabs(numeric), 1e-4});
            entry.max_rel_err = std::max(entry.max_rel_err, rel);
            entry.max_abs_err = std::max(entry.max_abs_err, abs_err);
        }
        report.entries.push_back(std::move(entry));
    }
    for (auto& [name, p] : params) p->zero_grad();
    return report;
}

}  // namespace gc
