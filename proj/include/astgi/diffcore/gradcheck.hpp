#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "astgi/diffcore/params.hpp"
#include "astgi/diffcore/tensor.hpp"

namespace astgi {

struct GradCheckEntry {
    std::string name;
    std::size_t elements = 0;
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    bool passed = true;
};

struct GradCheckReport {
    double h = 0.0;
    double tol = 0.0;
    std::vector<GradCheckEntry> entries;

    bool passed() const {
        return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.passed; });
    }
    double max_rel_error() const {
        double worst = 0.0;
        for (const auto& e : entries) worst = std::max(worst, e.max_rel_error);
        return worst;
    }
};

/// |a - b| / max(|a|, |b|, 1e-8)
inline double relative_error(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

/// Compares backward() gradients of `loss_fn` against central differences
/// (f(p + h) - f(p - h)) / 2h, element by element, and reports the worst
/// relative error per parameter group. `loss_fn` must return a scalar tensor
/// and be a pure function of the current parameter values.
template <typename Real, typename LossFn>
GradCheckReport finite_diff_check(ModelParams<Real>& params, LossFn&& loss_fn, double h = 1e-6,
                                  double tol = 1e-4) {
    GradCheckReport report;
    report.h = h;
    report.tol = tol;
    if (params.empty()) return report;

    params.zero_grad();
    backward(loss_fn());
    std::vector<std::vector<Real>> analytic;
    for (const auto& g : params) analytic.emplace_back(g.tensor.grad().begin(), g.tensor.grad().end());

    NoGradGuard no_grad;
    for (std::size_t gi = 0; gi < params.size(); ++gi) {
        Tensor<Real> tensor = params[gi].tensor;
        GradCheckEntry entry;
        entry.name = params[gi].name;
        entry.elements = tensor.size();
        auto values = tensor.mutable_values();
        for (std::size_t k = 0; k < values.size(); ++k) {
            const Real original = values[k];
            values[k] = original + static_cast<Real>(h);
            const double plus = static_cast<double>(loss_fn().item());
            values[k] = original - static_cast<Real>(h);
            const double minus = static_cast<double>(loss_fn().item());
            values[k] = original;
            const double numeric = (plus - minus) / (2.0 * h);
            const double exact = static_cast<double>(analytic[gi][k]);
            entry.max_rel_error = std::max(entry.max_rel_error, relative_error(exact, numeric));
            entry.max_abs_error = std::max(entry.max_abs_error, std::abs(exact - numeric));
        }
        entry.passed = entry.max_rel_error < tol;
        report.entries.push_back(std::move(entry));
    }
    return report;
}

}  // namespace astgi
