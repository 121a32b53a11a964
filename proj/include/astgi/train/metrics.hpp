#pragma once

#include <cmath>
#include <iostream>
#include <span>
#include <vector>

#include "astgi/data/sample.hpp"
#include "astgi/errors.hpp"
#include "astgi/model/model.hpp"

namespace astgi {

struct Metrics {
    double mse = 0.0;
    double mae = 0.0;
    std::size_t count = 0;
};

/// MSE and MAE pooled over every query of every sample (normalized space).
inline Metrics evaluate(const Forecaster& model, std::span<const SplitSample> samples) {
    double se = 0.0, ae = 0.0;
    std::size_t n = 0;
    for (const auto& s : samples) {
        if (s.queries.empty()) continue;
        const auto pred = model.predict(s);
        for (std::size_t k = 0; k < s.queries.size(); ++k) {
            const double err = pred[k] - s.query_obs(k).x;
            se += err * err;
            ae += std::abs(err);
        }
        n += s.queries.size();
    }
    if (n == 0) throw EmptyQueryError("evaluate: no queries in the evaluated samples");
    return {se / static_cast<double>(n), ae / static_cast<double>(n), n};
}

struct SeedSummary {
    double mse_mean = 0.0;
    double mse_std = 0.0;
    double mae_mean = 0.0;
    double mae_std = 0.0;
    std::size_t runs = 0;
};

/// Mean and sample standard deviation (n - 1 denominator) across runs.
/// A single run reports a standard deviation of 0.
inline SeedSummary aggregate_seeds(std::span<const Metrics> runs, std::ostream* warnings = &std::clog) {
    if (runs.empty()) throw ContractError("aggregate_seeds: no runs");
    SeedSummary s;
    s.runs = runs.size();
    for (const auto& r : runs) {
        s.mse_mean += r.mse;
        s.mae_mean += r.mae;
    }
    s.mse_mean /= static_cast<double>(runs.size());
    s.mae_mean /= static_cast<double>(runs.size());
    if (runs.size() == 1) {
        if (warnings) *warnings << "warning: single run, standard deviation reported as 0\n";
        return s;
    }
    for (const auto& r : runs) {
        s.mse_std += (r.mse - s.mse_mean) * (r.mse - s.mse_mean);
        s.mae_std += (r.mae - s.mae_mean) * (r.mae - s.mae_mean);
    }
    s.mse_std = std::sqrt(s.mse_std / static_cast<double>(runs.size() - 1));
    s.mae_std = std::sqrt(s.mae_std / static_cast<double>(runs.size() - 1));
    return s;
}

}  // namespace astgi
