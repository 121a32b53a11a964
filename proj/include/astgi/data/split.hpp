#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "astgi/data/sample.hpp"
#include "astgi/errors.hpp"

namespace astgi {

struct SplitRatios {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
};

struct DataSplits {
    std::vector<SplitSample> train;
    std::vector<SplitSample> val;
    std::vector<SplitSample> test;
};

/// Deterministic Fisher-Yates permutation of [0, n).
inline std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    std::mt19937_64 rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(perm[i - 1], perm[j]);
    }
    return perm;
}

/// Shuffles by seed and slices contiguously into train/val/test. Validation
/// and test sizes are floor(n * ratio); the remainder goes to training.
inline DataSplits split_tvt(std::span<const SplitSample> samples, SplitRatios ratios, std::uint64_t seed) {
    if (std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9 || ratios.train < 0 || ratios.val < 0 ||
        ratios.test < 0) {
        throw ValidationError("split ratios must be non-negative and sum to 1");
    }
    const std::size_t n = samples.size();
    if (n < 3) throw ValidationError("split_tvt: need at least 3 samples, got " + std::to_string(n));
    const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios.val + 1e-9));
    const auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios.test + 1e-9));
    const std::size_t n_train = n - n_val - n_test;

    const auto perm = seeded_permutation(n, seed);
    DataSplits out;
    for (std::size_t k = 0; k < n; ++k) {
        const auto& s = samples[perm[k]];
        if (k < n_train) {
            out.train.push_back(s);
        } else if (k < n_train + n_val) {
            out.val.push_back(s);
        } else {
            out.test.push_back(s);
        }
    }
    return out;
}

}  // namespace astgi
