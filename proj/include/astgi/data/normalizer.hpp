#pragma once

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "astgi/data/sample.hpp"
#include "astgi/errors.hpp"

namespace astgi {

/// Per-channel z-score for values and an affine map of timestamps that sends
/// the training history range onto [0, 1]. Later timestamps may exceed 1.
struct Normalizer {
    static constexpr double kStdFloor = 1e-8;

    std::vector<double> mean;
    std::vector<double> stddev;
    double time_offset = 0.0;
    double time_scale = 1.0;

    std::size_t n_channels() const { return mean.size(); }

    double apply_value(double x, std::size_t c) const { return (x - mean.at(c)) / stddev.at(c); }
    double invert_value(double z, std::size_t c) const { return z * stddev.at(c) + mean.at(c); }
    double apply_time(double t) const { return (t - time_offset) / time_scale; }
    double invert_time(double u) const { return u * time_scale + time_offset; }

    SplitSample apply(const SplitSample& s) const {
        SplitSample out = s;
        for (auto& o : out.observations) {
            o.t = apply_time(o.t);
            o.x = apply_value(o.x, o.c);
        }
        out.split_time = apply_time(s.split_time);
        return out;
    }

    std::vector<SplitSample> apply(std::span<const SplitSample> samples) const {
        std::vector<SplitSample> out;
        out.reserve(samples.size());
        for (const auto& s : samples) out.push_back(apply(s));
        return out;
    }
};

/// Fits on the history observations of the training samples only; query
/// observations never influence the statistics.
inline Normalizer fit_normalizer(std::span<const SplitSample> train, std::size_t n_channels,
                                 std::ostream* warnings = &std::clog) {
    if (n_channels == 0) throw ValidationError("fit_normalizer: n_channels must be >= 1");
    std::vector<double> sum(n_channels, 0.0), count(n_channels, 0.0);
    double total = 0.0, total_count = 0.0;
    double t_min = std::numeric_limits<double>::infinity();
    double t_max = -std::numeric_limits<double>::infinity();
    for (const auto& s : train) {
        for (std::size_t idx : s.history) {
            const auto& o = s.observations[idx];
            if (o.c >= n_channels) throw ValidationError("fit_normalizer: channel out of range");
            sum[o.c] += o.x;
            count[o.c] += 1.0;
            total += o.x;
            total_count += 1.0;
            t_min = std::min(t_min, o.t);
            t_max = std::max(t_max, o.t);
        }
    }
    if (total_count == 0.0) throw ValidationError("fit_normalizer: no training history observations");

    std::vector<double> sq(n_channels, 0.0);
    const double global_mean = total / total_count;
    double global_sq = 0.0;
    std::vector<double> mean(n_channels);
    for (std::size_t c = 0; c < n_channels; ++c) mean[c] = count[c] > 0 ? sum[c] / count[c] : global_mean;
    for (const auto& s : train) {
        for (std::size_t idx : s.history) {
            const auto& o = s.observations[idx];
            sq[o.c] += (o.x - mean[o.c]) * (o.x - mean[o.c]);
            global_sq += (o.x - global_mean) * (o.x - global_mean);
        }
    }
    const double global_std = std::max(std::sqrt(global_sq / total_count), Normalizer::kStdFloor);

    Normalizer norm;
    norm.mean = mean;
    norm.stddev.resize(n_channels);
    for (std::size_t c = 0; c < n_channels; ++c) {
        if (count[c] == 0) {
            if (warnings) {
                *warnings << "warning: channel " << c
                          << " has no training history; using global mean/std\n";
            }
            norm.stddev[c] = global_std;
        } else {
            norm.stddev[c] = std::max(std::sqrt(sq[c] / count[c]), Normalizer::kStdFloor);
        }
    }
    norm.time_offset = t_min;
    norm.time_scale = t_max > t_min ? t_max - t_min : 1.0;
    return norm;
}

}  // namespace astgi
