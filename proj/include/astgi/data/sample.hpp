#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "astgi/errors.hpp"

namespace astgi {

/// One (timestamp, value, channel) observation.
struct Observation {
    double t = 0.0;
    double x = 0.0;
    std::size_t c = 0;

    friend bool operator==(const Observation&, const Observation&) = default;
};

/// A series split at `split_time` into history (t <= t_s) and queries (t > t_s).
/// Observations are kept in canonical (t, c, input order) order, so the
/// history is a prefix and the queries are the remaining suffix.
struct SplitSample {
    std::string series_id;
    std::vector<Observation> observations;
    double split_time = 0.0;
    std::vector<std::size_t> history;
    std::vector<std::size_t> queries;

    const Observation& history_obs(std::size_t k) const { return observations[history[k]]; }
    const Observation& query_obs(std::size_t k) const { return observations[queries[k]]; }

    friend bool operator==(const SplitSample&, const SplitSample&) = default;
};

struct DatasetManifest {
    std::size_t n_channels = 1;
    std::vector<std::string> channel_names;
    std::string time_unit;
    std::size_t sample_count = 0;

    friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

struct Dataset {
    DatasetManifest manifest;
    std::vector<SplitSample> samples;
};

/// Sorts observations by (t, c), keeping input order among equal pairs, and
/// derives the history/query partition.
inline SplitSample make_sample(std::string series_id, std::vector<Observation> observations, double split_time) {
    std::stable_sort(observations.begin(), observations.end(), [](const Observation& a, const Observation& b) {
        if (a.t != b.t) return a.t < b.t;
        return a.c < b.c;
    });
    SplitSample s;
    s.series_id = std::move(series_id);
    s.split_time = split_time;
    s.observations = std::move(observations);
    for (std::size_t i = 0; i < s.observations.size(); ++i) {
        (s.observations[i].t <= split_time ? s.history : s.queries).push_back(i);
    }
    return s;
}

/// Throws ValidationError when the sample violates the dataset contract.
inline void validate_sample(const SplitSample& s, std::size_t n_channels) {
    if (!std::isfinite(s.split_time)) {
        throw ValidationError("series '" + s.series_id + "': split time is not finite");
    }
    for (const auto& o : s.observations) {
        if (o.c >= n_channels) {
            throw ValidationError("series '" + s.series_id + "': channel index " + std::to_string(o.c) +
                                  " out of range for " + std::to_string(n_channels) + " channels");
        }
        if (!std::isfinite(o.t) || !std::isfinite(o.x)) {
            throw ValidationError("series '" + s.series_id + "': non-finite observation");
        }
    }
    if (s.history.empty()) {
        throw ValidationError("series '" + s.series_id + "': empty history (no observation with t <= t_s)");
    }
}

}  // namespace astgi
