#pragma once

#include <map>
#include <string>
#include <vector>

#include "astgi/data/sample.hpp"
#include "astgi/errors.hpp"
#include "astgi/model/model.hpp"

namespace astgi {

/// Predicts each query with the mean of its channel's history values, or the
/// mean of the whole history when the channel was never observed.
class MeanBaseline : public Forecaster {
public:
    std::string name() const override { return "baseline_mean"; }

    std::vector<double> predict(const SplitSample& s) const override {
        if (s.history.empty()) throw EmptyHistoryError("series '" + s.series_id + "' has an empty history");
        std::map<std::size_t, std::pair<double, std::size_t>> per_channel;
        double total = 0.0;
        for (std::size_t idx : s.history) {
            const auto& o = s.observations[idx];
            auto& [sum, n] = per_channel[o.c];
            sum += o.x;
            ++n;
            total += o.x;
        }
        const double global = total / static_cast<double>(s.history.size());
        std::vector<double> out;
        out.reserve(s.queries.size());
        for (std::size_t k = 0; k < s.queries.size(); ++k) {
            auto it = per_channel.find(s.query_obs(k).c);
            out.push_back(it == per_channel.end() ? global : it->second.first / static_cast<double>(it->second.second));
        }
        return out;
    }
};

/// Last observation carried forward: the latest history value of the query's
/// channel with t <= t_q; among equal timestamps the later one in canonical
/// order wins. An unseen channel falls back to the latest history value over
/// all channels.
class LocfBaseline : public Forecaster {
public:
    std::string name() const override { return "baseline_locf"; }

    std::vector<double> predict(const SplitSample& s) const override {
        if (s.history.empty()) throw EmptyHistoryError("series '" + s.series_id + "' has an empty history");
        std::vector<double> out;
        out.reserve(s.queries.size());
        for (std::size_t k = 0; k < s.queries.size(); ++k) {
            const auto& q = s.query_obs(k);
            out.push_back(carry_forward(s, q.t, q.c));
        }
        return out;
    }

    /// Value carried to (t, c) from the history of `s`.
    static double carry_forward(const SplitSample& s, double t, std::size_t c) {
        const Observation* same = nullptr;
        const Observation* any = nullptr;
        for (std::size_t idx : s.history) {
            const auto& o = s.observations[idx];
            if (o.t > t) break;  // history is sorted by time
            any = &o;
            if (o.c == c) same = &o;
        }
        if (same) return same->x;
        if (any) return any->x;
        // Every history point is later than t; use the earliest one.
        return s.observations[s.history.front()].x;
    }
};

}  // namespace astgi
