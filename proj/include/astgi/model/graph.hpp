#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "astgi/diffcore/ops.hpp"
#include "astgi/model/encoder.hpp"
#include "astgi/model/mlp.hpp"

namespace astgi {

struct Neighbor {
    std::size_t index = 0;
    double distance = 0.0;

    friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Directed edges j -> i grouped by target i; the edges of target i occupy
/// [offsets[i], offsets[i+1]) in neighbor-distance order.
struct EdgeList {
    std::vector<std::size_t> target;
    std::vector<std::size_t> source;
    std::vector<std::size_t> offsets{0};

    std::size_t size() const { return source.size(); }
    std::size_t segments() const { return offsets.size() - 1; }
    std::size_t degree(std::size_t i) const { return offsets[i + 1] - offsets[i]; }
};

struct CausalNeighborhood {
    std::vector<std::vector<Neighbor>> candidates;  // C(i), ascending distance
    std::vector<std::vector<std::size_t>> valid;    // N(i), same order

    std::size_t size() const { return candidates.size(); }

    EdgeList edges() const {
        EdgeList e;
        e.offsets.reserve(valid.size() + 1);
        for (std::size_t i = 0; i < valid.size(); ++i) {
            for (std::size_t j : valid[i]) {
                e.target.push_back(i);
                e.source.push_back(j);
            }
            e.offsets.push_back(e.source.size());
        }
        return e;
    }

    friend bool operator==(const CausalNeighborhood&, const CausalNeighborhood&) = default;
};

enum class GraphMetric {
    coordinates,  // Euclidean distance between coordinate rows
    time,         // |t_i - t_j|
};

namespace detail {

/// The k smallest (key, index) pairs among indices [0, n) other than `skip`,
/// ordered by key and then index. A bounded max-heap keeps the scan O(n log k).
template <typename KeyFn>
std::vector<std::pair<double, std::size_t>> k_smallest(std::size_t n, std::size_t k, std::size_t skip, KeyFn&& key) {
    using Entry = std::pair<double, std::size_t>;
    std::priority_queue<Entry> heap;  // largest (key, index) on top
    for (std::size_t j = 0; j < n; ++j) {
        if (j == skip) continue;
        Entry e{key(j), j};
        if (heap.size() < k) {
            heap.push(e);
        } else if (k > 0 && e < heap.top()) {
            heap.pop();
            heap.push(e);
        }
    }
    std::vector<Entry> out(heap.size());
    for (std::size_t i = out.size(); i-- > 0;) {
        out[i] = heap.top();
        heap.pop();
    }
    return out;
}

inline double squared_distance(const double* a, const double* b, std::size_t dim) {
    double acc = 0.0;
    for (std::size_t d = 0; d < dim; ++d) acc += (a[d] - b[d]) * (a[d] - b[d]);
    return acc;
}

template <typename Real>
std::vector<double> to_double(std::span<const Real> v) {
    return std::vector<double>(v.begin(), v.end());
}

}  // namespace detail

/// Candidate sets C(i) (K nearest other points, ties by smaller index) and
/// their causal restriction N(i) = { j in C(i) : t_j <= t_i }.
/// `coords` is row-major [N x dim]; it is ignored for GraphMetric::time.
inline CausalNeighborhood build_structure(std::span<const double> coords, std::size_t dim,
                                          std::span<const double> timestamps, std::size_t k,
                                          GraphMetric metric = GraphMetric::coordinates) {
    const std::size_t n = timestamps.size();
    if (metric == GraphMetric::coordinates && coords.size() != n * dim) {
        throw DimensionError("build_structure: coordinate buffer does not match point count");
    }
    CausalNeighborhood nb;
    nb.candidates.resize(n);
    nb.valid.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto key = [&](std::size_t j) {
            if (metric == GraphMetric::time) return std::abs(timestamps[i] - timestamps[j]);
            return detail::squared_distance(coords.data() + i * dim, coords.data() + j * dim, dim);
        };
        for (const auto& [d, j] : detail::k_smallest(n, k, i, key)) {
            const double dist = metric == GraphMetric::time ? d : std::sqrt(d);
            nb.candidates[i].push_back({j, dist});
            if (timestamps[j] <= timestamps[i]) nb.valid[i].push_back(j);
        }
    }
    return nb;
}

template <typename Real>
CausalNeighborhood build_structure(const PointCloud<Real>& cloud, std::size_t k,
                                   GraphMetric metric = GraphMetric::coordinates) {
    const auto coords = detail::to_double<Real>(cloud.coords.values());
    return build_structure(coords, cloud.coords.cols(), cloud.timestamps, k, metric);
}

/// K nearest history points for each query row (no self-exclusion, no mask:
/// every history point precedes every query).
template <typename Real>
std::vector<std::vector<Neighbor>> query_neighborhoods(const Tensor<Real>& query_coords,
                                                       std::span<const double> query_times,
                                                       const PointCloud<Real>& cloud, std::size_t k,
                                                       GraphMetric metric = GraphMetric::coordinates) {
    const std::size_t dim = cloud.coords.cols();
    const std::size_t n = cloud.size();
    const auto hist = detail::to_double<Real>(cloud.coords.values());
    const auto qry = detail::to_double<Real>(query_coords.values());
    std::vector<std::vector<Neighbor>> out(query_times.size());
    for (std::size_t q = 0; q < query_times.size(); ++q) {
        auto key = [&](std::size_t j) {
            if (metric == GraphMetric::time) return std::abs(query_times[q] - cloud.timestamps[j]);
            return detail::squared_distance(qry.data() + q * dim, hist.data() + j * dim, dim);
        };
        for (const auto& [d, j] : detail::k_smallest(n, k, n, key))
            out[q].push_back({j, metric == GraphMetric::time ? d : std::sqrt(d)});
    }
    return out;
}

/// p_target - p_source for every edge, [E x (d_c + d_t)].
template <typename Real>
Tensor<Real> edge_displacement(const Tensor<Real>& target_coords, const Tensor<Real>& source_coords,
                               const EdgeList& edges) {
    return sub(gather_rows(target_coords, edges.target), gather_rows(source_coords, edges.source));
}

template <typename Real>
struct EdgeWeights {
    Tensor<Real> scores;   // s_ij, [E]
    Tensor<Real> weights;  // a_ij, [E], softmax within each target's segment
};

/// Relation-aware edge weights for one layer:
///   r_ij = (p_i - p_j) (+) h_i (+) h_j,  s_ij = score_net(r_ij),
///   a_ij = softmax over j in N(i).
/// Targets with an empty N(i) get an empty segment; the caller handles them.
/// Without relation awareness the displacement is dropped from r_ij.
template <typename Real>
EdgeWeights<Real> compute_weights(const PointCloud<Real>& cloud, const EdgeList& edges,
                                  const Tensor<Real>& displacement, const Mlp<Real>& score_net,
                                  bool relation_aware = true) {
    const Tensor<Real> hi = gather_rows(cloud.features, edges.target);
    const Tensor<Real> hj = gather_rows(cloud.features, edges.source);
    const Tensor<Real> relation = relation_aware ? concat<Real>({displacement, hi, hj}, 1) : concat<Real>({hi, hj}, 1);
    EdgeWeights<Real> w;
    w.scores = reshape(score_net(relation), Shape{edges.size()});
    w.weights = segment_softmax(w.scores, edges.offsets);
    return w;
}

/// One JSON line per point: index, candidates, valid neighbors and distances.
inline void write_neighborhood_jsonl(std::ostream& out, const std::string& series_id, const CausalNeighborhood& nb) {
    for (std::size_t i = 0; i < nb.size(); ++i) {
        nlohmann::json cand = nlohmann::json::array(), dist = nlohmann::json::array();
        for (const auto& n : nb.candidates[i]) {
            cand.push_back(n.index);
            dist.push_back(n.distance);
        }
        nlohmann::json line = {{"series_id", series_id}, {"point", i},         {"candidates", cand},
                               {"distances", dist},      {"neighbors", nb.valid[i]}};
        out << line.dump() << '\n';
    }
}

}  // namespace astgi
