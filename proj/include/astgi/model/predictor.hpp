#pragma once

#include <span>
#include <vector>

#include "astgi/diffcore/ops.hpp"
#include "astgi/diffcore/params.hpp"
#include "astgi/model/config.hpp"
#include "astgi/model/encoder.hpp"
#include "astgi/model/graph.hpp"
#include "astgi/model/mlp.hpp"

namespace astgi {

/// Query-side networks, disjoint from every propagation network.
template <typename Real>
struct PredictorParams {
    Mlp<Real> query_score;  // (d_c + d_t) + d_model -> 1; absent under uniform pooling
    Mlp<Real> value;        // d_model -> d_model
    Mlp<Real> head;         // d_model -> 1

    static PredictorParams create(ModelParams<Real>& params, const ModelConfig& cfg, Initializer& init) {
        PredictorParams p;
        if (!cfg.uniform_query_pooling()) {
            p.query_score = Mlp<Real>::create(params, "predictor.query_score", cfg.coord_dim() + cfg.d_model, cfg.d_model, 1, init);
        }
        p.value = Mlp<Real>::create(params, "predictor.value", cfg.d_model, cfg.d_model, cfg.d_model, init);
        p.head = Mlp<Real>::create(params, "predictor.head", cfg.d_model, cfg.d_model, 1, init);
        return p;
    }
};

struct QueryPoint {
    double t = 0.0;
    std::size_t c = 0;
};

template <typename Real>
struct QueryTrace {
    std::vector<std::vector<Neighbor>> neighborhoods;
    EdgeList edges;
    Tensor<Real> weights;  // a_qi, [E]
};

/// Predictions (normalized value space) for every query against a history
/// cloud that has already been propagated through all layers:
///   p_q = e_{c_q} (+) time(t_q),  N(q) = K nearest history points,
///   s_qi = query_score((p_q - p_i) (+) h_i),  a_qi = softmax over N(q),
///   h_q = sum a_qi value(h_i),  y_q = head(h_q).
template <typename Real>
Tensor<Real> predict_queries(std::span<const QueryPoint> queries, const PointCloud<Real>& cloud,
                             const EncoderParams<Real>& enc, const PredictorParams<Real>& pred, const ModelConfig& cfg,
                             QueryTrace<Real>* trace = nullptr) {
    if (cloud.size() == 0) throw EmptyHistoryError("prediction requires a non-empty history");
    std::vector<double> qt;
    std::vector<std::size_t> qc;
    for (const auto& q : queries) {
        qt.push_back(q.t);
        qc.push_back(q.c);
    }
    const Tensor<Real> pq = enc.coordinates(qt, qc);
    const auto metric = cfg.time_metric_graph() ? GraphMetric::time : GraphMetric::coordinates;
    auto nbhd = query_neighborhoods(pq, qt, cloud, cfg.query_k(), metric);

    EdgeList edges;
    for (std::size_t q = 0; q < nbhd.size(); ++q) {
        for (const auto& n : nbhd[q]) {
            edges.target.push_back(q);
            edges.source.push_back(n.index);
        }
        edges.offsets.push_back(edges.source.size());
    }

    Tensor<Real> weights;
    if (cfg.uniform_query_pooling()) {
        std::vector<Real> w(edges.size());
        for (std::size_t q = 0; q < edges.segments(); ++q) {
            const Real u = Real(1) / static_cast<Real>(edges.degree(q));
            for (std::size_t e = edges.offsets[q]; e < edges.offsets[q + 1]; ++e) w[e] = u;
        }
        weights = Tensor<Real>::vector(std::move(w));
    } else {
        const Tensor<Real> disp = edge_displacement(pq, cloud.coords, edges);
        const Tensor<Real> relation = concat<Real>({disp, gather_rows(cloud.features, edges.source)}, 1);
        weights = segment_softmax(reshape(pred.query_score(relation), Shape{edges.size()}), edges.offsets);
    }
    const Tensor<Real> values = gather_rows(pred.value(cloud.features), edges.source);
    const Tensor<Real> fused = segment_weighted_sum(weights, values, edges.offsets);
    Tensor<Real> out = reshape(pred.head(fused), Shape{queries.size()});
    if (trace) {
        trace->neighborhoods = std::move(nbhd);
        trace->edges = std::move(edges);
        trace->weights = weights;
    }
    return out;
}

}  // namespace astgi
