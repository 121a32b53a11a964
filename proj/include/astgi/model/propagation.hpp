#pragma once

#include <span>
#include <string>
#include <vector>

#include "astgi/diffcore/ops.hpp"
#include "astgi/diffcore/params.hpp"
#include "astgi/model/config.hpp"
#include "astgi/model/graph.hpp"
#include "astgi/model/mlp.hpp"

namespace astgi {

template <typename Real>
struct LayerParams {
    Mlp<Real> score;    // (d_c + d_t) + 2 d_model -> 1
    Mlp<Real> message;  // d_model + (d_c + d_t) -> d_model
    Mlp<Real> update;   // d_model -> d_model
    Tensor<Real> gain;
    Tensor<Real> bias;
};

/// Untied per-layer parameters. With `share_score_net` every layer reuses the
/// score network registered as "propagation.score".
template <typename Real>
std::vector<LayerParams<Real>> create_layers(ModelParams<Real>& params, const ModelConfig& cfg, Initializer& init) {
    const std::size_t rel = cfg.relation_aware() ? cfg.coord_dim() : 0;
    std::vector<LayerParams<Real>> layers(cfg.layers);
    Mlp<Real> shared;
    if (cfg.share_score_net && cfg.layers > 0) {
        shared = Mlp<Real>::create(params, "propagation.score", rel + 2 * cfg.d_model, cfg.d_model, 1, init);
    }
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        const std::string p = "propagation.layer" + std::to_string(l);
        auto& L = layers[l];
        L.score = cfg.share_score_net ? shared
                                      : Mlp<Real>::create(params, p + ".score", rel + 2 * cfg.d_model, cfg.d_model, 1, init);
        L.message = Mlp<Real>::create(params, p + ".message", cfg.d_model + rel, cfg.d_model, cfg.d_model, init);
        L.update = Mlp<Real>::create(params, p + ".update", cfg.d_model, cfg.d_model, cfg.d_model, init);
        L.gain = params.add(p + ".norm.gain", Tensor<Real>::full({cfg.d_model}, Real(1)));
        L.bias = params.add(p + ".norm.bias", Tensor<Real>::zeros({cfg.d_model}));
    }
    return layers;
}

/// m_{j->i} = message_net(h_j (+) (p_i - p_j)), one row per edge. Without
/// relation awareness the displacement is dropped.
template <typename Real>
Tensor<Real> message(const Tensor<Real>& sender_features, const Tensor<Real>& displacement, const LayerParams<Real>& layer,
                     bool relation_aware = true) {
    if (!relation_aware) return layer.message(sender_features);
    return layer.message(concat<Real>({sender_features, displacement}, 1));
}

/// m_i = sum_j a_ij m_{j->i}; targets without neighbors receive a zero row.
template <typename Real>
Tensor<Real> aggregate(const Tensor<Real>& messages, const Tensor<Real>& weights, const EdgeList& edges) {
    return segment_weighted_sum(weights, messages, edges.offsets);
}

/// h^(l+1) = LayerNorm(h^(l) + update_net(m)).
template <typename Real>
Tensor<Real> update(const Tensor<Real>& features, const Tensor<Real>& aggregated, const LayerParams<Real>& layer, Real eps) {
    return layer_norm(add(features, layer.update(aggregated)), layer.gain, layer.bias, eps);
}

/// Per-layer record of the edge weights, for inspection and invariant checks.
template <typename Real>
struct PropagationTrace {
    std::vector<EdgeWeights<Real>> layers;
};

/// Runs every layer synchronously: each point's update at layer l reads only
/// layer-l features. The structure `nbhd` is fixed for the whole pass; the
/// weights are recomputed per layer.
template <typename Real>
PointCloud<Real> propagate(const PointCloud<Real>& cloud, const CausalNeighborhood& nbhd,
                           std::span<const LayerParams<Real>> layers, const ModelConfig& cfg,
                           PropagationTrace<Real>* trace = nullptr) {
    PointCloud<Real> out = cloud;
    if (layers.empty()) return out;
    const EdgeList edges = nbhd.edges();
    const Tensor<Real> disp = edge_displacement(cloud.coords, cloud.coords, edges);
    const Real eps = static_cast<Real>(cfg.layer_norm_eps);
    for (const auto& layer : layers) {
        EdgeWeights<Real> w = compute_weights(out, edges, disp, layer.score, cfg.relation_aware());
        const Tensor<Real> msgs = message(gather_rows(out.features, edges.source), disp, layer, cfg.relation_aware());
        const Tensor<Real> agg = aggregate(msgs, w.weights, edges);
        out.features = update(out.features, agg, layer, eps);
        ++out.layer;
        if (trace) trace->layers.push_back(std::move(w));
    }
    return out;
}

}  // namespace astgi
