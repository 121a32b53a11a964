#pragma once

#include <array>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "astgi/errors.hpp"

namespace astgi {

/// Model variants: the full model, four ablations, and two non-learned
/// sanity baselines.
enum class Variant {
    full,
    no_learned_coords,
    no_adaptive_graph,
    no_relation_aware,
    mean_pooling,
    baseline_mean,
    baseline_locf,
};

inline constexpr std::array<Variant, 7> kAllVariants = {
    Variant::full,         Variant::no_learned_coords, Variant::no_adaptive_graph, Variant::no_relation_aware,
    Variant::mean_pooling, Variant::baseline_mean,     Variant::baseline_locf,
};

inline std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::full: return "full";
        case Variant::no_learned_coords: return "no_learned_coords";
        case Variant::no_adaptive_graph: return "no_adaptive_graph";
        case Variant::no_relation_aware: return "no_relation_aware";
        case Variant::mean_pooling: return "mean_pooling";
        case Variant::baseline_mean: return "baseline_mean";
        case Variant::baseline_locf: return "baseline_locf";
    }
    return "unknown";
}

inline Variant parse_variant(std::string_view tag) {
    for (Variant v : kAllVariants)
        if (to_string(v) == tag) return v;
    throw ValidationError("unknown variant tag '" + std::string(tag) + "'");
}

inline bool is_baseline(Variant v) { return v == Variant::baseline_mean || v == Variant::baseline_locf; }

struct ModelConfig {
    std::size_t n_channels = 1;
    std::size_t d_c = 8;
    std::size_t d_t = 8;
    std::size_t d_model = 64;
    std::size_t k = 8;
    std::size_t k_query = 0;  // 0: same as k
    std::size_t layers = 2;
    double layer_norm_eps = 1e-5;
    bool share_score_net = false;
    Variant variant = Variant::full;

    std::size_t coord_dim() const { return d_c + d_t; }
    std::size_t query_k() const { return k_query == 0 ? k : k_query; }
    bool learned_coords() const { return variant != Variant::no_learned_coords; }
    bool relation_aware() const { return variant != Variant::no_relation_aware; }
    bool time_metric_graph() const { return variant == Variant::no_adaptive_graph; }
    bool uniform_query_pooling() const { return variant == Variant::mean_pooling; }

    void validate() const {
        if (n_channels == 0 || d_c == 0 || d_t == 0 || d_model == 0 || k == 0) {
            throw ValidationError("model dimensions (n_channels, d_c, d_t, d_model, k) must all be >= 1");
        }
        if (!(layer_norm_eps > 0)) throw ValidationError("layer_norm_eps must be > 0");
    }
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = {{"n_channels", c.n_channels}, {"d_c", c.d_c},         {"d_t", c.d_t},
         {"d_model", c.d_model},       {"k", c.k},             {"k_query", c.k_query},
         {"layers", c.layers},         {"layer_norm_eps", c.layer_norm_eps},
         {"share_score_net", c.share_score_net}, {"variant", std::string(to_string(c.variant))}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
    c.n_channels = j.value("n_channels", c.n_channels);
    c.d_c = j.value("d_c", c.d_c);
    c.d_t = j.value("d_t", c.d_t);
    c.d_model = j.value("d_model", c.d_model);
    c.k = j.value("k", c.k);
    c.k_query = j.value("k_query", c.k_query);
    c.layers = j.value("layers", c.layers);
    c.layer_norm_eps = j.value("layer_norm_eps", c.layer_norm_eps);
    c.share_score_net = j.value("share_score_net", c.share_score_net);
    if (j.contains("variant")) c.variant = parse_variant(j.at("variant").get<std::string>());
}

}  // namespace astgi
