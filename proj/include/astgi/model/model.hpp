#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "astgi/data/sample.hpp"
#include "astgi/diffcore/ops.hpp"
#include "astgi/diffcore/params.hpp"
#include "astgi/model/config.hpp"
#include "astgi/model/encoder.hpp"
#include "astgi/model/graph.hpp"
#include "astgi/model/predictor.hpp"
#include "astgi/model/propagation.hpp"

namespace astgi {

/// Anything that maps a (normalized) sample to one prediction per query.
class Forecaster {
public:
    virtual ~Forecaster() = default;
    virtual std::string name() const = 0;
    /// Predictions for `sample.queries`, in order.
    virtual std::vector<double> predict(const SplitSample& sample) const = 0;
};

template <typename Real>
struct ForwardTrace {
    CausalNeighborhood history;
    PropagationTrace<Real> propagation;
    QueryTrace<Real> query;
};

/// History encoded and propagated through all layers, reusable across the
/// sample's queries.
template <typename Real>
struct HistoryState {
    PointCloud<Real> cloud;  // at layer L
    CausalNeighborhood nbhd;
};

template <typename Real>
class Model : public Forecaster {
public:
    Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
        cfg_.validate();
        if (is_baseline(cfg_.variant)) {
            throw ValidationError("variant '" + std::string(to_string(cfg_.variant)) + "' is not a learned model");
        }
        Initializer init(seed);
        encoder_ = EncoderParams<Real>::create(params_, cfg_, init);
        layers_ = create_layers(params_, cfg_, init);
        predictor_ = PredictorParams<Real>::create(params_, cfg_, init);
    }

    // Tensor handles alias the registered parameters; copying would share them.
    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;

    std::string name() const override { return std::string(to_string(cfg_.variant)); }
    const ModelConfig& config() const { return cfg_; }
    ModelParams<Real>& params() { return params_; }
    const ModelParams<Real>& params() const { return params_; }
    const EncoderParams<Real>& encoder() const { return encoder_; }
    std::span<const LayerParams<Real>> layers() const { return layers_; }
    const PredictorParams<Real>& predictor() const { return predictor_; }

    GraphMetric graph_metric() const {
        return cfg_.time_metric_graph() ? GraphMetric::time : GraphMetric::coordinates;
    }

    HistoryState<Real> forward_history(const SplitSample& sample, ForwardTrace<Real>* trace = nullptr) const {
        PointCloud<Real> cloud = encode_history(sample, encoder_);
        HistoryState<Real> state;
        state.nbhd = build_structure(cloud, cfg_.k, graph_metric());
        state.cloud = propagate<Real>(cloud, state.nbhd, layers_, cfg_, trace ? &trace->propagation : nullptr);
        if (trace) trace->history = state.nbhd;
        return state;
    }

    /// One prediction per query, all sharing a single history pass.
    Tensor<Real> predict_batch(const HistoryState<Real>& state, std::span<const QueryPoint> queries,
                               ForwardTrace<Real>* trace = nullptr) const {
        return predict_queries<Real>(queries, state.cloud, encoder_, predictor_, cfg_, trace ? &trace->query : nullptr);
    }

    Real predict_query(const SplitSample& sample, QueryPoint q) const {
        NoGradGuard no_grad;
        const QueryPoint qs[] = {q};
        return predict_batch(forward_history(sample), qs).item();
    }

    static std::vector<QueryPoint> query_points(const SplitSample& sample) {
        std::vector<QueryPoint> qs;
        qs.reserve(sample.queries.size());
        for (std::size_t k = 0; k < sample.queries.size(); ++k) qs.push_back({sample.query_obs(k).t, sample.query_obs(k).c});
        return qs;
    }

    /// Mean squared error over the sample's query set.
    Tensor<Real> loss_on_sample(const SplitSample& sample, ForwardTrace<Real>* trace = nullptr) const {
        if (sample.queries.empty()) throw EmptyQueryError("series '" + sample.series_id + "' has no queries");
        const auto qs = query_points(sample);
        std::vector<Real> target;
        target.reserve(qs.size());
        for (std::size_t k = 0; k < sample.queries.size(); ++k) target.push_back(static_cast<Real>(sample.query_obs(k).x));
        return mse(predict_batch(forward_history(sample, trace), qs, trace), Tensor<Real>::vector(std::move(target)));
    }

    std::vector<double> predict(const SplitSample& sample) const override {
        NoGradGuard no_grad;
        const auto qs = query_points(sample);
        if (qs.empty()) return {};
        const Tensor<Real> y = predict_batch(forward_history(sample), qs);
        return std::vector<double>(y.values().begin(), y.values().end());
    }

private:
    ModelConfig cfg_;
    ModelParams<Real> params_;
    EncoderParams<Real> encoder_;
    std::vector<LayerParams<Real>> layers_;
    PredictorParams<Real> predictor_;
};

}  // namespace astgi
