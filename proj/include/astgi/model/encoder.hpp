#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "astgi/data/sample.hpp"
#include "astgi/diffcore/ops.hpp"
#include "astgi/diffcore/params.hpp"
#include "astgi/errors.hpp"
#include "astgi/model/config.hpp"
#include "astgi/model/mlp.hpp"

namespace astgi {

/// Encoded history: per-point coordinates p_i = e_{c_i} (+) e_{t_i} and the
/// layer-l features h_i.
template <typename Real>
struct PointCloud {
    Tensor<Real> coords;    // [N x (d_c + d_t)]
    Tensor<Real> features;  // [N x d_model]
    std::vector<double> timestamps;
    std::vector<std::size_t> channels;
    std::size_t layer = 0;

    std::size_t size() const { return timestamps.size(); }
};

/// Channel embedding, time encoder and value encoder. With learned
/// coordinates disabled, the channel embedding is a frozen one-hot table and
/// the time encoder is a frozen sinusoid ladder; neither is registered as a
/// parameter.
template <typename Real>
struct EncoderParams {
    std::size_t n_channels = 0;
    std::size_t d_c = 0;
    std::size_t d_t = 0;
    bool learned_coords = true;
    Tensor<Real> channel_embedding;  // [N_C x d_c]
    Mlp<Real> time_mlp;              // 1 -> d_t
    Mlp<Real> value_mlp;             // 1 -> d_model

    static EncoderParams create(ModelParams<Real>& params, const ModelConfig& cfg, Initializer& init) {
        EncoderParams e;
        e.n_channels = cfg.n_channels;
        e.d_c = cfg.d_c;
        e.d_t = cfg.d_t;
        e.learned_coords = cfg.learned_coords();
        if (e.learned_coords) {
            e.channel_embedding =
                params.add("encoder.channel_embedding", init.normal<Real>(cfg.n_channels, cfg.d_c, 0.02));
            e.time_mlp = Mlp<Real>::create(params, "encoder.time_mlp", 1, cfg.d_model, cfg.d_t, init);
        } else {
            std::vector<Real> onehot(cfg.n_channels * cfg.d_c, Real(0));
            for (std::size_t c = 0; c < cfg.n_channels && c < cfg.d_c; ++c) onehot[c * cfg.d_c + c] = Real(1);
            e.channel_embedding = Tensor<Real>::matrix(cfg.n_channels, cfg.d_c, std::move(onehot));
        }
        e.value_mlp = Mlp<Real>::create(params, "encoder.value_mlp", 1, cfg.d_model, cfg.d_model, init);
        return e;
    }

    /// Fixed encoding: feature k is sin(2 pi t / P_k) with periods P_k on a
    /// geometric ladder from 1e-2 to 1 in normalized time.
    static std::vector<Real> sinusoid_features(double t, std::size_t d_t) {
        std::vector<Real> out(d_t);
        for (std::size_t k = 0; k < d_t; ++k) {
            const double expo = d_t == 1 ? 0.0 : -2.0 + 2.0 * static_cast<double>(k) / static_cast<double>(d_t - 1);
            const double period = std::pow(10.0, expo);
            out[k] = static_cast<Real>(std::sin(2.0 * std::numbers::pi * t / period));
        }
        return out;
    }

    Tensor<Real> time_embedding(std::span<const double> t) const {
        if (learned_coords) {
            std::vector<Real> col(t.begin(), t.end());
            return time_mlp(Tensor<Real>::matrix(t.size(), 1, std::move(col)));
        }
        std::vector<Real> out;
        out.reserve(t.size() * d_t);
        for (double ti : t) {
            auto row = sinusoid_features(ti, d_t);
            out.insert(out.end(), row.begin(), row.end());
        }
        return Tensor<Real>::matrix(t.size(), d_t, std::move(out));
    }

    /// Coordinates [n x (d_c + d_t)] for (t, c) pairs.
    Tensor<Real> coordinates(std::span<const double> t, std::span<const std::size_t> c) const {
        for (std::size_t ch : c) {
            if (ch >= n_channels) {
                throw ValidationError("channel index " + std::to_string(ch) + " out of range for " +
                                      std::to_string(n_channels) + " channels");
            }
        }
        return concat<Real>({gather_rows(channel_embedding, c), time_embedding(t)}, 1);
    }
};

/// h_i^(0) = value_mlp(x_i) and p_i = e_{c_i} (+) time(t_i) for every history
/// observation of an (already normalized) sample.
template <typename Real>
PointCloud<Real> encode_history(const SplitSample& sample, const EncoderParams<Real>& enc) {
    if (sample.history.empty()) throw EmptyHistoryError("series '" + sample.series_id + "' has an empty history");
    PointCloud<Real> cloud;
    const std::size_t n = sample.history.size();
    std::vector<Real> values(n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto& o = sample.history_obs(k);
        cloud.timestamps.push_back(o.t);
        cloud.channels.push_back(o.c);
        values[k] = static_cast<Real>(o.x);
    }
    cloud.coords = enc.coordinates(cloud.timestamps, cloud.channels);
    cloud.features = enc.value_mlp(Tensor<Real>::matrix(n, 1, std::move(values)));
    cloud.layer = 0;
    return cloud;
}

/// p_q for a single query as a [d_c + d_t] vector.
template <typename Real>
Tensor<Real> encode_query(double t, std::size_t c, const EncoderParams<Real>& enc) {
    const double ts[] = {t};
    const std::size_t cs[] = {c};
    return reshape(enc.coordinates(ts, cs), Shape{enc.d_c + enc.d_t});
}

}  // namespace astgi
