#pragma once

// Fixtures and an engine-free forward oracle shared by the test binaries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "astgi/astgi.hpp"

namespace astgi::testing {

using Vec = std::vector<double>;

inline ModelConfig tiny_config() {
    ModelConfig m;
    m.n_channels = 3;
    m.d_c = 4;
    m.d_t = 4;
    m.d_model = 8;
    m.k = 3;
    m.layers = 2;
    return m;
}

/// A sample with `n_hist` history and `n_query` query observations on
/// distinct, strictly increasing timestamps in [0, 1).
inline SplitSample random_sample(std::mt19937_64& rng, std::size_t n_hist, std::size_t n_query, std::size_t n_channels,
                                 std::string id = "s") {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const std::size_t n = n_hist + n_query;
    std::vector<double> ts(n);
    for (auto& t : ts) t = unit(rng);
    std::sort(ts.begin(), ts.end());
    std::vector<Observation> obs;
    for (std::size_t i = 0; i < n; ++i) obs.push_back({ts[i], gauss(rng), static_cast<std::size_t>(rng() % n_channels)});
    const double t_s = n_query == 0 ? ts.back() : 0.5 * (ts[n_hist - 1] + ts[n_hist]);
    return make_sample(std::move(id), std::move(obs), t_s);
}

/// Overwrites every parameter with a deterministic small pattern.
template <typename Real>
void set_params_pattern(ModelParams<Real>& params, double scale = 0.3) {
    std::size_t k = 0;
    for (const auto& g : params) {
        Tensor<Real> t = g.tensor;
        for (auto& v : t.mutable_values()) {
            v = static_cast<Real>(scale * std::sin(0.7 * static_cast<double>(k) + 0.3));
            ++k;
        }
    }
}

template <typename Real>
void set_params_random(ModelParams<Real>& params, std::uint64_t seed, double scale = 0.5) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-scale, scale);
    for (const auto& g : params) {
        Tensor<Real> t = g.tensor;
        for (auto& v : t.mutable_values()) v = static_cast<Real>(u(rng));
    }
}

inline SynthConfig small_synth(std::size_t samples = 30) {
    SynthConfig s;
    s.samples = samples;
    s.min_obs = 12;
    s.max_obs = 20;
    return s;
}

// Direct evaluation of the model equations on plain vectors, reading the
// parameter values but none of the engine's operations.
namespace oracle {

struct Mat {
    std::size_t rows = 0, cols = 0;
    Vec v;
    double at(std::size_t i, std::size_t j) const { return v[i * cols + j]; }
};

inline Mat mat(const Tensor<double>& t) {
    Mat m;
    m.rows = t.dim() == 2 ? t.rows() : 1;
    m.cols = t.dim() == 2 ? t.cols() : t.size();
    m.v.assign(t.values().begin(), t.values().end());
    return m;
}

inline Vec cat(const Vec& a, const Vec& b) {
    Vec out = a;
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

inline Vec minus(const Vec& a, const Vec& b) {
    Vec out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

inline Vec mlp(const Mlp<double>& net, const Vec& x) {
    const Mat w1 = mat(net.w1), b1 = mat(net.b1), w2 = mat(net.w2), b2 = mat(net.b2);
    Vec h(w1.cols);
    for (std::size_t k = 0; k < w1.cols; ++k) {
        double s = b1.v[k];
        for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * w1.at(i, k);
        h[k] = s > 0 ? s : 0.0;
    }
    Vec y(w2.cols);
    for (std::size_t k = 0; k < w2.cols; ++k) {
        double s = b2.v[k];
        for (std::size_t i = 0; i < h.size(); ++i) s += h[i] * w2.at(i, k);
        y[k] = s;
    }
    return y;
}

inline Vec softmax(const Vec& s) {
    double mx = s[0];
    for (double v : s) mx = std::max(mx, v);
    Vec p(s.size());
    double z = 0;
    for (std::size_t i = 0; i < s.size(); ++i) z += (p[i] = std::exp(s[i] - mx));
    for (auto& v : p) v /= z;
    return p;
}

inline Vec layer_norm(const Vec& x, const Vec& gain, const Vec& bias, double eps) {
    const double d = static_cast<double>(x.size());
    double mean = 0;
    for (double v : x) mean += v;
    mean /= d;
    double var = 0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= d;
    Vec y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = (x[i] - mean) / std::sqrt(var + eps) * gain[i] + bias[i];
    return y;
}

inline double dist(const Vec& a, const Vec& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

/// Indices of the k nearest points to `p` by full sort on (distance, index).
inline std::vector<std::size_t> knn(const std::vector<Vec>& pts, const Vec& p, std::size_t k, std::size_t skip) {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t j = 0; j < pts.size(); ++j)
        if (j != skip) all.emplace_back(dist(p, pts[j]), j);
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> out;
    for (std::size_t r = 0; r < std::min(k, all.size()); ++r) out.push_back(all[r].second);
    return out;
}

struct History {
    std::vector<Vec> coords;
    std::vector<Vec> features;  // after all layers
    std::vector<double> t;
};

inline Vec coordinate(const Model<double>& model, double t, std::size_t c) {
    const Mat emb = mat(model.encoder().channel_embedding);
    Vec e(emb.v.begin() + static_cast<std::ptrdiff_t>(c * emb.cols),
          emb.v.begin() + static_cast<std::ptrdiff_t>((c + 1) * emb.cols));
    return cat(e, mlp(model.encoder().time_mlp, {t}));
}

/// Encoding, causal kNN graph and `layers` propagation layers (full variant).
inline History history(const Model<double>& model, const SplitSample& s) {
    const auto& cfg = model.config();
    History h;
    for (std::size_t k = 0; k < s.history.size(); ++k) {
        const auto& o = s.history_obs(k);
        h.coords.push_back(coordinate(model, o.t, o.c));
        h.features.push_back(mlp(model.encoder().value_mlp, {o.x}));
        h.t.push_back(o.t);
    }
    const std::size_t n = h.coords.size();
    std::vector<std::vector<std::size_t>> nb(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j : knn(h.coords, h.coords[i], cfg.k, i))
            if (h.t[j] <= h.t[i]) nb[i].push_back(j);

    for (const auto& layer : model.layers()) {
        const Vec gain = mat(layer.gain).v, bias = mat(layer.bias).v;
        std::vector<Vec> next(n);
        for (std::size_t i = 0; i < n; ++i) {
            Vec agg(cfg.d_model, 0.0);
            if (!nb[i].empty()) {
                Vec scores;
                for (std::size_t j : nb[i]) {
                    const Vec r = cat(cat(minus(h.coords[i], h.coords[j]), h.features[i]), h.features[j]);
                    scores.push_back(mlp(layer.score, r)[0]);
                }
                const Vec a = softmax(scores);
                for (std::size_t e = 0; e < nb[i].size(); ++e) {
                    const std::size_t j = nb[i][e];
                    const Vec m = mlp(layer.message, cat(h.features[j], minus(h.coords[i], h.coords[j])));
                    for (std::size_t d = 0; d < m.size(); ++d) agg[d] += a[e] * m[d];
                }
            }
            const Vec u = mlp(layer.update, agg);
            Vec pre(cfg.d_model);
            for (std::size_t d = 0; d < pre.size(); ++d) pre[d] = h.features[i][d] + u[d];
            next[i] = layer_norm(pre, gain, bias, cfg.layer_norm_eps);
        }
        h.features = std::move(next);
    }
    return h;
}

/// Query prediction from a propagated history (full variant).
inline double predict(const Model<double>& model, const History& h, double t, std::size_t c) {
    const auto& cfg = model.config();
    const auto& pred = model.predictor();
    const Vec pq = coordinate(model, t, c);
    const auto nb = knn(h.coords, pq, cfg.query_k(), h.coords.size());
    Vec scores;
    for (std::size_t j : nb) scores.push_back(mlp(pred.query_score, cat(minus(pq, h.coords[j]), h.features[j]))[0]);
    const Vec a = softmax(scores);
    Vec fused(cfg.d_model, 0.0);
    for (std::size_t e = 0; e < nb.size(); ++e) {
        const Vec v = mlp(pred.value, h.features[nb[e]]);
        for (std::size_t d = 0; d < v.size(); ++d) fused[d] += a[e] * v[d];
    }
    return mlp(pred.head, fused)[0];
}

}  // namespace oracle

}  // namespace astgi::testing
