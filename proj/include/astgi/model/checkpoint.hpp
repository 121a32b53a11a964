#pragma once

#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "astgi/data/normalizer.hpp"
#include "astgi/errors.hpp"
#include "astgi/model/config.hpp"
#include "astgi/model/model.hpp"

// Checkpoint document (JSON):
//   {"format": "astgi-checkpoint", "version": 1, "seed": u64, "numeric_width": 32|64,
//    "model": ModelConfig, "config": <run configuration echo>, "normalizer": {...}?,
//    "params": [{"name": str, "shape": [..], "values": [..]}, ...]}
// Values are written with round-trip precision, so loading reproduces the
// parameters bit-for-bit in the same numeric width.

namespace astgi {

struct ParamRecord {
    std::string name;
    Shape shape;
    std::vector<double> values;
};

struct Checkpoint {
    std::uint64_t seed = 0;
    int numeric_width = 64;
    ModelConfig model;
    nlohmann::json config = nlohmann::json::object();
    std::optional<Normalizer> normalizer;
    std::vector<ParamRecord> params;
};

inline void to_json(nlohmann::json& j, const Normalizer& n) {
    j = {{"mean", n.mean}, {"stddev", n.stddev}, {"time_offset", n.time_offset}, {"time_scale", n.time_scale}};
}

inline void from_json(const nlohmann::json& j, Normalizer& n) {
    n.mean = j.at("mean").get<std::vector<double>>();
    n.stddev = j.at("stddev").get<std::vector<double>>();
    n.time_offset = j.at("time_offset").get<double>();
    n.time_scale = j.at("time_scale").get<double>();
}

template <typename Real>
Checkpoint make_checkpoint(const Model<Real>& model, std::uint64_t seed, nlohmann::json config_echo = nlohmann::json::object(),
                           std::optional<Normalizer> normalizer = std::nullopt) {
    Checkpoint ck;
    ck.seed = seed;
    ck.numeric_width = sizeof(Real) == 8 ? 64 : 32;
    ck.model = model.config();
    ck.config = std::move(config_echo);
    ck.normalizer = std::move(normalizer);
    for (const auto& g : model.params()) {
        ck.params.push_back({g.name, g.tensor.shape(), std::vector<double>(g.tensor.values().begin(), g.tensor.values().end())});
    }
    return ck;
}

inline nlohmann::json checkpoint_to_json(const Checkpoint& ck) {
    nlohmann::json params = nlohmann::json::array();
    for (const auto& p : ck.params) params.push_back({{"name", p.name}, {"shape", p.shape}, {"values", p.values}});
    nlohmann::json j = {{"format", "astgi-checkpoint"}, {"version", 1},        {"seed", ck.seed},
                        {"numeric_width", ck.numeric_width}, {"model", ck.model}, {"config", ck.config},
                        {"params", std::move(params)}};
    if (ck.normalizer) j["normalizer"] = *ck.normalizer;
    return j;
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
    if (j.value("format", std::string{}) != "astgi-checkpoint") throw ValidationError("not an astgi checkpoint");
    Checkpoint ck;
    ck.seed = j.at("seed").get<std::uint64_t>();
    ck.numeric_width = j.at("numeric_width").get<int>();
    ck.model = j.at("model").get<ModelConfig>();
    ck.config = j.value("config", nlohmann::json::object());
    if (j.contains("normalizer")) ck.normalizer = j.at("normalizer").get<Normalizer>();
    for (const auto& p : j.at("params")) {
        ck.params.push_back({p.at("name").get<std::string>(), p.at("shape").get<Shape>(), p.at("values").get<std::vector<double>>()});
    }
    return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write checkpoint '" + path + "'");
    out << checkpoint_to_json(ck).dump(1) << '\n';
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint '" + path + "'");
    try {
        return checkpoint_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed checkpoint '" + path + "': " + e.what());
    }
}

/// Copies checkpoint values into an existing model, matching by name.
template <typename Real>
void load_params(Model<Real>& model, const Checkpoint& ck) {
    auto& params = model.params();
    if (ck.params.size() != params.size()) {
        throw ValidationError("checkpoint has " + std::to_string(ck.params.size()) + " parameter groups, model has " +
                              std::to_string(params.size()));
    }
    for (const auto& rec : ck.params) {
        Tensor<Real> t = params.at(rec.name);
        if (t.shape() != rec.shape || rec.values.size() != t.size()) {
            throw DimensionError("checkpoint parameter '" + rec.name + "' has shape " + shape_string(rec.shape) +
                                 ", model expects " + shape_string(t.shape()));
        }
        auto dst = t.mutable_values();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<Real>(rec.values[i]);
    }
}

template <typename Real>
std::unique_ptr<Model<Real>> restore_model(const Checkpoint& ck) {
    auto model = std::make_unique<Model<Real>>(ck.model, ck.seed);
    load_params(*model, ck);
    return model;
}

}  // namespace astgi
