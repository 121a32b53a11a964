#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "astgi/data/split.hpp"
#include "astgi/errors.hpp"
#include "astgi/model/config.hpp"

namespace astgi {

/// Evaluation protocol constants: 300 epochs at most, early stopping after 5
/// epochs without validation improvement, an 80/10/10 split and five runs
/// seeded 2024 through 2028.
namespace protocol {
inline constexpr std::size_t kMaxEpochs = 300;
inline constexpr std::size_t kPatience = 5;
inline constexpr double kTrainRatio = 0.8;
inline constexpr double kValRatio = 0.1;
inline constexpr double kTestRatio = 0.1;
inline constexpr std::array<std::uint64_t, 5> kSeeds = {2024, 2025, 2026, 2027, 2028};
inline constexpr const char* kOptimizer = "adamw";
}  // namespace protocol

struct TrainConfig {
    double lr = 1e-3;
    double weight_decay = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t max_epochs = protocol::kMaxEpochs;
    std::size_t patience = protocol::kPatience;
    std::size_t batch_size = 32;
    double min_delta = 1e-6;  // required strict decrease of validation MSE
    std::uint64_t seed = protocol::kSeeds[0];
    std::uint64_t split_seed = protocol::kSeeds[0];
    std::vector<std::uint64_t> seeds{protocol::kSeeds.begin(), protocol::kSeeds.end()};
    SplitRatios split{protocol::kTrainRatio, protocol::kValRatio, protocol::kTestRatio};
    bool f64 = false;
    ModelConfig model;

    void validate() const {
        if (max_epochs < 1) throw ValidationError("max_epochs must be >= 1");
        if (patience < 1) throw ValidationError("patience must be >= 1");
        if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
        if (!(lr > 0)) throw ValidationError("lr must be > 0");
        if (!(weight_decay >= 0)) throw ValidationError("weight_decay must be >= 0");
        model.validate();
    }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = {{"lr", c.lr},
         {"weight_decay", c.weight_decay},
         {"beta1", c.beta1},
         {"beta2", c.beta2},
         {"adam_eps", c.adam_eps},
         {"optimizer", protocol::kOptimizer},
         {"max_epochs", c.max_epochs},
         {"patience", c.patience},
         {"batch_size", c.batch_size},
         {"min_delta", c.min_delta},
         {"seed", c.seed},
         {"split_seed", c.split_seed},
         {"seeds", c.seeds},
         {"split", {c.split.train, c.split.val, c.split.test}},
         {"f64", c.f64},
         {"model", c.model}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
    c.lr = j.value("lr", c.lr);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    if (j.contains("optimizer") && j.at("optimizer").get<std::string>() != protocol::kOptimizer) {
        throw ValidationError("only the adamw optimizer is supported");
    }
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.min_delta = j.value("min_delta", c.min_delta);
    c.seed = j.value("seed", c.seed);
    c.split_seed = j.value("split_seed", c.split_seed);
    c.seeds = j.value("seeds", c.seeds);
    if (j.contains("split")) {
        const auto r = j.at("split").get<std::vector<double>>();
        if (r.size() != 3) throw ValidationError("split must list three ratios");
        c.split = {r[0], r[1], r[2]};
    }
    c.f64 = j.value("f64", c.f64);
    if (j.contains("model")) c.model = j.at("model").get<ModelConfig>();
}

}  // namespace astgi
