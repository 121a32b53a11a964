#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "astgi/data/split.hpp"
#include "astgi/diffcore/adamw.hpp"
#include "astgi/diffcore/ops.hpp"
#include "astgi/model/checkpoint.hpp"
#include "astgi/model/model.hpp"
#include "astgi/train/config.hpp"
#include "astgi/train/metrics.hpp"

namespace astgi {

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_mse = 0.0;
    double val_mae = 0.0;
};

struct TrainReport {
    std::string variant;
    std::uint64_t seed = 0;
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;
    double best_val_mse = std::numeric_limits<double>::infinity();
    double best_val_mae = std::numeric_limits<double>::infinity();
    std::string stop_reason;
    double wall_time_s = 0.0;
    double test_mse = 0.0;
    double test_mae = 0.0;
};

inline void to_json(nlohmann::json& j, const EpochRecord& e) {
    j = {{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_mse", e.val_mse}, {"val_mae", e.val_mae}};
}

inline void to_json(nlohmann::json& j, const TrainReport& r) {
    j = {{"variant", r.variant},
         {"seed", r.seed},
         {"epochs", r.epochs},
         {"best_epoch", r.best_epoch},
         {"best_val_mse", r.best_val_mse},
         {"best_val_mae", r.best_val_mae},
         {"stop_reason", r.stop_reason},
         {"wall_time_s", r.wall_time_s},
         {"test_mse", r.test_mse},
         {"test_mae", r.test_mae}};
}

/// Raised when a batch loss stops being finite. Carries the report so far and
/// the parameters at the point of divergence.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& m, TrainReport report, Checkpoint snapshot)
        : Error("divergence", m), report_(std::move(report)), snapshot_(std::move(snapshot)) {}

    const TrainReport& report() const { return report_; }
    const Checkpoint& snapshot() const { return snapshot_; }

private:
    TrainReport report_;
    Checkpoint snapshot_;
};

namespace detail {

inline std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) {
    // splitmix64 finalizer over (seed, epoch)
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(epoch) + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace detail

/// Mini-batch AdamW on the training split (per-batch loss = mean of the
/// per-sample query MSEs), validation after every epoch, early stopping, and
/// restoration of the best-validation parameters before the test evaluation.
/// All splits must already be normalized.
template <typename Real>
TrainReport fit(Model<Real>& model, const TrainConfig& cfg, const DataSplits& data, std::uint64_t seed,
                std::ostream* log = nullptr) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    TrainReport report;
    report.variant = model.name();
    report.seed = seed;

    std::vector<const SplitSample*> train;
    for (const auto& s : data.train) {
        if (s.queries.empty()) {
            if (log) *log << "warning: skipping series '" << s.series_id << "' with no queries\n";
            continue;
        }
        train.push_back(&s);
    }
    if (train.empty()) throw EmptyQueryError("training split has no sample with queries");

    auto& params = model.params();
    AdamW<Real> opt(params, {cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay});
    auto best = params.snapshot();
    std::size_t since_best = 0;
    report.stop_reason = "max_epochs";

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto perm = seeded_permutation(train.size(), detail::epoch_seed(seed, epoch));
        double loss_sum = 0.0;
        for (std::size_t b = 0; b < perm.size(); b += cfg.batch_size) {
            const std::size_t e = std::min(perm.size(), b + cfg.batch_size);
            params.zero_grad();
            std::vector<Tensor<Real>> losses;
            losses.reserve(e - b);
            for (std::size_t k = b; k < e; ++k) losses.push_back(model.loss_on_sample(*train[perm[k]]));
            const Tensor<Real> batch_loss = mean_of<Real>(losses);
            if (!batch_loss.all_finite()) {
                report.stop_reason = "diverged";
                report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
                throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", batch starting " +
                                          std::to_string(b),
                                      report, make_checkpoint(model, seed, nlohmann::json(cfg)));
            }
            for (const auto& l : losses) loss_sum += static_cast<double>(l.item());
            backward(batch_loss);
            opt.step(params);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(train.size());
        const Metrics val = evaluate(model, data.val);
        rec.val_mse = val.mse;
        rec.val_mae = val.mae;
        report.epochs.push_back(rec);
        if (log) {
            *log << "epoch " << epoch << std::setprecision(8) << " train_loss " << rec.train_loss << " val_mse "
                 << rec.val_mse << " val_mae " << rec.val_mae << '\n';
        }
        if (!std::isfinite(val.mse)) {
            report.stop_reason = "diverged";
            throw DivergenceError("non-finite validation MSE at epoch " + std::to_string(epoch), report,
                                  make_checkpoint(model, seed, nlohmann::json(cfg)));
        }
        if (val.mse < report.best_val_mse - cfg.min_delta) {
            report.best_val_mse = val.mse;
            report.best_val_mae = val.mae;
            report.best_epoch = epoch;
            best = params.snapshot();
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            report.stop_reason = "early_stop";
            break;
        }
    }

    params.restore(best);
    if (!data.test.empty()) {
        const Metrics test = evaluate(model, data.test);
        report.test_mse = test.mse;
        report.test_mae = test.mae;
    }
    report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

template <typename Real>
struct TrainResult {
    std::unique_ptr<Model<Real>> model;
    TrainReport report;
};

/// Builds a fresh model from `cfg.model` seeded with `cfg.seed` and fits it.
template <typename Real>
TrainResult<Real> train(const TrainConfig& cfg, const DataSplits& data, std::ostream* log = nullptr) {
    TrainResult<Real> out;
    out.model = std::make_unique<Model<Real>>(cfg.model, cfg.seed);
    out.report = fit(*out.model, cfg, data, cfg.seed, log);
    return out;
}

}  // namespace astgi
