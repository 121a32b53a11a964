#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "astgi/data/normalizer.hpp"
#include "astgi/data/sample.hpp"
#include "astgi/data/split.hpp"
#include "astgi/harness/baselines.hpp"
#include "astgi/model/checkpoint.hpp"
#include "astgi/model/model.hpp"
#include "astgi/train/config.hpp"
#include "astgi/train/metrics.hpp"
#include "astgi/train/trainer.hpp"

namespace astgi {

/// A dataset split by `split_seed` and normalized with statistics from the
/// training history.
struct PreparedData {
    std::string name;
    DatasetManifest manifest;
    Normalizer normalizer;
    DataSplits raw;
    DataSplits normalized;
};

inline PreparedData prepare_data(const Dataset& ds, const TrainConfig& cfg, std::string name,
                                 std::ostream* warnings = &std::clog) {
    PreparedData p;
    p.name = std::move(name);
    p.manifest = ds.manifest;
    p.raw = split_tvt(ds.samples, cfg.split, cfg.split_seed);
    p.normalizer = fit_normalizer(p.raw.train, ds.manifest.n_channels, warnings);
    p.normalized.train = p.normalizer.apply(p.raw.train);
    p.normalized.val = p.normalizer.apply(p.raw.val);
    p.normalized.test = p.normalizer.apply(p.raw.test);
    return p;
}

/// Constructs the (untrained) forecaster for a variant tag. Learned variants
/// share one model class and differ only in configuration.
inline std::unique_ptr<Forecaster> build_variant(Variant tag, ModelConfig cfg, std::uint64_t seed, bool f64) {
    switch (tag) {
        case Variant::baseline_mean: return std::make_unique<MeanBaseline>();
        case Variant::baseline_locf: return std::make_unique<LocfBaseline>();
        default: break;
    }
    cfg.variant = tag;
    if (f64) return std::make_unique<Model<double>>(cfg, seed);
    return std::make_unique<Model<float>>(cfg, seed);
}

inline std::unique_ptr<Forecaster> build_variant(const std::string& tag, const ModelConfig& cfg, std::uint64_t seed,
                                                 bool f64) {
    return build_variant(parse_variant(tag), cfg, seed, f64);
}

struct CellResult {
    Variant variant = Variant::full;
    std::uint64_t seed = 0;
    Metrics test;
    std::optional<TrainReport> report;  // learned variants only
    std::optional<Checkpoint> checkpoint;
    std::shared_ptr<Forecaster> model;
    double runtime_s = 0.0;
    std::string error;  // non-empty when the cell failed

    bool ok() const { return error.empty(); }
};

namespace detail {

template <typename Real>
void fit_cell(CellResult& cell, Forecaster& f, const TrainConfig& cfg, const PreparedData& data, std::ostream* log) {
    auto& model = dynamic_cast<Model<Real>&>(f);
    cell.report = fit(model, cfg, data.normalized, cell.seed, log);
    cell.test = {cell.report->test_mse, cell.report->test_mae, 0};
    nlohmann::json echo = cfg;
    echo["seed"] = cell.seed;
    cell.checkpoint = make_checkpoint(model, cell.seed, std::move(echo), data.normalizer);
}

}  // namespace detail

/// Trains (learned variants) or directly evaluates (baselines) one
/// (variant, seed) cell through the shared trainer path.
inline CellResult run_cell(Variant variant, TrainConfig cfg, const PreparedData& data, std::uint64_t seed,
                           std::ostream* log = nullptr) {
    const auto start = std::chrono::steady_clock::now();
    CellResult cell;
    cell.variant = variant;
    cell.seed = seed;
    cfg.seed = seed;
    cfg.model.n_channels = data.manifest.n_channels;
    cfg.model.variant = variant;
    std::shared_ptr<Forecaster> f = build_variant(variant, cfg.model, seed, cfg.f64);
    if (is_baseline(variant)) {
        cell.test = evaluate(*f, data.normalized.test);
    } else if (cfg.f64) {
        detail::fit_cell<double>(cell, *f, cfg, data, log);
    } else {
        detail::fit_cell<float>(cell, *f, cfg, data, log);
    }
    cell.model = std::move(f);
    cell.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return cell;
}

/// Runs independent jobs on up to `workers` threads; results keep job order.
inline std::vector<CellResult> run_jobs(std::vector<std::function<CellResult()>> jobs, std::size_t workers = 1) {
    std::vector<CellResult> results(jobs.size());
    auto run_one = [&](std::size_t i) {
        try {
            results[i] = jobs[i]();
        } catch (const std::exception& e) {
            results[i].error = e.what();
        }
    };
    workers = std::max<std::size_t>(1, std::min(workers, jobs.size()));
    if (workers == 1) {
        for (std::size_t i = 0; i < jobs.size(); ++i) run_one(i);
        return results;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < jobs.size(); i = next++) run_one(i);
        });
    }
    for (auto& t : pool) t.join();
    return results;
}

struct ResultRow {
    std::string variant;
    std::string dataset;
    SeedSummary summary;
    double runtime_s = 0.0;
    std::vector<CellResult> cells;
};

struct ResultTable {
    std::vector<ResultRow> rows;

    const ResultRow* find(const std::string& variant) const {
        for (const auto& r : rows)
            if (r.variant == variant) return &r;
        return nullptr;
    }

    void write_csv(std::ostream& out) const {
        out << "variant,dataset,mse_mean,mse_std,mae_mean,mae_std,runtime_s,runs\n";
        out << std::setprecision(10);
        for (const auto& r : rows) {
            out << r.variant << ',' << r.dataset << ',' << r.summary.mse_mean << ',' << r.summary.mse_std << ','
                << r.summary.mae_mean << ',' << r.summary.mae_std << ',' << r.runtime_s << ',' << r.summary.runs << '\n';
        }
    }

    void write_seed_csv(std::ostream& out) const {
        out << "variant,dataset,seed,mse,mae,runtime_s,error\n";
        out << std::setprecision(10);
        for (const auto& r : rows) {
            for (const auto& c : r.cells) {
                out << r.variant << ',' << r.dataset << ',' << c.seed << ',' << c.test.mse << ',' << c.test.mae << ','
                    << c.runtime_s << ',' << c.error << '\n';
            }
        }
    }
};

inline ResultRow summarize(std::string label, const std::string& dataset, std::vector<CellResult> cells) {
    ResultRow row;
    row.variant = std::move(label);
    row.dataset = dataset;
    std::vector<Metrics> ok;
    for (const auto& c : cells) {
        row.runtime_s += c.runtime_s;
        if (c.ok()) ok.push_back(c.test);
    }
    if (!ok.empty()) row.summary = aggregate_seeds(ok, nullptr);
    row.cells = std::move(cells);
    return row;
}

/// Every variant in `variants` across every seed, one table row per variant.
inline ResultTable ablate(std::span<const Variant> variants, const TrainConfig& cfg, const PreparedData& data,
                          std::span<const std::uint64_t> seeds, std::ostream* log = nullptr, std::size_t workers = 1) {
    std::vector<std::function<CellResult()>> jobs;
    for (Variant v : variants) {
        for (std::uint64_t seed : seeds) {
            std::ostream* cell_log = workers > 1 ? nullptr : log;
            jobs.push_back([v, seed, &cfg, &data, cell_log] {
                if (cell_log) *cell_log << "# variant " << to_string(v) << " seed " << seed << '\n';
                return run_cell(v, cfg, data, seed, cell_log);
            });
        }
    }
    auto results = run_jobs(std::move(jobs), workers);
    ResultTable table;
    for (std::size_t vi = 0; vi < variants.size(); ++vi) {
        std::vector<CellResult> cells(std::make_move_iterator(results.begin() + vi * seeds.size()),
                                      std::make_move_iterator(results.begin() + (vi + 1) * seeds.size()));
        table.rows.push_back(summarize(std::string(to_string(variants[vi])), data.name, std::move(cells)));
    }
    return table;
}

enum class SweepParam { k, layers, d_model, d_c };

inline SweepParam parse_sweep_param(const std::string& name) {
    if (name == "K" || name == "k") return SweepParam::k;
    if (name == "L" || name == "layers") return SweepParam::layers;
    if (name == "d_model") return SweepParam::d_model;
    if (name == "d_c") return SweepParam::d_c;
    throw ValidationError("unknown sweep parameter '" + name + "' (expected K, L, d_model or d_c)");
}

inline std::string to_string(SweepParam p) {
    switch (p) {
        case SweepParam::k: return "K";
        case SweepParam::layers: return "L";
        case SweepParam::d_model: return "d_model";
        case SweepParam::d_c: return "d_c";
    }
    return "?";
}

inline std::vector<std::size_t> default_grid(SweepParam p) {
    switch (p) {
        case SweepParam::k: return {2, 4, 8, 16, 32};
        case SweepParam::layers: return {1, 2, 3, 4};
        case SweepParam::d_model: return {16, 32, 64, 128};
        case SweepParam::d_c: return {2, 4, 8, 16};
    }
    return {};
}

inline void apply_sweep_value(ModelConfig& m, SweepParam p, std::size_t value) {
    switch (p) {
        case SweepParam::k: m.k = value; break;
        case SweepParam::layers: m.layers = value; break;
        case SweepParam::d_model: m.d_model = value; break;
        case SweepParam::d_c: m.d_c = value; break;
    }
}

struct SweepResult {
    SweepParam param = SweepParam::k;
    std::vector<std::size_t> values;
    ResultTable table;  // one row per value, labelled "<param>=<value>"

    /// Plot data, one line per (value, seed).
    void write_csv(std::ostream& out) const {
        out << "param,value,seed,mse,mae\n";
        out << std::setprecision(10);
        for (std::size_t i = 0; i < values.size(); ++i) {
            for (const auto& c : table.rows[i].cells) {
                out << to_string(param) << ',' << values[i] << ',' << c.seed << ',';
                if (c.ok()) {
                    out << c.test.mse << ',' << c.test.mae << '\n';
                } else {
                    out << "nan,nan\n";
                }
            }
        }
    }
};

/// Trains the full model for every value of one hyperparameter and every
/// seed. A failing cell is recorded with its error and the sweep continues.
inline SweepResult sweep(SweepParam param, std::span<const std::size_t> values, const TrainConfig& base,
                         const PreparedData& data, std::span<const std::uint64_t> seeds, std::ostream* log = nullptr,
                         std::size_t workers = 1) {
    if (values.empty()) throw ValidationError("sweep: no values");
    std::vector<TrainConfig> configs;
    for (std::size_t v : values) {
        TrainConfig cfg = base;
        apply_sweep_value(cfg.model, param, v);
        configs.push_back(cfg);
    }
    std::vector<std::function<CellResult()>> jobs;
    for (std::size_t i = 0; i < values.size(); ++i) {
        for (std::uint64_t seed : seeds) {
            std::ostream* cell_log = workers > 1 ? nullptr : log;
            const TrainConfig* cfg = &configs[i];
            const std::size_t value = values[i];
            jobs.push_back([cfg, seed, value, param, &data, cell_log] {
                if (cell_log) *cell_log << "# " << to_string(param) << '=' << value << " seed " << seed << '\n';
                return run_cell(cfg->model.variant, *cfg, data, seed, cell_log);
            });
        }
    }
    auto results = run_jobs(std::move(jobs), workers);
    SweepResult out;
    out.param = param;
    out.values.assign(values.begin(), values.end());
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::vector<CellResult> cells(std::make_move_iterator(results.begin() + i * seeds.size()),
                                      std::make_move_iterator(results.begin() + (i + 1) * seeds.size()));
        out.table.rows.push_back(
            summarize(to_string(param) + "=" + std::to_string(values[i]), data.name, std::move(cells)));
    }
    return out;
}

}  // namespace astgi
