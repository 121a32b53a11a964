// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// when any scored criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "astgi/astgi.hpp"
#include "support.hpp"

using namespace astgi;
using namespace astgi::testing;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// 1. Full-model gradient check on the tiny configuration. Parameters are
// drawn at a generic point (zero-initialized biases put ReLU inputs exactly on
// the kink for points without neighbors) and the query targets sit 1e-3 away
// from the predictions, so that finite-difference rounding noise (about one
// ulp of the loss over 2h) stays below the 1e-8 denominator floor.
Outcome gradient_oracle() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(2024);
    SplitSample s = random_sample(rng, 10, 3, 3);
    Model<double> model(tiny_config(), 2024);
    set_params_random(model.params(), 2024, 0.5);
    const auto pred = model.predict(s);
    for (std::size_t k = 0; k < pred.size(); ++k)
        s.observations[s.queries[k]].x = pred[k] + 1e-3 * static_cast<double>(k + 1) * (k % 2 ? -1.0 : 1.0);
    const auto report = finite_diff_check(model.params(), [&] { return model.loss_on_sample(s); }, 1e-6, 1e-4);
    const double elapsed = seconds_since(t0);

    std::string worst;
    for (const auto& e : report.entries)
        if (!e.passed) worst += " " + e.name + "=" + fmt("%.2e", e.max_rel_error);
    const std::vector<std::string> required = {
        "encoder.channel_embedding",  "encoder.time_mlp",           "encoder.value_mlp",
        "propagation.layer0.score",   "propagation.layer0.message", "propagation.layer0.update",
        "propagation.layer0.norm",    "propagation.layer1.score",   "propagation.layer1.message",
        "propagation.layer1.update",  "propagation.layer1.norm",    "predictor.query_score",
        "predictor.value",            "predictor.head"};
    bool covered = true;
    for (const auto& r : required) {
        bool found = false;
        for (const auto& e : report.entries) found = found || e.name.rfind(r, 0) == 0;
        covered = covered && found;
    }
    Outcome o;
    o.pass = report.passed() && covered && elapsed < 60.0;
    o.detail = std::to_string(report.entries.size()) + " groups, max rel err " + fmt("%.3e", report.max_rel_error()) +
               ", " + fmt("%.2f", elapsed) + " s" + (covered ? "" : ", missing groups") +
               (worst.empty() ? "" : ", failing:" + worst);
    return o;
}

// 2. Hand-sized instance against the engine-free oracle.
Outcome forward_oracle() {
    ModelConfig cfg = tiny_config();
    Model<double> model(cfg, 7);
    set_params_pattern(model.params(), 0.25);
    const SplitSample s = make_sample("hand", {{0.1, 0.5, 0}, {0.4, -1.2, 1}, {0.7, 0.8, 2}, {0.9, 0.0, 1}}, 0.8);
    const QueryPoint q{0.9, 1};
    const double engine = model.predict_query(s, q);
    const double oracle = oracle::predict(model, oracle::history(model, s), q.t, q.c);
    Outcome o;
    const double err = std::abs(engine - oracle);
    o.pass = err < 1e-10;
    o.detail = "engine " + fmt("%.15g", engine) + ", oracle " + fmt("%.15g", oracle) + ", abs err " + fmt("%.2e", err);
    return o;
}

std::vector<double> feature_row(const Tensor<double>& f, std::size_t i) {
    return {f.values().begin() + static_cast<std::ptrdiff_t>(i * f.cols()),
            f.values().begin() + static_cast<std::ptrdiff_t>((i + 1) * f.cols())};
}

// 3. Future values never reach past features.
Outcome causal_invariance() {
    ModelConfig cfg = tiny_config();
    cfg.d_model = 16;
    cfg.k = 5;
    cfg.layers = 3;
    Model<double> model(cfg, 11);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> gauss(0.0, 3.0);
    std::size_t checked = 0, violations = 0;
    for (int trial = 0; trial < 100; ++trial) {
        SplitSample s = random_sample(rng, 8 + rng() % 25, 0, 3, "c" + std::to_string(trial));
        const std::size_t n = s.history.size();
        const double horizon = s.history_obs(rng() % n).t;
        NoGradGuard no_grad;
        const auto before = model.forward_history(s);
        SplitSample p = s;
        for (auto& ob : p.observations)
            if (ob.t > horizon) ob.x += gauss(rng);
        const auto after = model.forward_history(p);
        for (std::size_t i = 0; i < n; ++i) {
            if (s.history_obs(i).t > horizon) continue;
            ++checked;
            if (feature_row(before.cloud.features, i) != feature_row(after.cloud.features, i)) ++violations;
        }
    }
    return {violations == 0 && checked > 0,
            std::to_string(checked) + " points checked over 100 samples, " + std::to_string(violations) + " differ"};
}

// 4. Input order does not matter.
Outcome permutation_invariance() {
    ModelConfig cfg = tiny_config();
    cfg.d_model = 16;
    cfg.k = 4;
    Model<double> model(cfg, 13);
    std::mt19937_64 rng(4);
    std::size_t mismatches = 0, queries = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const SplitSample s = random_sample(rng, 10 + rng() % 20, 1 + rng() % 6, 3);
        std::vector<Observation> shuffled = s.observations;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        const SplitSample p = make_sample(s.series_id, shuffled, s.split_time);
        const auto a = model.predict(s);
        const auto b = model.predict(p);
        queries += a.size();
        if (a != b) ++mismatches;
    }
    return {mismatches == 0, std::to_string(queries) + " queries over 50 shuffled samples, " +
                                 std::to_string(mismatches) + " samples differ"};
}

// 5. Weight normalization and neighborhood structure throughout a trained run.
Outcome weight_sanity() {
    SynthConfig sc = small_synth(40);
    const Dataset ds = synth_generate(sc, 5);
    TrainConfig cfg;
    cfg.f64 = true;
    cfg.max_epochs = 3;
    cfg.model.d_model = 16;
    cfg.model.k = 5;
    const PreparedData data = prepare_data(ds, cfg, "synth", nullptr);
    const CellResult cell = run_cell(Variant::full, cfg, data, 2024);
    const auto& model = dynamic_cast<const Model<double>&>(*cell.model);
    const std::size_t K = model.config().k;

    double worst = 0.0;
    std::size_t sets = 0, bad_struct = 0;
    auto check_segments = [&](const Tensor<double>& w, const EdgeList& e) {
        for (std::size_t i = 0; i < e.segments(); ++i) {
            if (e.degree(i) == 0) continue;
            double total = 0;
            for (std::size_t k = e.offsets[i]; k < e.offsets[i + 1]; ++k) total += w[k];
            worst = std::max(worst, std::abs(total - 1.0));
            ++sets;
        }
    };
    for (const auto* split : {&data.normalized.train, &data.normalized.val, &data.normalized.test}) {
        for (const auto& s : *split) {
            ForwardTrace<double> trace;
            NoGradGuard no_grad;
            (void)model.loss_on_sample(s, &trace);
            const auto& nb = trace.history;
            const std::size_t n = s.history.size();
            for (std::size_t i = 0; i < n; ++i) {
                if (nb.candidates[i].size() != std::min(K, n - 1)) ++bad_struct;
                for (std::size_t j : nb.valid[i])
                    if (j == i || s.history_obs(j).t > s.history_obs(i).t) ++bad_struct;
            }
            const EdgeList e = nb.edges();
            for (const auto& layer : trace.propagation.layers) check_segments(layer.weights, e);
            check_segments(trace.query.weights, trace.query.edges);
        }
    }
    return {worst <= 1e-6 && bad_struct == 0 && sets > 0,
            std::to_string(sets) + " weight sets, max |sum-1| " + fmt("%.2e", worst) + ", " +
                std::to_string(bad_struct) + " structure violations"};
}

// 6. A handful of samples can be fitted almost exactly.
Outcome overfit_floor() {
    const auto t0 = Clock::now();
    SynthConfig sc;
    sc.samples = 5;
    const Dataset ds = synth_generate(sc, 2024);
    TrainConfig cfg;  // lr 1e-3, max_epochs 300
    cfg.batch_size = 1;
    cfg.patience = cfg.max_epochs;
    cfg.model.n_channels = sc.n_channels;
    const Normalizer norm = fit_normalizer(ds.samples, sc.n_channels, nullptr);
    DataSplits splits;
    splits.train = norm.apply(ds.samples);
    splits.val = splits.train;
    Model<float> model(cfg.model, cfg.seed);
    const TrainReport r = fit(model, cfg, splits, cfg.seed);
    double best = r.epochs.front().train_loss;
    std::size_t at = 1;
    for (const auto& e : r.epochs)
        if (e.train_loss < best) {
            best = e.train_loss;
            at = e.epoch;
        }
    return {best < 0.01, "min train loss " + fmt("%.5f", best) + " at epoch " + std::to_string(at) + " of " +
                             std::to_string(r.epochs.size()) + ", " + fmt("%.1f", seconds_since(t0)) + " s"};
}

// 7. Full model beats the mean-pooling ablation and both baselines.
Outcome directional() {
    const auto t0 = Clock::now();
    SynthConfig sc;
    sc.n_channels = 4;
    sc.samples = 200;
    sc.cross_weight = 0.5;
    sc.noise = 0.05;
    const Dataset ds = synth_generate(sc, 2024);
    TrainConfig cfg;
    cfg.model.d_model = 32;
    const PreparedData data = prepare_data(ds, cfg, "synth", nullptr);
    const std::vector<Variant> variants = {Variant::full, Variant::mean_pooling, Variant::baseline_locf,
                                           Variant::baseline_mean};
    const ResultTable table = ablate(variants, cfg, data, protocol::kSeeds);
    const double full = table.find("full")->summary.mse_mean;
    const double pool = table.find("mean_pooling")->summary.mse_mean;
    const double locf = table.find("baseline_locf")->summary.mse_mean;
    const double mean = table.find("baseline_mean")->summary.mse_mean;
    bool all_ok = true;
    for (const auto& row : table.rows)
        for (const auto& c : row.cells) all_ok = all_ok && c.ok();
    const double elapsed = seconds_since(t0);
    const bool pass = all_ok && full < pool && full <= 0.8 * locf && full <= 0.8 * mean && elapsed < 1800.0;
    return {pass, "test MSE full " + fmt("%.4f", full) + ", mean_pooling " + fmt("%.4f", pool) + ", locf " +
                      fmt("%.4f", locf) + ", channel mean " + fmt("%.4f", mean) + ", " + fmt("%.0f", elapsed) + " s"};
}

// 8. Defaults echo the evaluation protocol.
Outcome protocol_echo() {
    const nlohmann::json j = TrainConfig{};
    const bool pass = j.at("max_epochs") == 300 && j.at("patience") == 5 &&
                      j.at("split") == nlohmann::json::array({0.8, 0.1, 0.1}) &&
                      j.at("seeds") == nlohmann::json::array({2024, 2025, 2026, 2027, 2028}) &&
                      j.at("optimizer") == "adamw";
    return {pass, "max_epochs " + j.at("max_epochs").dump() + ", patience " + j.at("patience").dump() + ", split " +
                      j.at("split").dump() + ", seeds " + j.at("seeds").dump() + ", optimizer " +
                      j.at("optimizer").dump()};
}

// 9. Identical config and seed give byte-identical metric fields.
Outcome determinism() {
    auto run = [] {
        const Dataset ds = synth_generate(small_synth(30), 9);
        TrainConfig cfg;
        cfg.f64 = true;
        cfg.max_epochs = 4;
        cfg.model.d_model = 16;
        const PreparedData data = prepare_data(ds, cfg, "synth", nullptr);
        nlohmann::json j = *run_cell(Variant::full, cfg, data, 2026).report;
        j.erase("wall_time_s");
        return j.dump();
    };
    const std::string a = run(), b = run();
    return {a == b, std::to_string(a.size()) + " bytes compared, " + (a == b ? "identical" : "different")};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"1 gradient oracle", gradient_oracle},
        {"2 forward oracle", forward_oracle},
        {"3 causal invariance", causal_invariance},
        {"4 permutation invariance", permutation_invariance},
        {"5 softmax/weight sanity", weight_sanity},
        {"6 overfit floor", overfit_floor},
        {"7 directional synthetic match", directional},
        {"8 protocol echo", protocol_echo},
        {"9 determinism", determinism},
    };
    std::string only = argc > 1 ? argv[1] : "";
    int failures = 0;
    for (const auto& [name, fn] : criteria) {
        if (!only.empty() && std::strncmp(name, only.c_str(), only.size()) != 0) continue;
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failures;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << name << ": " << o.detail << std::endl;
    }
    if (only.empty() || only == "10") {
        std::cout << "SKIP  criterion 10 public-subset stretch (unscored): no public dataset file bundled" << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
