// astgi command-line tool: dataset generation, training, evaluation,
// prediction, gradient checks, ablations, sweeps and baselines.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "astgi/astgi.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace astgi;

namespace {

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    bool f64 = false;
    bool verbose = false;

    std::string data;
    std::string variant;
    std::string checkpoint;
    std::vector<std::string> variants;
    std::string param;
    std::vector<std::size_t> values;
    std::size_t workers = 0;
    bool all_samples = false;
    std::optional<std::size_t> samples;
    std::optional<std::size_t> channels;
};

/// Everything a run needs, resolved from the config file and the flags.
struct Setup {
    json raw = json::object();
    TrainConfig train;
    std::size_t workers = 1;
};

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError("malformed config '" + path + "': " + e.what());
    }
}

Setup resolve(const Options& opt) {
    Setup s;
    if (!opt.config_path.empty()) s.raw = read_json_file(opt.config_path);
    try {
        s.train = s.raw.get<TrainConfig>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    if (opt.seed) {
        s.train.seed = *opt.seed;
        s.train.seeds = {*opt.seed};
    }
    if (opt.f64) s.train.f64 = true;
    s.workers = opt.workers ? opt.workers : s.raw.value("workers", std::size_t{1});
    s.train.validate();
    return s;
}

fs::path prepare_out(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("output directory '" + dir + "' is not writable");
    return fs::path(dir);
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p);
    if (!out) throw IoError("cannot write '" + p.string() + "'");
    out << std::setprecision(17);
    return out;
}

void write_json(const fs::path& p, const json& j) { open_out(p) << j.dump(2) << '\n'; }

SynthConfig synth_config(const Setup& s, const Options& opt) {
    SynthConfig sc = s.raw.value("synth", json::object()).get<SynthConfig>();
    if (opt.samples) sc.samples = *opt.samples;
    if (opt.channels) sc.n_channels = *opt.channels;
    return sc;
}

/// The dataset named by --data or the config, or a synthetic one.
std::pair<Dataset, std::string> load_data(const Setup& s, const Options& opt) {
    const std::string path = !opt.data.empty() ? opt.data : s.raw.value("dataset", std::string{});
    if (!path.empty()) return {load_dataset(path), fs::path(path).stem().string()};
    const auto seed = s.raw.value("synth_seed", s.train.split_seed);
    return {synth_generate(synth_config(s, opt), seed), "synth"};
}

Variant resolve_variant(const Setup& s, const Options& opt) {
    return parse_variant(!opt.variant.empty() ? opt.variant : s.raw.value("variant", std::string("full")));
}

// Predictions in raw units, one line per query.
void write_predictions(std::ostream& out, const Forecaster& f, std::span<const SplitSample> raw,
                       const Normalizer& norm, const std::string& variant = "") {
    for (const auto& s : raw) {
        if (s.queries.empty()) continue;
        const auto pred = f.predict(norm.apply(s));
        for (std::size_t k = 0; k < s.queries.size(); ++k) {
            const auto& o = s.query_obs(k);
            json line = {{"series_id", s.series_id}, {"t", o.t},       {"c", o.c},
                         {"y_true", o.x},            {"y_pred", norm.invert_value(pred[k], o.c)}};
            if (!variant.empty()) line["variant"] = variant;
            out << line.dump() << '\n';
        }
    }
}

void write_loss_curve(std::ostream& out, const TrainReport& r, bool header) {
    if (header) out << "variant,seed,epoch,train_loss,val_mse,val_mae\n";
    for (const auto& e : r.epochs)
        out << r.variant << ',' << r.seed << ',' << e.epoch << ',' << e.train_loss << ',' << e.val_mse << ',' << e.val_mae
            << '\n';
}

json metrics_json(const Metrics& m) { return {{"mse", m.mse}, {"mae", m.mae}, {"count", m.count}}; }

json row_json(const ResultRow& r) {
    json cells = json::array();
    for (const auto& c : r.cells) {
        json cell = {{"seed", c.seed}, {"test_mse", c.test.mse}, {"test_mae", c.test.mae}, {"runtime_s", c.runtime_s}};
        if (!c.ok()) cell["error"] = c.error;
        if (c.report) {
            cell["best_epoch"] = c.report->best_epoch;
            cell["stop_reason"] = c.report->stop_reason;
        }
        cells.push_back(std::move(cell));
    }
    return {{"variant", r.variant},
            {"dataset", r.dataset},
            {"mse_mean", r.summary.mse_mean},
            {"mse_std", r.summary.mse_std},
            {"mae_mean", r.summary.mae_mean},
            {"mae_std", r.summary.mae_std},
            {"runs", r.summary.runs},
            {"runtime_s", r.runtime_s},
            {"cells", std::move(cells)}};
}

std::ostream* train_log(const Options& opt) { return opt.verbose ? &std::clog : nullptr; }

// ---------------------------------------------------------------- commands

json cmd_synth(const Options& opt) {
    const Setup s = resolve(opt);
    const SynthConfig sc = synth_config(s, opt);
    const auto seed = opt.seed ? *opt.seed : s.raw.value("synth_seed", s.train.split_seed);
    const fs::path out = prepare_out(opt.out);
    const Dataset ds = synth_generate(sc, seed);
    save_dataset((out / "dataset.jsonl").string(), ds);
    write_json(out / "synth.json", {{"seed", seed}, {"spec", sc}, {"samples", ds.samples.size()}});
    return {{"dataset", (out / "dataset.jsonl").string()}, {"samples", ds.samples.size()}};
}

json cmd_train(const Options& opt) {
    Setup s = resolve(opt);
    const fs::path out = prepare_out(opt.out);
    const auto [ds, name] = load_data(s, opt);
    const PreparedData data = prepare_data(ds, s.train, name);
    s.train.model.n_channels = ds.manifest.n_channels;
    const Variant v = resolve_variant(s, opt);
    s.train.model.variant = v;
    const CellResult cell = run_cell(v, s.train, data, s.train.seed, train_log(opt));

    json report = {{"command", "train"},
                   {"variant", to_string(v)},
                   {"dataset", name},
                   {"seed", s.train.seed},
                   {"config", s.train},
                   {"test", metrics_json(cell.test)}};
    if (cell.report) {
        report["training"] = *cell.report;
        auto curve = open_out(out / "loss_curve.csv");
        write_loss_curve(curve, *cell.report, true);
    }
    if (cell.checkpoint) save_checkpoint((out / "checkpoint.json").string(), *cell.checkpoint);
    write_json(out / "report.json", report);

    auto metrics = open_out(out / "metrics.csv");
    metrics << "variant,dataset,seed,split,mse,mae\n";
    if (cell.report) {
        metrics << to_string(v) << ',' << name << ',' << cell.seed << ",val," << cell.report->best_val_mse << ','
                << cell.report->best_val_mae << '\n';
    }
    metrics << to_string(v) << ',' << name << ',' << cell.seed << ",test," << cell.test.mse << ',' << cell.test.mae << '\n';

    auto preds = open_out(out / "predictions.jsonl");
    write_predictions(preds, *cell.model, data.raw.test, data.normalizer);
    return {{"test_mse", cell.test.mse}, {"test_mae", cell.test.mae}};
}

std::unique_ptr<Forecaster> restore_any(const Checkpoint& ck) {
    if (ck.numeric_width == 64) return restore_model<double>(ck);
    return restore_model<float>(ck);
}

Checkpoint require_checkpoint(const Options& opt, const Setup& s) {
    const std::string path = !opt.checkpoint.empty() ? opt.checkpoint : s.raw.value("checkpoint", std::string{});
    if (path.empty()) throw ValidationError("a checkpoint is required (--checkpoint)");
    return load_checkpoint(path);
}

json cmd_eval(const Options& opt) {
    const Setup s = resolve(opt);
    const Checkpoint ck = require_checkpoint(opt, s);
    const fs::path out = prepare_out(opt.out);
    const auto [ds, name] = load_data(s, opt);
    TrainConfig split_cfg = s.train;
    if (ck.config.contains("split_seed") && !s.raw.contains("split_seed")) {
        split_cfg.split_seed = ck.config.at("split_seed").get<std::uint64_t>();
    }
    const DataSplits raw = split_tvt(ds.samples, split_cfg.split, split_cfg.split_seed);
    const Normalizer norm = ck.normalizer ? *ck.normalizer : fit_normalizer(raw.train, ds.manifest.n_channels);
    const std::vector<SplitSample>& target = opt.all_samples ? ds.samples : raw.test;
    const auto model = restore_any(ck);
    const Metrics m = evaluate(*model, norm.apply(target));

    write_json(out / "report.json", {{"command", "eval"},
                                     {"variant", model->name()},
                                     {"dataset", name},
                                     {"split", opt.all_samples ? "all" : "test"},
                                     {"checkpoint_seed", ck.seed},
                                     {"metrics", metrics_json(m)}});
    auto metrics = open_out(out / "metrics.csv");
    metrics << "variant,dataset,split,mse,mae,count\n"
            << model->name() << ',' << name << ',' << (opt.all_samples ? "all" : "test") << ',' << m.mse << ',' << m.mae
            << ',' << m.count << '\n';
    auto preds = open_out(out / "predictions.jsonl");
    write_predictions(preds, *model, target, norm);
    return {{"mse", m.mse}, {"mae", m.mae}};
}

json cmd_predict(const Options& opt) {
    const Setup s = resolve(opt);
    const Checkpoint ck = require_checkpoint(opt, s);
    if (!ck.normalizer) throw ValidationError("checkpoint carries no normalizer; predictions need one");
    const fs::path out = prepare_out(opt.out);
    const auto [ds, name] = load_data(s, opt);
    const auto model = restore_any(ck);
    auto preds = open_out(out / "predictions.jsonl");
    write_predictions(preds, *model, ds.samples, *ck.normalizer);
    std::size_t queries = 0;
    for (const auto& smp : ds.samples) queries += smp.queries.size();
    write_json(out / "report.json",
               {{"command", "predict"}, {"variant", model->name()}, {"dataset", name}, {"queries", queries}});
    return {{"queries", queries}};
}

json cmd_gradcheck(const Options& opt) {
    const Setup s = resolve(opt);
    const fs::path out = prepare_out(opt.out);
    ModelConfig mc;
    if (s.raw.contains("model")) {
        mc = s.train.model;
    } else {
        mc.n_channels = 3;
        mc.d_c = mc.d_t = 4;
        mc.d_model = 8;
        mc.k = 3;
        mc.layers = 2;
    }
    const std::uint64_t seed = s.train.seed;
    const std::size_t n_hist = s.raw.value("history_points", std::size_t{10});
    const std::size_t n_query = s.raw.value("query_points", std::size_t{3});
    const double h = s.raw.value("h", 1e-6), tol = s.raw.value("tol", 1e-4);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> ts(n_hist + n_query);
    for (auto& t : ts) t = unit(rng);
    std::sort(ts.begin(), ts.end());
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Observation> obs;
    for (double t : ts) obs.push_back({t, gauss(rng), static_cast<std::size_t>(rng() % mc.n_channels)});
    SplitSample sample = make_sample("gradcheck", obs, n_query ? 0.5 * (ts[n_hist - 1] + ts[n_hist]) : ts.back());

    // Check at a generic parameter point with targets close to the current
    // predictions. Zero biases put ReLU inputs on the kink at initialization.
    Model<double> model(mc, seed);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (const auto& g : model.params()) {
        Tensor<double> t = g.tensor;
        for (auto& v : t.mutable_values()) v = u(rng);
    }
    const auto pred = model.predict(sample);
    for (std::size_t k = 0; k < pred.size(); ++k)
        sample.observations[sample.queries[k]].x = pred[k] + 1e-3 * static_cast<double>(k + 1) * (k % 2 ? -1.0 : 1.0);
    const auto rep = finite_diff_check(model.params(), [&] { return model.loss_on_sample(sample); }, h, tol);

    auto csv = open_out(out / "gradcheck.csv");
    csv << "group,elements,max_rel_error,max_abs_error,passed\n";
    json groups = json::array();
    for (const auto& e : rep.entries) {
        csv << e.name << ',' << e.elements << ',' << e.max_rel_error << ',' << e.max_abs_error << ','
            << (e.passed ? 1 : 0) << '\n';
        groups.push_back({{"group", e.name},
                          {"elements", e.elements},
                          {"max_rel_error", e.max_rel_error},
                          {"max_abs_error", e.max_abs_error},
                          {"passed", e.passed}});
    }
    write_json(out / "report.json", {{"command", "gradcheck"},
                                     {"h", h},
                                     {"tol", tol},
                                     {"model", mc},
                                     {"passed", rep.passed()},
                                     {"max_rel_error", rep.max_rel_error()},
                                     {"groups", groups}});
    if (!rep.passed()) throw Error("gradcheck_failed", "gradient check failed: max relative error " + std::to_string(rep.max_rel_error()));
    return {{"max_rel_error", rep.max_rel_error()}, {"groups", rep.entries.size()}};
}

void write_table(const fs::path& out, const ResultTable& table, const std::string& command, const json& extra) {
    {
        auto csv = open_out(out / "metrics.csv");
        table.write_csv(csv);
    }
    {
        auto csv = open_out(out / "seeds.csv");
        table.write_seed_csv(csv);
    }
    auto curves = open_out(out / "loss_curves.csv");
    bool header = true;
    for (const auto& r : table.rows)
        for (const auto& c : r.cells)
            if (c.report) {
                write_loss_curve(curves, *c.report, header);
                header = false;
            }
    json rows = json::array();
    for (const auto& r : table.rows) rows.push_back(row_json(r));
    json report = {{"command", command}, {"rows", rows}};
    report.update(extra);
    write_json(out / "report.json", report);
}

json cmd_ablate(const Options& opt) {
    Setup s = resolve(opt);
    const fs::path out = prepare_out(opt.out);
    const auto [ds, name] = load_data(s, opt);
    const PreparedData data = prepare_data(ds, s.train, name);
    s.train.model.n_channels = ds.manifest.n_channels;
    std::vector<std::string> tags = opt.variants;
    if (tags.empty()) tags = s.raw.value("variants", std::vector<std::string>{});
    std::vector<Variant> variants;
    for (const auto& t : tags) variants.push_back(parse_variant(t));
    if (variants.empty()) variants.assign(kAllVariants.begin(), kAllVariants.end());

    const ResultTable table = ablate(variants, s.train, data, s.train.seeds, train_log(opt), s.workers);
    write_table(out, table, "ablate", {{"dataset", name}, {"config", s.train}});
    json summary = json::object();
    for (const auto& r : table.rows) summary[r.variant] = r.summary.mse_mean;
    return {{"mse_mean", summary}};
}

json cmd_sweep(const Options& opt) {
    Setup s = resolve(opt);
    const fs::path out = prepare_out(opt.out);
    const auto [ds, name] = load_data(s, opt);
    const PreparedData data = prepare_data(ds, s.train, name);
    s.train.model.n_channels = ds.manifest.n_channels;
    const json spec = s.raw.value("sweep", json::object());
    const SweepParam param = parse_sweep_param(!opt.param.empty() ? opt.param : spec.value("param", std::string("K")));
    std::vector<std::size_t> values = opt.values;
    if (values.empty()) values = spec.value("values", default_grid(param));

    TrainConfig base = s.train;
    base.model.variant = resolve_variant(s, opt);
    const SweepResult r = sweep(param, values, base, data, s.train.seeds, train_log(opt), s.workers);
    {
        auto csv = open_out(out / "sweep.csv");
        r.write_csv(csv);
    }
    write_table(out, r.table, "sweep",
                {{"dataset", name}, {"param", to_string(param)}, {"values", values}, {"config", base}});
    return {{"param", to_string(param)}, {"values", values}};
}

json cmd_baselines(const Options& opt) {
    const Setup s = resolve(opt);
    const fs::path out = prepare_out(opt.out);
    const auto [ds, name] = load_data(s, opt);
    const PreparedData data = prepare_data(ds, s.train, name);
    const std::vector<Variant> variants = {Variant::baseline_mean, Variant::baseline_locf};
    const std::vector<std::uint64_t> seeds = {s.train.seed};  // baselines have no randomness
    const ResultTable table = ablate(variants, s.train, data, seeds);
    write_table(out, table, "baselines", {{"dataset", name}});
    auto preds = open_out(out / "predictions.jsonl");
    write_predictions(preds, MeanBaseline{}, data.raw.test, data.normalizer, "baseline_mean");
    write_predictions(preds, LocfBaseline{}, data.raw.test, data.normalizer, "baseline_locf");
    return {{"baseline_mean", table.rows[0].summary.mse_mean}, {"baseline_locf", table.rows[1].summary.mse_mean}};
}

int fail(const std::string& kind, const std::string& message, int code) {
    std::cerr << json{{"status", "error"}, {"error", {{"kind", kind}, {"message", message}}}}.dump() << std::endl;
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"astgi: forecasting for irregular multivariate time series"};
    app.require_subcommand(1);
    app.fallthrough();
    Options opt;
    app.add_option("--config", opt.config_path, "JSON configuration file");
    app.add_option("--seed", opt.seed, "Run seed (replaces the seed list)");
    app.add_option("--out", opt.out, "Output directory")->capture_default_str();
    app.add_flag("--f64", opt.f64, "64-bit arithmetic");
    app.add_flag("-v,--verbose", opt.verbose, "Per-epoch training log on stderr");
    app.add_option("--workers", opt.workers, "Concurrent experiment cells");

    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
    synth->add_option("--samples", opt.samples, "Number of series");
    synth->add_option("--channels", opt.channels, "Number of channels");

    auto add_data = [&](CLI::App* c) {
        c->add_option("--data", opt.data, "Dataset file (JSON lines); synthetic when omitted");
        c->add_option("--samples", opt.samples, "Synthetic series count");
        c->add_option("--channels", opt.channels, "Synthetic channel count");
    };
    auto* train = app.add_subcommand("train", "Train one variant and evaluate it on the test split");
    add_data(train);
    train->add_option("--variant", opt.variant, "Variant tag");
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
    add_data(eval);
    eval->add_option("--checkpoint", opt.checkpoint, "Checkpoint file");
    eval->add_flag("--all", opt.all_samples, "Evaluate every sample instead of the test split");
    auto* predict = app.add_subcommand("predict", "Predict every query of a dataset from a checkpoint");
    add_data(predict);
    predict->add_option("--checkpoint", opt.checkpoint, "Checkpoint file");
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient check on a small model");
    auto* abl = app.add_subcommand("ablate", "Train every variant over the seed list");
    add_data(abl);
    abl->add_option("--variants", opt.variants, "Variant tags")->delimiter(',');
    auto* swp = app.add_subcommand("sweep", "Sensitivity sweep over one hyperparameter");
    add_data(swp);
    swp->add_option("--param", opt.param, "K, L, d_model or d_c");
    swp->add_option("--values", opt.values, "Grid values")->delimiter(',');
    swp->add_option("--variant", opt.variant, "Variant tag");
    auto* base = app.add_subcommand("baselines", "Evaluate the mean and LOCF baselines");
    add_data(base);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage_error", e.what(), 2);
    }

    try {
        json result;
        std::string command;
        if (*synth) command = "synth", result = cmd_synth(opt);
        else if (*train) command = "train", result = cmd_train(opt);
        else if (*eval) command = "eval", result = cmd_eval(opt);
        else if (*predict) command = "predict", result = cmd_predict(opt);
        else if (*gradcheck) command = "gradcheck", result = cmd_gradcheck(opt);
        else if (*abl) command = "ablate", result = cmd_ablate(opt);
        else if (*swp) command = "sweep", result = cmd_sweep(opt);
        else if (*base) command = "baselines", result = cmd_baselines(opt);
        std::cout << json{{"status", "ok"}, {"command", command}, {"out", opt.out}, {"result", result}}.dump() << std::endl;
        return 0;
    } catch (const ValidationError& e) {
        return fail(e.kind(), e.what(), 2);
    } catch (const ParseError& e) {
        return fail(e.kind(), e.what(), 2);
    } catch (const Error& e) {
        return fail(e.kind(), e.what(), 1);
    } catch (const json::exception& e) {
        return fail("json_error", e.what(), 2);
    } catch (const std::exception& e) {
        return fail("internal_error", e.what(), 1);
    }
}
