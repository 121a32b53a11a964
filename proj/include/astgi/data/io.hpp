#pragma once

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "astgi/data/sample.hpp"
#include "astgi/errors.hpp"

// Dataset files are UTF-8 JSON lines. The first line is the manifest
//   {"n_channels": int, "time_unit": string, "channel_names": [string]?}
// and every following line is one series
//   {"series_id": string, "t_s": number, "obs": [[t, x, c], ...]}.

namespace astgi {

namespace detail {

inline double json_number(const nlohmann::json& v, std::size_t line, const char* what) {
    if (!v.is_number()) throw ParseError(line, std::string(what) + " must be a number");
    return v.get<double>();
}

inline SplitSample parse_sample_line(const std::string& text, std::size_t line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(line, e.what());
    }
    if (!j.is_object()) throw ParseError(line, "expected a JSON object");
    if (!j.contains("series_id") || !j["series_id"].is_string()) throw ParseError(line, "missing string 'series_id'");
    if (!j.contains("t_s")) throw ParseError(line, "missing 't_s'");
    if (!j.contains("obs") || !j["obs"].is_array()) throw ParseError(line, "missing array 'obs'");
    const double t_s = json_number(j["t_s"], line, "'t_s'");

    std::vector<Observation> obs;
    obs.reserve(j["obs"].size());
    for (const auto& o : j["obs"]) {
        if (!o.is_array() || o.size() != 3) throw ParseError(line, "each observation must be [t, x, c]");
        Observation ob;
        ob.t = json_number(o[0], line, "timestamp");
        ob.x = json_number(o[1], line, "value");
        if (o[2].is_number_unsigned()) {
            ob.c = o[2].get<std::size_t>();
        } else if (o[2].is_number_integer()) {
            throw ValidationError("line " + std::to_string(line) + ": negative channel index");
        } else {
            throw ParseError(line, "channel index must be an integer");
        }
        obs.push_back(ob);
    }
    return make_sample(j["series_id"].get<std::string>(), std::move(obs), t_s);
}

}  // namespace detail

inline Dataset read_dataset(std::istream& in) {
    Dataset ds;
    std::string text;
    std::size_t line = 0;
    bool have_manifest = false;
    while (std::getline(in, text)) {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (!have_manifest) {
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(text);
            } catch (const nlohmann::json::parse_error& e) {
                throw ParseError(line, e.what());
            }
            if (!j.is_object() || !j.contains("n_channels") || !j["n_channels"].is_number_unsigned()) {
                throw ParseError(line, "first line must be a manifest with integer 'n_channels'");
            }
            ds.manifest.n_channels = j["n_channels"].get<std::size_t>();
            if (ds.manifest.n_channels == 0) throw ValidationError("manifest: n_channels must be >= 1");
            ds.manifest.time_unit = j.value("time_unit", std::string{});
            if (j.contains("channel_names")) {
                ds.manifest.channel_names = j["channel_names"].get<std::vector<std::string>>();
            }
            have_manifest = true;
            continue;
        }
        SplitSample s = detail::parse_sample_line(text, line);
        try {
            validate_sample(s, ds.manifest.n_channels);
        } catch (const ValidationError& e) {
            throw ValidationError("line " + std::to_string(line) + ": " + e.what());
        }
        ds.samples.push_back(std::move(s));
    }
    if (!have_manifest) throw ParseError(line, "missing manifest line");
    ds.manifest.sample_count = ds.samples.size();
    return ds;
}

inline Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset '" + path + "'");
    return read_dataset(in);
}

inline void write_dataset(std::ostream& out, const Dataset& ds) {
    nlohmann::json manifest = {{"n_channels", ds.manifest.n_channels}, {"time_unit", ds.manifest.time_unit}};
    if (!ds.manifest.channel_names.empty()) manifest["channel_names"] = ds.manifest.channel_names;
    out << manifest.dump() << '\n';
    for (const auto& s : ds.samples) {
        nlohmann::json obs = nlohmann::json::array();
        for (const auto& o : s.observations) obs.push_back({o.t, o.x, o.c});
        nlohmann::json line = {{"series_id", s.series_id}, {"t_s", s.split_time}, {"obs", std::move(obs)}};
        out << line.dump() << '\n';
    }
}

inline void save_dataset(const std::string& path, const Dataset& ds) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write dataset '" + path + "'");
    write_dataset(out, ds);
}

}  // namespace astgi
