#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "astgi/data/sample.hpp"
#include "astgi/errors.hpp"

namespace astgi {

/// Synthetic irregular multivariate series. Channel c of a sample follows
///   x_c(t) = a_c sin(2 pi f_c t + phi) + b * a_{c+1} sin(2 pi f_{c+1} t + phi) + noise
/// where phi and the amplitudes a_c are drawn per sample, the frequencies f_c
/// once per dataset, and c+1 wraps around the channel count. Observation
/// times are a Poisson process on [0, time_span) conditioned on the total
/// count, with each point assigned to a uniformly random channel, so the
/// channels are asynchronous and irregularly spaced.
struct SynthConfig {
    std::size_t n_channels = 4;
    std::size_t samples = 200;
    std::size_t min_obs = 40;
    std::size_t max_obs = 80;
    double noise = 0.05;
    double cross_weight = 0.5;
    double time_span = 1.0;
    double freq_min = 0.5;
    double freq_max = 1.5;
    double amp_min = 0.5;
    double amp_max = 1.5;
    double split_quantile = 2.0 / 3.0;

    void validate() const {
        if (n_channels == 0) throw ValidationError("synth: n_channels must be >= 1");
        if (samples == 0) throw ValidationError("synth: samples must be >= 1");
        if (min_obs < 2 || max_obs < min_obs) throw ValidationError("synth: need 2 <= min_obs <= max_obs");
        if (!(noise >= 0) || !(time_span > 0)) throw ValidationError("synth: noise must be >= 0 and time_span > 0");
        if (!(freq_max >= freq_min) || !(amp_max >= amp_min)) throw ValidationError("synth: empty frequency/amplitude range");
        if (!(split_quantile > 0 && split_quantile < 1)) throw ValidationError("synth: split_quantile must be in (0, 1)");
    }
};

inline void to_json(nlohmann::json& j, const SynthConfig& c) {
    j = {{"n_channels", c.n_channels}, {"samples", c.samples},     {"min_obs", c.min_obs},
         {"max_obs", c.max_obs},       {"noise", c.noise},         {"cross_weight", c.cross_weight},
         {"time_span", c.time_span},   {"freq_min", c.freq_min},   {"freq_max", c.freq_max},
         {"amp_min", c.amp_min},       {"amp_max", c.amp_max},     {"split_quantile", c.split_quantile}};
}

inline void from_json(const nlohmann::json& j, SynthConfig& c) {
    c.n_channels = j.value("n_channels", c.n_channels);
    c.samples = j.value("samples", c.samples);
    c.min_obs = j.value("min_obs", c.min_obs);
    c.max_obs = j.value("max_obs", c.max_obs);
    c.noise = j.value("noise", c.noise);
    c.cross_weight = j.value("cross_weight", c.cross_weight);
    c.time_span = j.value("time_span", c.time_span);
    c.freq_min = j.value("freq_min", c.freq_min);
    c.freq_max = j.value("freq_max", c.freq_max);
    c.amp_min = j.value("amp_min", c.amp_min);
    c.amp_max = j.value("amp_max", c.amp_max);
    c.split_quantile = j.value("split_quantile", c.split_quantile);
}

inline Dataset synth_generate(const SynthConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const std::size_t nc = cfg.n_channels;

    std::vector<double> freq(nc);
    for (auto& f : freq) f = cfg.freq_min + (cfg.freq_max - cfg.freq_min) * unit(rng);

    Dataset ds;
    ds.manifest.n_channels = nc;
    ds.manifest.time_unit = "synthetic";
    for (std::size_t c = 0; c < nc; ++c) ds.manifest.channel_names.push_back("ch" + std::to_string(c));

    const double two_pi = 2.0 * std::numbers::pi;
    for (std::size_t s = 0; s < cfg.samples; ++s) {
        const double phase = two_pi * unit(rng);
        std::vector<double> amp(nc);
        for (auto& a : amp) a = cfg.amp_min + (cfg.amp_max - cfg.amp_min) * unit(rng);
        const std::size_t n_obs = cfg.min_obs + static_cast<std::size_t>(rng() % (cfg.max_obs - cfg.min_obs + 1));

        auto clean = [&](std::size_t c, double t) { return amp[c] * std::sin(two_pi * freq[c] * t + phase); };
        std::vector<Observation> obs(n_obs);
        for (auto& o : obs) {
            o.t = cfg.time_span * unit(rng);
            o.c = static_cast<std::size_t>(rng() % nc);
            o.x = clean(o.c, o.t) + cfg.cross_weight * clean((o.c + 1) % nc, o.t) + cfg.noise * gauss(rng);
        }
        const auto [lo, hi] = std::minmax_element(obs.begin(), obs.end(),
                                                  [](const Observation& a, const Observation& b) { return a.t < b.t; });
        const double t_s = lo->t + cfg.split_quantile * (hi->t - lo->t);
        ds.samples.push_back(make_sample("synth-" + std::to_string(s), std::move(obs), t_s));
    }
    ds.manifest.sample_count = ds.samples.size();
    return ds;
}

}  // namespace astgi
