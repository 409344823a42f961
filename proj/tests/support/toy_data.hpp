#pragma once

#include <random>
#include <string>

#include "unica/dataset.hpp"

namespace unica::testing {

struct ToyOptions {
    std::size_t known_real = 0;
    std::size_t known_cat_vocab = 0;  // 0 = none
    std::size_t past_real = 0;
    bool nullable_past = false;
    std::size_t het_known_dim = 0;  // 0 = none
    std::size_t het_past_dim = 0;
    std::size_t static_cat_vocab = 0;
    bool static_real = false;
    bool time_features = false;
    std::size_t n_series = 2;
    std::size_t length = 64;
    std::size_t context = 32;
    std::size_t horizon = 8;
    std::uint64_t seed = 1;
};

// Random covariates of every requested kind around a noisy level target.
inline Dataset toy_dataset(const ToyOptions& o) {
    std::mt19937_64 rng(o.seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Dataset ds;
    ds.context = o.context;
    ds.horizon = o.horizon;
    Schema& s = ds.schema;
    s.freq = Frequency::hourly;
    s.time_features = o.time_features;
    for (std::size_t j = 0; j < o.known_real; ++j) s.known_real.push_back({"k" + std::to_string(j), false});
    if (o.known_cat_vocab) s.known_cat.push_back({"cat", o.known_cat_vocab});
    for (std::size_t j = 0; j < o.past_real; ++j) s.past_real.push_back({"p" + std::to_string(j), o.nullable_past});
    if (o.het_known_dim) s.het.push_back({"hk", o.het_known_dim, true});
    if (o.het_past_dim) s.het.push_back({"hp", o.het_past_dim, false});
    if (o.static_cat_vocab) s.static_cat.push_back({"group", o.static_cat_vocab});
    if (o.static_real) s.static_real.push_back({"size", false});

    for (std::size_t i = 0; i < o.n_series; ++i) {
        SeriesRecord r;
        r.series_id = "toy" + std::to_string(i);
        r.freq = s.freq;
        const double level = 5.0 + g(rng);
        for (std::size_t t = 0; t < o.length; ++t) {
            r.timestamps.push_back(1704067200 + static_cast<std::int64_t>(t) * 3600);
            r.target.push_back(level + 0.5 * g(rng));
        }
        for (const auto& d : s.known_real) {
            MaybeSeries v;
            for (std::size_t t = 0; t < o.length; ++t) v.push_back(g(rng));
            r.dyn_known_real[d.name] = v;
        }
        for (const auto& d : s.known_cat) {
            std::vector<std::size_t> v;
            for (std::size_t t = 0; t < o.length; ++t) v.push_back(static_cast<std::size_t>(u(rng) * d.vocab) % d.vocab);
            r.dyn_known_cat[d.name] = v;
        }
        for (const auto& d : s.past_real) {
            MaybeSeries v;
            for (std::size_t t = 0; t < o.length; ++t) {
                if (d.nullable && t > 0 && u(rng) < 0.2) v.push_back(std::nullopt);
                else v.push_back(g(rng));
            }
            r.past_real[d.name] = v;
        }
        for (const auto& d : s.het) {
            Tensor f({o.length, d.dim});
            for (std::size_t k = 0; k < f.size(); ++k) f[k] = g(rng);
            r.het_features[d.name] = HetSeries{f, d.future_known};
        }
        for (const auto& d : s.static_cat) r.static_cat[d.name] = i % d.vocab;
        for (const auto& d : s.static_real) r.static_real[d.name] = g(rng);
        ds.records.push_back(std::move(r));
    }
    ds.validate();
    return ds;
}

}  // namespace unica::testing
