#include "unica/synthetic.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>

#include "unica/errors.hpp"
#include "unica/rng.hpp"

namespace unica {
namespace {

std::vector<std::int64_t> make_timestamps(std::int64_t start, std::size_t n, Frequency freq) {
    using namespace std::chrono;
    std::vector<std::int64_t> out(n);
    if (freq == Frequency::monthly) {
        const sys_seconds tp{seconds{start}};
        const auto day = floor<days>(tp);
        const auto tod = tp - day;
        const year_month_day ymd{day};
        for (std::size_t t = 0; t < n; ++t) {
            const year_month_day cur = ymd + months{static_cast<int>(t)};
            if (!cur.ok()) throw ConfigError("start: day of month does not exist in every month");
            out[t] = (sys_days{cur} + tod).time_since_epoch().count();
        }
        return out;
    }
    const std::int64_t step = freq == Frequency::hourly ? 3600 : freq == Frequency::daily ? 86400 : 7 * 86400;
    for (std::size_t t = 0; t < n; ++t) out[t] = start + static_cast<std::int64_t>(t) * step;
    return out;
}

// Stationary unit-variance AR(1) path of length n.
std::vector<double> ar1(Rng& rng, std::size_t n, double phi) {
    std::vector<double> x(n);
    const double innov = std::sqrt(1.0 - phi * phi);
    double v = rng.normal();
    for (std::size_t t = 0; t < n; ++t) {
        if (t > 0) v = phi * v + innov * rng.normal();
        x[t] = v;
    }
    return x;
}

}  // namespace

void SyntheticSpec::validate() const {
    auto positive = [](std::size_t v, const char* field) {
        if (v == 0) throw ConfigError(std::string("synthetic spec field '") + field + "' must be positive");
    };
    positive(n_series, "n_series");
    positive(length, "length");
    positive(context, "context");
    positive(horizon, "horizon");
    if (seasonal_periods.empty()) throw ConfigError("synthetic spec field 'seasonal_periods' must not be empty");
    for (auto p : seasonal_periods) positive(p, "seasonal_periods");
    auto finite = [](double v, const char* field) {
        if (!std::isfinite(v)) throw ConfigError(std::string("synthetic spec field '") + field + "' must be finite");
    };
    for (double b : known_beta) finite(b, "known_beta");
    for (double b : past_beta) finite(b, "past_beta");
    for (auto [v, f] : {std::pair{level, "level"}, {level_spread, "level_spread"}, {trend, "trend"},
                        {trend_spread, "trend_spread"}, {seasonal_amplitude, "seasonal_amplitude"},
                        {latent_sigma, "latent_sigma"}, {noise_sigma, "noise_sigma"}, {het_scale, "het_scale"},
                        {regime_scale, "regime_scale"}, {static_scale, "static_scale"}})
        finite(v, f);
    auto unit = [](double v, const char* field, bool closed) {
        if (!(v >= 0.0 && (closed ? v <= 1.0 : v < 1.0)))
            throw ConfigError(std::string("synthetic spec field '") + field + "' is out of range");
    };
    unit(driver_phi, "driver_phi", false);
    unit(latent_phi, "latent_phi", false);
    unit(past_missing_rate, "past_missing_rate", false);
    unit(regime_switch, "regime_switch", true);
    if (noise_sigma < 0 || latent_sigma < 0 || level_spread < 0 || trend_spread < 0)
        throw ConfigError("synthetic spec: spreads and sigmas must be non-negative");
    if (het_scale != 0.0 && het_dim == 0) throw ConfigError("synthetic spec field 'het_dim' must be positive when het_scale is set");
    if (regime_scale != 0.0 && regime_vocab == 0)
        throw ConfigError("synthetic spec field 'regime_vocab' must be positive when regime_scale is set");
    if (static_scale != 0.0 && static_vocab == 0)
        throw ConfigError("synthetic spec field 'static_vocab' must be positive when static_scale is set");
}

SyntheticSpec synthetic_preset(std::string_view recipe) {
    SyntheticSpec s;
    s.recipe = std::string(recipe);
    if (recipe == "custom" || recipe == "seasonal") {
        s.level = 10.0;
        s.level_spread = 2.0;
        s.seasonal_amplitude = 2.0;
        s.noise_sigma = 0.2;
    } else if (recipe == "pretrain") {
        s.n_series = 64;
        s.length = 600;
        s.level = 0.0;
        s.level_spread = 5.0;
        s.trend_spread = 0.01;
        s.seasonal_periods = {24, 12, 48, 6};
        s.seasonal_amplitude = 1.5;
        s.latent_sigma = 1.0;
        s.latent_phi = 0.95;
        s.noise_sigma = 0.3;
    } else if (recipe == "driver") {
        s.n_series = 16;
        s.level = 5.0;
        s.level_spread = 0.2;
        s.seasonal_amplitude = 0.3;
        s.noise_sigma = 0.1;
        s.known_beta = {1.0};
    } else if (recipe == "hidden_readout") {
        s.n_series = 64;
        s.level = 5.0;
        s.level_spread = 0.2;
        s.seasonal_amplitude = 0.3;
        s.noise_sigma = 0.1;
        s.het_dim = 16;
        s.het_scale = 1.0;
    } else if (recipe == "regime") {
        s.n_series = 16;
        s.level = 5.0;
        s.level_spread = 0.2;
        s.seasonal_amplitude = 0.3;
        s.noise_sigma = 0.1;
        s.regime_vocab = 4;
        s.regime_scale = 1.0;
        s.static_vocab = 3;
        s.static_scale = 0.5;
    } else {
        throw ConfigError("unknown synthetic recipe '" + std::string(recipe) + "'");
    }
    return s;
}

SyntheticSpec synthetic_spec_from_json(const Json& j) {
    if (!j.is_object()) throw ConfigError("synthetic spec must be a JSON object");
    SyntheticSpec s = synthetic_preset(j.contains("recipe") && j["recipe"].is_string() ? j["recipe"].get<std::string>()
                                                                                      : std::string("custom"));
    using Setter = std::function<void(const Json&)>;
    const std::map<std::string, Setter> setters{
        {"recipe", [&](const Json& v) { s.recipe = v.get<std::string>(); }},
        {"n_series", [&](const Json& v) { s.n_series = v.get<std::size_t>(); }},
        {"length", [&](const Json& v) { s.length = v.get<std::size_t>(); }},
        {"context", [&](const Json& v) { s.context = v.get<std::size_t>(); }},
        {"horizon", [&](const Json& v) { s.horizon = v.get<std::size_t>(); }},
        {"seed", [&](const Json& v) { s.seed = v.get<std::uint64_t>(); }},
        {"freq", [&](const Json& v) { s.freq = parse_frequency(v.get<std::string>()); }},
        {"start", [&](const Json& v) { s.start = v.get<std::int64_t>(); }},
        {"level", [&](const Json& v) { s.level = v.get<double>(); }},
        {"level_spread", [&](const Json& v) { s.level_spread = v.get<double>(); }},
        {"trend", [&](const Json& v) { s.trend = v.get<double>(); }},
        {"trend_spread", [&](const Json& v) { s.trend_spread = v.get<double>(); }},
        {"seasonal_periods", [&](const Json& v) { s.seasonal_periods = v.get<std::vector<std::size_t>>(); }},
        {"seasonal_amplitude", [&](const Json& v) { s.seasonal_amplitude = v.get<double>(); }},
        {"latent_sigma", [&](const Json& v) { s.latent_sigma = v.get<double>(); }},
        {"latent_phi", [&](const Json& v) { s.latent_phi = v.get<double>(); }},
        {"noise_sigma", [&](const Json& v) { s.noise_sigma = v.get<double>(); }},
        {"driver_phi", [&](const Json& v) { s.driver_phi = v.get<double>(); }},
        {"known_beta", [&](const Json& v) { s.known_beta = v.get<std::vector<double>>(); }},
        {"past_beta", [&](const Json& v) { s.past_beta = v.get<std::vector<double>>(); }},
        {"past_missing_rate", [&](const Json& v) { s.past_missing_rate = v.get<double>(); }},
        {"het_dim", [&](const Json& v) { s.het_dim = v.get<std::size_t>(); }},
        {"het_scale", [&](const Json& v) { s.het_scale = v.get<double>(); }},
        {"het_future_known", [&](const Json& v) { s.het_future_known = v.get<bool>(); }},
        {"regime_vocab", [&](const Json& v) { s.regime_vocab = v.get<std::size_t>(); }},
        {"regime_scale", [&](const Json& v) { s.regime_scale = v.get<double>(); }},
        {"regime_switch", [&](const Json& v) { s.regime_switch = v.get<double>(); }},
        {"static_vocab", [&](const Json& v) { s.static_vocab = v.get<std::size_t>(); }},
        {"static_scale", [&](const Json& v) { s.static_scale = v.get<double>(); }},
        {"time_features", [&](const Json& v) { s.time_features = v.get<bool>(); }},
    };
    for (const auto& [key, value] : j.items()) {
        const auto it = setters.find(key);
        if (it == setters.end()) throw ConfigError("synthetic spec: unknown field '" + key + "'");
        try {
            it->second(value);
        } catch (const Json::exception& e) {
            throw ConfigError("synthetic spec field '" + key + "': " + e.what());
        }
    }
    s.validate();
    return s;
}

Json to_json(const SyntheticSpec& s) {
    return Json{{"recipe", s.recipe},
                {"n_series", s.n_series},
                {"length", s.length},
                {"context", s.context},
                {"horizon", s.horizon},
                {"seed", s.seed},
                {"freq", to_string(s.freq)},
                {"start", s.start},
                {"level", s.level},
                {"level_spread", s.level_spread},
                {"trend", s.trend},
                {"trend_spread", s.trend_spread},
                {"seasonal_periods", s.seasonal_periods},
                {"seasonal_amplitude", s.seasonal_amplitude},
                {"latent_sigma", s.latent_sigma},
                {"latent_phi", s.latent_phi},
                {"noise_sigma", s.noise_sigma},
                {"driver_phi", s.driver_phi},
                {"known_beta", s.known_beta},
                {"past_beta", s.past_beta},
                {"past_missing_rate", s.past_missing_rate},
                {"het_dim", s.het_dim},
                {"het_scale", s.het_scale},
                {"het_future_known", s.het_future_known},
                {"regime_vocab", s.regime_vocab},
                {"regime_scale", s.regime_scale},
                {"regime_switch", s.regime_switch},
                {"static_vocab", s.static_vocab},
                {"static_scale", s.static_scale},
                {"time_features", s.time_features}};
}

std::vector<double> hidden_readout(const SyntheticSpec& spec) {
    std::vector<double> w(spec.het_dim);
    if (spec.het_dim == 0) return w;
    Rng rng(derive_seed(spec.seed, "readout"));
    double norm = 0.0;
    for (auto& v : w) {
        v = rng.normal();
        norm += v * v;
    }
    norm = std::sqrt(norm);
    for (auto& v : w) v /= norm;
    return w;
}

Dataset gen_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    const std::size_t n = spec.length;
    const std::size_t H = spec.horizon;
    const std::size_t burn = H;  // lagged drivers reach back H steps

    Dataset ds;
    ds.context = spec.context;
    ds.horizon = H;
    Schema& schema = ds.schema;
    schema.freq = spec.freq;
    schema.time_features = spec.time_features;
    for (std::size_t j = 0; j < spec.known_beta.size(); ++j) schema.known_real.push_back({"driver" + std::to_string(j), false});
    if (spec.regime_vocab) schema.known_cat.push_back({"regime", spec.regime_vocab});
    for (std::size_t j = 0; j < spec.past_beta.size(); ++j)
        schema.past_real.push_back({"past" + std::to_string(j), spec.past_missing_rate > 0.0});
    if (spec.het_dim) schema.het.push_back({"features", spec.het_dim, spec.het_future_known});
    if (spec.static_vocab) schema.static_cat.push_back({"group", spec.static_vocab});

    const std::vector<double> w = hidden_readout(spec);
    Rng shared(derive_seed(spec.seed, "dataset"));
    std::vector<double> regime_offset(spec.regime_vocab), static_offset(spec.static_vocab);
    for (auto& v : regime_offset) v = spec.regime_scale * shared.normal();
    for (auto& v : static_offset) v = spec.static_scale * shared.normal();

    const auto timestamps = make_timestamps(spec.start, n, spec.freq);
    for (std::size_t i = 0; i < spec.n_series; ++i) {
        Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(i)));
        SeriesRecord r;
        r.series_id = "s" + std::to_string(i);
        r.freq = spec.freq;
        r.timestamps = timestamps;

        const double level = spec.level + spec.level_spread * rng.normal();
        const double slope = spec.trend + spec.trend_spread * rng.normal();
        const double period = static_cast<double>(spec.seasonal_periods[rng.index(spec.seasonal_periods.size())]);
        const double amp = spec.seasonal_amplitude * rng.uniform(0.5, 1.5);
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        std::size_t group = 0;
        if (spec.static_vocab) {
            group = rng.index(spec.static_vocab);
            r.static_cat["group"] = group;
        }

        std::vector<double> y(n);
        for (std::size_t t = 0; t < n; ++t) {
            y[t] = level + slope * static_cast<double>(t) +
                   amp * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / period + phase);
            if (spec.static_vocab) y[t] += static_offset[group];
        }
        if (spec.latent_sigma > 0.0) {
            const auto z = ar1(rng, n, spec.latent_phi);
            for (std::size_t t = 0; t < n; ++t) y[t] += spec.latent_sigma * z[t];
        }
        for (std::size_t j = 0; j < spec.known_beta.size(); ++j) {
            const auto c = ar1(rng, n, spec.driver_phi);
            MaybeSeries col(n);
            for (std::size_t t = 0; t < n; ++t) {
                y[t] += spec.known_beta[j] * c[t];
                col[t] = c[t];
            }
            r.dyn_known_real["driver" + std::to_string(j)] = std::move(col);
        }
        for (std::size_t j = 0; j < spec.past_beta.size(); ++j) {
            const auto p = ar1(rng, n + burn, spec.driver_phi);  // p[t + burn] is the value at time t
            MaybeSeries col(n);
            for (std::size_t t = 0; t < n; ++t) {
                y[t] += spec.past_beta[j] * p[t];  // value at time t - H
                col[t] = p[t + burn];
            }
            if (spec.past_missing_rate > 0.0) {
                for (std::size_t t = 0; t < n; ++t)
                    if (rng.uniform() < spec.past_missing_rate) col[t].reset();
                if (!col[0]) col[0] = p[burn];
            }
            r.past_real["past" + std::to_string(j)] = std::move(col);
        }
        if (spec.het_dim) {
            const std::size_t D = spec.het_dim;
            std::vector<std::vector<double>> f(D);
            for (auto& fd : f) fd = ar1(rng, n + burn, spec.driver_phi);
            Tensor values({n, D});
            for (std::size_t t = 0; t < n; ++t) {
                double readout = 0.0;
                const std::size_t src = spec.het_future_known ? t + burn : t;
                for (std::size_t d = 0; d < D; ++d) {
                    values.at(t, d) = f[d][t + burn];
                    readout += w[d] * f[d][src];
                }
                y[t] += spec.het_scale * readout;
            }
            r.het_features["features"] = HetSeries{std::move(values), spec.het_future_known};
        }
        if (spec.regime_vocab) {
            std::vector<std::size_t> cat(n);
            std::size_t cur = rng.index(spec.regime_vocab);
            for (std::size_t t = 0; t < n; ++t) {
                if (t > 0 && spec.regime_vocab > 1 && rng.uniform() < spec.regime_switch)
                    cur = (cur + 1 + rng.index(spec.regime_vocab - 1)) % spec.regime_vocab;
                cat[t] = cur;
                y[t] += regime_offset[cur];
            }
            r.dyn_known_cat["regime"] = std::move(cat);
        }
        r.target.resize(n);
        for (std::size_t t = 0; t < n; ++t) r.target[t] = y[t] + spec.noise_sigma * rng.normal();
        ds.records.push_back(std::move(r));
    }
    ds.validate();
    return ds;
}

Dataset inject_noise_covariate(const Dataset& ds, std::uint64_t seed, const std::string& name) {
    if (ds.schema.has_name(name)) throw ConfigError("inject_noise_covariate: covariate '" + name + "' already exists");
    Dataset out = ds;
    out.schema.past_real.push_back({name, false});
    Rng rng(derive_seed(seed, "noise:" + name));
    for (auto& r : out.records) {
        MaybeSeries col(r.length());
        for (auto& v : col) v = rng.normal();
        r.past_real[name] = std::move(col);
    }
    return out;
}

}  // namespace unica
