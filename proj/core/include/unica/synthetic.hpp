#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "unica/dataset.hpp"
#include "unica/json_io.hpp"

namespace unica {

/// Seeded generator of covariate-bearing series.
///
///   y_t = level + slope * t + seasonal_t + latent_t
///         + sum_j known_beta_j * c_{j,t} + sum_j past_beta_j * p_{j,t-H}
///         + het_scale * w . F_t + regime_offset(cat_t) + static_offset + eps_t
///
/// Drivers c, p and the feature dimensions of F are stationary AR(1) with
/// unit variance; w has unit norm, so het_scale is the readout's std.
/// Past-only drivers (and a past-only F) act with lag H.
struct SyntheticSpec {
    std::string recipe = "custom";
    std::size_t n_series = 8;
    std::size_t length = 480;
    std::size_t context = 96;
    std::size_t horizon = 24;
    std::uint64_t seed = 42;
    Frequency freq = Frequency::hourly;
    std::int64_t start = 1704067200;  // 2024-01-01T00:00:00Z
    bool time_features = true;

    double level = 10.0;
    double level_spread = 1.0;
    double trend = 0.0;  // slope per step
    double trend_spread = 0.0;
    std::vector<std::size_t> seasonal_periods{24};  // one drawn per series
    double seasonal_amplitude = 1.0;
    double latent_sigma = 0.0;  // unobserved AR(1) component
    double latent_phi = 0.9;
    double noise_sigma = 0.1;

    double driver_phi = 0.95;
    std::vector<double> known_beta;
    std::vector<double> past_beta;
    double past_missing_rate = 0.0;

    std::size_t het_dim = 0;
    double het_scale = 0.0;
    bool het_future_known = true;

    std::size_t regime_vocab = 0;
    double regime_scale = 0.0;
    double regime_switch = 0.05;

    std::size_t static_vocab = 0;
    double static_scale = 0.0;

    void validate() const;  // ConfigError naming the field
};

// Recipes: "seasonal", "pretrain", "driver", "hidden_readout", "regime".
SyntheticSpec synthetic_preset(std::string_view recipe);
// Starts from the preset named by "recipe" (if any) and applies overrides.
// Unknown keys and ill-typed values raise ConfigError naming the field.
SyntheticSpec synthetic_spec_from_json(const Json& j);
Json to_json(const SyntheticSpec& s);

Dataset gen_synthetic(const SyntheticSpec& spec);

// Unit-norm readout vector w of the heterogeneous features.
std::vector<double> hidden_readout(const SyntheticSpec& spec);

// Appends an i.i.d. N(0, 1) past-only real covariate to every record.
Dataset inject_noise_covariate(const Dataset& ds, std::uint64_t seed, const std::string& name = "noise");

}  // namespace unica
