#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "unica/dataset.hpp"
#include "unica/tensor.hpp"

namespace unica {

struct Imputed {
    std::vector<double> filled;
    std::vector<double> indicator;  // 1 where the input was missing
};

// Forward fill; leading gaps take the first observed value. DataError when
// nothing is observed.
Imputed forward_fill_impute(const MaybeSeries& values);

// DataError unless timestamps are strictly increasing with the step implied
// by `freq` (calendar months for monthly).
void check_regular_spacing(std::span<const std::int64_t> timestamps, Frequency freq);

// [n, 2 * cycles] sin/cos pairs:
//   hourly   hour-of-day/24, day-of-week/7, month/12
//   daily    day-of-week/7, day-of-month/31, month/12
//   weekly   month/12
//   monthly  month/12
Tensor time_features(std::span<const std::int64_t> timestamps, Frequency freq);
std::vector<std::string> time_feature_names(Frequency freq);

// Channel names of the dense known/past real blocks; a function of the schema.
std::vector<std::string> known_real_channels(const Schema& s);
std::vector<std::string> past_real_channels(const Schema& s);

/// Dense, imputed form of a record. Channel layouts are fixed by the schema:
///   known_real  declared known reals, then time features
///   past_real   declared past reals, then one indicator per nullable dynamic real
struct PreparedSeries {
    std::string series_id;
    std::vector<double> target;
    std::vector<double> target_observed;  // 1 observed, 0 imputed
    Tensor known_real;                    // [n, known_real_names.size()]
    std::vector<std::vector<std::size_t>> known_cat;
    Tensor past_real;  // [n, past_real_names.size()]
    std::vector<std::size_t> static_cat;
    std::vector<double> static_real;  // missing statics are 0
    std::vector<Tensor> het;          // schema order, [n, D]

    std::size_t length() const noexcept { return target.size(); }
};

struct PreparedDataset {
    Schema schema;
    std::size_t context = 0;
    std::size_t horizon = 0;
    std::vector<std::string> known_real_names;
    std::vector<std::string> past_real_names;
    std::vector<PreparedSeries> series;
};

PreparedDataset prepare(const Dataset& ds);

// History covers [origin - T, origin), the forecast target [origin, origin + H).
struct Window {
    std::size_t series = 0;
    std::size_t origin = 0;
};

/// Everything the model sees for one forecasting instance.
struct WindowData {
    std::string series_id;
    std::size_t origin = 0;
    std::vector<double> history;           // T
    std::vector<double> history_observed;  // T
    std::vector<double> future;            // H ground truth
    Tensor known_real;                     // [T + H, a]
    std::vector<std::vector<std::size_t>> known_cat;  // each T + H
    Tensor past_real;                      // [T, b]
    std::vector<Tensor> het;               // [T + H, D] if future-known else [T, D]
    std::vector<std::size_t> static_cat;
    std::vector<double> static_real;
};

// DataError when the window does not fit inside the series.
WindowData make_window(const PreparedDataset& pd, const Window& w);

}  // namespace unica
