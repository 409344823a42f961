#pragma once

#include <vector>

#include "unica/dataset.hpp"
#include "unica/preprocess.hpp"

namespace unica {

enum class SplitMode { holdout, sliding };

SplitMode parse_split_mode(std::string_view s);  // ConfigError on unknown names
std::string to_string(SplitMode m);

/// Window sets per series. Holdout: one test window whose targets are the
/// last H points and one validation window just before it. Sliding: the
/// final `test_fraction` of each series yields stride-1 test windows, an
/// equal-size region before it the validation windows. Training windows are
/// every origin whose targets end at or before the validation region.
struct Splits {
    std::vector<Window> train;
    std::vector<Window> val;
    std::vector<Window> test;
};

// DataError when a series is too short to host all three sets.
Splits split(const std::vector<std::size_t>& lengths, std::size_t context, std::size_t horizon, SplitMode mode,
             double test_fraction = 0.1);
Splits split(const Dataset& ds, SplitMode mode, double test_fraction = 0.1);
Splits split(const PreparedDataset& pd, SplitMode mode, double test_fraction = 0.1);

}  // namespace unica
