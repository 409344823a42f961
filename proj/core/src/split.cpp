#include "unica/split.hpp"

#include <cmath>

#include "unica/errors.hpp"

namespace unica {

SplitMode parse_split_mode(std::string_view s) {
    if (s == "holdout") return SplitMode::holdout;
    if (s == "sliding") return SplitMode::sliding;
    throw ConfigError("unknown split mode '" + std::string(s) + "'");
}

std::string to_string(SplitMode m) { return m == SplitMode::holdout ? "holdout" : "sliding"; }

Splits split(const std::vector<std::size_t>& lengths, std::size_t T, std::size_t H, SplitMode mode,
             double test_fraction) {
    if (H == 0 || T == 0) throw DataError("split: context and horizon must be positive");
    if (!(test_fraction > 0.0 && test_fraction < 0.5)) throw ConfigError("split: test_fraction must lie in (0, 0.5)");
    Splits out;
    for (std::size_t s = 0; s < lengths.size(); ++s) {
        const std::size_t n = lengths[s];
        // Size of the test region; the validation region has the same size.
        const std::size_t region =
            mode == SplitMode::holdout ? H : static_cast<std::size_t>(std::floor(static_cast<double>(n) * test_fraction));
        if (region < H || n < 2 * region + H + T)
            throw DataError("split: series " + std::to_string(s) + " of length " + std::to_string(n) +
                            " is too short for context " + std::to_string(T) + " and horizon " + std::to_string(H));
        const std::size_t test_start = n - region;
        const std::size_t val_start = test_start - region;
        for (std::size_t o = test_start; o + H <= n; ++o) out.test.push_back({s, o});
        for (std::size_t o = val_start; o + H <= test_start; ++o) out.val.push_back({s, o});
        for (std::size_t o = T; o + H <= val_start; ++o) out.train.push_back({s, o});
    }
    return out;
}

Splits split(const Dataset& ds, SplitMode mode, double test_fraction) {
    std::vector<std::size_t> lengths;
    for (const auto& r : ds.records) lengths.push_back(r.length());
    return split(lengths, ds.context, ds.horizon, mode, test_fraction);
}

Splits split(const PreparedDataset& pd, SplitMode mode, double test_fraction) {
    std::vector<std::size_t> lengths;
    for (const auto& s : pd.series) lengths.push_back(s.length());
    return split(lengths, pd.context, pd.horizon, mode, test_fraction);
}

}  // namespace unica
