#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "unica/json_io.hpp"
#include "unica/tensor.hpp"

namespace unica {

enum class Frequency { hourly, daily, weekly, monthly };

std::string to_string(Frequency f);
Frequency parse_frequency(std::string_view s);  // ConfigError on unknown names

// Missing values are std::nullopt in memory and null on disk.
using MaybeSeries = std::vector<std::optional<double>>;

struct CategoricalDecl {
    std::string name;
    std::size_t vocab = 0;
};

struct RealDecl {
    std::string name;
    bool nullable = false;  // nullable dynamic reals get an imputation indicator channel
};

struct HetDecl {
    std::string name;
    std::size_t dim = 0;
    bool future_known = true;
};

struct Schema {
    Frequency freq = Frequency::hourly;
    bool target_nullable = false;
    bool time_features = true;  // calendar channels in the known block
    std::vector<CategoricalDecl> static_cat;
    std::vector<RealDecl> static_real;
    std::vector<RealDecl> known_real;
    std::vector<CategoricalDecl> known_cat;
    std::vector<RealDecl> past_real;
    std::vector<HetDecl> het;

    std::vector<std::string> names() const;
    bool has_name(std::string_view name) const;
};

struct HetSeries {
    Tensor values;  // [length, D]
    bool future_known = true;
};

/// One series stored over its full observed span. Forecast windows
/// (context T, horizon H) are views into it at a chosen origin.
struct SeriesRecord {
    std::string series_id;
    Frequency freq = Frequency::hourly;
    std::vector<std::int64_t> timestamps;  // epoch seconds, UTC
    MaybeSeries target;
    std::map<std::string, std::size_t> static_cat;
    std::map<std::string, std::optional<double>> static_real;
    std::map<std::string, MaybeSeries> dyn_known_real;
    std::map<std::string, std::vector<std::size_t>> dyn_known_cat;
    std::map<std::string, MaybeSeries> past_real;
    std::map<std::string, HetSeries> het_features;

    std::size_t length() const noexcept { return timestamps.size(); }
};

struct Dataset {
    Schema schema;
    std::size_t horizon = 0;
    std::size_t context = 0;
    std::vector<SeriesRecord> records;

    // Throws DataError naming the first offending record and field.
    void validate() const;
};

Json to_json(const Schema& s);
Schema schema_from_json(const Json& j);
Json to_json(const Dataset& ds);
Dataset dataset_from_json(const Json& j);  // validates

std::string serialize(const Dataset& ds);
void save_dataset(const std::filesystem::path& path, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace unica
