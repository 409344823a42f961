#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "unica/json_io.hpp"
#include "unica/preprocess.hpp"
#include "unica/tensor.hpp"

namespace unica {

// One test window in original units.
struct EvalFrame {
    std::string series_id;
    std::size_t origin = 0;
    std::vector<double> y;  // [H]
    Tensor quantiles;       // [H, K]
};

// A metric value that may be undefined (zero denominator).
struct Score {
    double value = 0.0;
    bool defined = true;
};

struct PointMetrics {
    Score mae;
    Score mse;
    Score mape;
    std::size_t mape_excluded = 0;  // terms with y == 0
};

// Checks frame shapes against the levels; ContractError on mismatch or no frames.
void check_frames(const std::vector<EvalFrame>& frames, const std::vector<double>& levels);

// Index of the 0.5 level; ContractError when absent.
std::size_t median_level(const std::vector<double>& levels);

// Point forecast is the median column.
PointMetrics point_metrics(const std::vector<EvalFrame>& frames, const std::vector<double>& levels);

/// 2 * sum_t pinball_alpha(q_t(alpha), y_t) / sum_t |y_t|, pooled over frames.
/// Undefined when sum |y| = 0.
Score wql(const std::vector<EvalFrame>& frames, const std::vector<double>& levels, std::size_t level_index);

// Mean of wql over every level.
Score crps(const std::vector<EvalFrame>& frames, const std::vector<double>& levels);

// Every horizon step and level equals the last context value.
Tensor naive_forecast(const std::vector<double>& context, std::size_t horizon, std::size_t levels);
EvalFrame naive_frame(const WindowData& w, std::size_t levels);

enum class Aggregation { pooled, per_series };

std::string to_string(Aggregation a);
Aggregation parse_aggregation(std::string_view s);

struct MetricEntry {
    double raw = 0.0;
    double naive = 0.0;
    double normalized = 0.0;
    std::vector<std::string> flags;

    bool defined() const;
};

struct MetricReport {
    std::string dataset;
    std::string method;
    Aggregation aggregation = Aggregation::pooled;
    std::map<std::string, MetricEntry> metrics;  // MAE, MSE, MAPE, CRPS
    double average_normalized = 0.0;              // over defined normalized metrics
    bool average_defined = true;

    Json to_json() const;
};

// Raw scores for MAE, MSE, MAPE and CRPS with their flags.
std::map<std::string, MetricEntry> raw_metrics(const std::vector<EvalFrame>& frames, const std::vector<double>& levels,
                                               Aggregation agg = Aggregation::pooled);

/// Normalises each metric by the Naive score on the same windows. A Naive
/// score of zero (or an undefined score on either side) flags the metric.
MetricReport normalize_by_naive(std::string dataset, std::string method, const std::vector<EvalFrame>& frames,
                                const std::vector<EvalFrame>& naive, const std::vector<double>& levels,
                                Aggregation agg = Aggregation::pooled);

struct Correlation {
    double rho = 0.0;
    bool degenerate = false;
};

// Pearson correlation of each column of channels [n, c] with target [n].
std::vector<Correlation> channel_target_correlation(const Tensor& channels, const std::vector<double>& target);
Correlation pearson(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace unica
