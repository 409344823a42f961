#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "unica/adapter.hpp"
#include "unica/backbone.hpp"
#include "unica/json_io.hpp"
#include "unica/optim.hpp"
#include "unica/preprocess.hpp"
#include "unica/split.hpp"

namespace unica {

enum class LossKind { quantile, huber };

std::string to_string(LossKind k);
LossKind parse_loss(std::string_view s);

struct TrainConfig {
    double learning_rate = 1e-3;
    double weight_decay = 0.0;
    std::size_t batch_size = 16;
    std::size_t max_epochs = 100;
    std::size_t steps_per_epoch = 50;
    std::size_t scheduler_patience = 5;
    double scheduler_factor = 0.5;
    std::size_t early_stop_patience = 10;
    LossKind loss = LossKind::quantile;
    std::uint64_t seed = 42;

    void validate() const;  // ConfigError
};

Json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const Json& j);

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr = 0.0;
    bool improved = false;
};

struct TrainTelemetry {
    std::vector<EpochRecord> epochs;
    double initial_val_loss = 0.0;
    double best_val_loss = 0.0;
    std::size_t best_epoch = 0;  // 0 = the initialisation
    std::size_t steps = 0;
    bool early_stopped = false;
    bool monitored_validation = true;
    std::string backbone_hash_before;
    std::string backbone_hash_after;

    Json to_json() const;
};

// Pooled mean quantile loss of the sorted forecasts in normalised space.
// With adapter == nullptr the frozen backbone is scored zero-shot.
double evaluate_loss(Adapter* adapter, Backbone& backbone, const PreparedDataset& pd, const std::vector<Window>& windows);

struct AdapterRun {
    Adapter adapter;
    TrainTelemetry telemetry;
};

/// Adapter fine-tuning: uniformly sampled batches of training windows,
/// Adam on adapter parameters only, validation every epoch with
/// reduce-on-plateau and early stopping; returns the best-validation
/// snapshot. ContractError when the backbone is not frozen; TrainingError on
/// a non-finite loss.
AdapterRun train_adapter(const PreparedDataset& pd, const Splits& splits, Backbone& backbone, Adapter adapter,
                         const TrainConfig& cfg);

struct SftRun {
    Backbone backbone;
    TrainTelemetry telemetry;
};

// Supervised fine-tuning arm: same loop over an unfrozen copy of the
// backbone, target history only.
SftRun train_sft(const PreparedDataset& pd, const Splits& splits, const Backbone& base, const TrainConfig& cfg);

struct MetricSummary {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation (n - 1); 0 for one run
    std::vector<double> values;
};

using SweepRun = std::function<std::map<std::string, double>(std::uint64_t seed)>;

// Runs `run` once per seed and summarises every reported metric.
std::map<std::string, MetricSummary> seed_sweep(const SweepRun& run, const std::vector<std::uint64_t>& seeds);
Json sweep_to_json(const std::map<std::string, MetricSummary>& report, const std::vector<std::uint64_t>& seeds);

}  // namespace unica
