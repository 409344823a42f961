#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "unica/adapter.hpp"
#include "unica/metrics.hpp"
#include "unica/split.hpp"
#include "unica/training.hpp"

namespace unica::cli {

struct DataBundle {
    std::string name;
    Dataset dataset;
    PreparedDataset prepared;
    Splits splits;
};

DataBundle make_bundle(std::string name, Dataset ds, SplitMode mode, double test_fraction);

// CompatibilityError when the dataset's context or horizon differ from the backbone's.
void check_compatible(const Dataset& ds, const Backbone& backbone);
// CompatibilityError when the adapter was built for another schema.
void check_compatible(const Schema& schema, const Adapter& adapter);

std::vector<EvalFrame> zero_shot_frames(Backbone& backbone, const PreparedDataset& pd, const std::vector<Window>& windows);
std::vector<EvalFrame> adapter_frames(Adapter& adapter, Backbone& backbone, const PreparedDataset& pd,
                                      const std::vector<Window>& windows);
std::vector<EvalFrame> naive_frames(const PreparedDataset& pd, const std::vector<Window>& windows, std::size_t levels);

struct ArmResult {
    std::string arm;
    MetricReport report;
    double val_loss = 0.0;  // best validation loss, zero-shot loss for untrained arms
    std::size_t epochs = 0;
    bool early_stopped = false;
};

struct AblationInput {
    const DataBundle* data = nullptr;
    Backbone* backbone = nullptr;  // frozen
    FusionConfig fusion;
    TrainConfig train;
    Aggregation aggregation = Aggregation::pooled;
    std::uint64_t seed = 42;
};

ArmResult run_zero_shot_arm(const std::string& arm, const AblationInput& in);
ArmResult run_adapter_arm(const std::string& arm, const AblationInput& in, const FusionConfig& fusion,
                          const DataBundle* data = nullptr);
ArmResult run_sft_arm(const std::string& arm, const AblationInput& in);

struct AblationResult {
    std::string mode;
    std::vector<ArmResult> arms;
    std::optional<double> delta;           // noise mode: noisy - clean average normalized metric
    std::optional<double> relative_delta;  // delta / clean

    Json to_json() const;
    std::string to_csv() const;
};

std::vector<std::string> ablation_modes();
// ConfigError on unknown modes.
void check_ablation_mode(const std::string& mode);
AblationResult run_ablation(const std::string& mode, const AblationInput& in);

// Shortest round-tripping decimal form, "" for non-finite values.
std::string format_number(double v);

}  // namespace unica::cli
