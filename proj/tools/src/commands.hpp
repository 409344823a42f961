#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace unica::cli {

struct Options {
    std::filesystem::path config;
    std::filesystem::path out;
    std::optional<std::uint64_t> seed;  // overrides every seed in the config
};

// Each command writes its outputs and a resolved config under opts.out.
void cmd_synth(const Options& opts);
void cmd_pretrain(const Options& opts);
void cmd_adapt(const Options& opts, const std::optional<std::string>& mechanism);
void cmd_forecast(const Options& opts);
void cmd_eval(const Options& opts);
void cmd_ablate(const Options& opts, const std::optional<std::string>& mode);
void cmd_attn_dump(const Options& opts);
void cmd_seed_sweep(const Options& opts);

// Full command-line entry point; returns the process exit code.
int run(int argc, char** argv);

}  // namespace unica::cli
