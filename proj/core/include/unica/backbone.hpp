#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "unica/dataset.hpp"
#include "unica/json_io.hpp"
#include "unica/layers.hpp"
#include "unica/tape.hpp"

namespace unica {

struct BackboneConfig {
    std::size_t context = 96;
    std::size_t horizon = 24;
    std::size_t patch = 8;
    std::size_t d_model = 32;
    std::size_t layers = 2;
    std::size_t heads = 4;
    std::vector<double> levels{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

    void validate() const;  // ConfigError
    std::size_t num_patches() const { return (context + patch - 1) / patch; }
    std::size_t future_patches() const { return (horizon + patch - 1) / patch; }
    std::size_t num_levels() const { return levels.size(); }
    // Column of the 0.5 level, or of the level closest to it.
    std::size_t median_index() const;
};

Json to_json(const BackboneConfig& c);
BackboneConfig backbone_config_from_json(const Json& j);

struct Normalized {
    std::vector<double> z;
    double mu = 0.0;
    double sigma = 1.0;
};

// mu = mean, sigma = max(population std, 1e-6).
Normalized instance_normalize(std::span<const double> x);
std::vector<double> denormalize(std::span<const double> z, double mu, double sigma);

/// Patch-based residual MLP: [patch values | patch mask] (2p) -> d.
struct Tokenizer {
    Linear in, out, res;

    Tokenizer() = default;
    Tokenizer(std::size_t patch, std::size_t d, Rng& rng);
    // patches [N, 2p] -> tokens [N, d]
    Var operator()(Tape& t, Var patches);
    void collect(std::vector<Parameter*>& out);
};

struct EncoderBlock {
    LayerNorm ln1;
    MultiHeadAttention attn;
    LayerNorm ln2;
    Linear fc1, fc2;

    EncoderBlock() = default;
    EncoderBlock(const std::string& name, std::size_t d, std::size_t heads, Rng& rng);
    Var operator()(Tape& t, Var x, std::vector<Tensor>* weights);
    void collect(std::vector<Parameter*>& out);
};

struct PretrainInfo {
    std::uint64_t seed = 0;
    std::size_t steps = 0;
    std::size_t batch_size = 0;
    double learning_rate = 0.0;
    double initial_loss = 0.0;
    double final_loss = 0.0;
};

/// Toy pretrained forecaster: tokenizer -> encoder -> predictor.
class Backbone {
public:
    Backbone() = default;
    Backbone(const BackboneConfig& cfg, std::uint64_t seed);

    const BackboneConfig& config() const noexcept { return cfg_; }
    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;

    // Standardised values [n, C] with optional observed mask -> tokens
    // [ceil(n/p) * C, d], token-major.
    Var tokenize(Tape& t, Var values, const Tensor& mask = Tensor());
    // Instance-normalises one channel and tokenises it: [ceil(n/p), d].
    Var tokenize_series(Tape& t, std::span<const double> values, std::span<const double> observed);
    // tokens [P, d] -> states [P, d]. Appends per-head attention when given.
    Var encode(Tape& t, Var tokens, std::vector<Tensor>* weights = nullptr);
    // states [P, d] -> normalised quantiles [H, K], unsorted.
    Var predict(Tape& t, Var states);

    // Full zero-shot forecast in original units, rows sorted ascending.
    Tensor forecast(std::span<const double> history, std::span<const double> observed = {});

    void freeze();
    void unfreeze();
    bool frozen() const noexcept { return frozen_; }
    // SHA-256 over config and parameter bytes.
    std::string content_hash() const;
    // Hash recorded by the last freeze().
    const std::string& frozen_hash() const noexcept { return frozen_hash_; }

    PretrainInfo& info() noexcept { return info_; }
    const PretrainInfo& info() const noexcept { return info_; }

    Json to_json() const;
    static Backbone from_json(const Json& j);  // CompatibilityError on hash or shape mismatch
    void save(const std::filesystem::path& path) const;
    static Backbone load(const std::filesystem::path& path);

private:
    BackboneConfig cfg_;
    Tokenizer tokenizer_;
    Parameter pos_;
    std::vector<EncoderBlock> blocks_;
    Linear predictor_;
    bool frozen_ = false;
    std::string frozen_hash_;
    PretrainInfo info_;
};

// Sorts each row ascending and maps mu + sigma * q.
Tensor finalize_quantiles(const Tensor& normalized, double mu, double sigma);

struct PretrainConfig {
    std::size_t steps = 2000;
    std::size_t batch_size = 16;
    double learning_rate = 1e-3;
    std::uint64_t seed = 42;
};

// Mean quantile loss on univariate windows sampled uniformly from the corpus;
// covariates are ignored. Records initial and final loss in info().
// DataError when no series can host a context + horizon window.
Backbone pretrain(const Dataset& corpus, const BackboneConfig& cfg, const PretrainConfig& pc);

}  // namespace unica
