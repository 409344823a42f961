#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "unica/backbone.hpp"
#include "unica/fusion.hpp"
#include "unica/homogenize.hpp"

namespace unica {

/// Intermediate values of one adapter forward, for interpretability.
struct AdapterTrace {
    Tensor pre_weights;   // [P, M] CAP weights of the past block, empty when absent
    Tensor post_weights;  // [P_f, M_known] CAP weights of the future block, empty when absent
    std::vector<Tensor> fusion_attention;  // per head, future block self-attention
    Tensor known_channels;                 // [T + H, M_known] unified covariates
    Tensor past_channels;                  // [T, M_past]
};

/// All trainable covariate-adaptation state around a frozen backbone:
/// categorical embeddings, homogenizers, static context, and the past and
/// future fusion blocks (or their weight-fusion baselines).
class Adapter {
public:
    Adapter() = default;
    Adapter(const Schema& schema, const BackboneConfig& backbone, const FusionConfig& cfg, std::uint64_t seed);

    const FusionConfig& config() const noexcept { return cfg_; }
    const Schema& schema() const noexcept { return schema_; }
    const ChannelRegistry& registry() const noexcept { return registry_; }
    std::uint64_t seed() const noexcept { return seed_; }

    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;

    // Normalised [H, K] quantiles, unsorted. `norm` receives the target
    // statistics used for the instance normalisation.
    Var forward(Tape& t, Backbone& backbone, const WindowData& w, Normalized* norm = nullptr,
                AdapterTrace* trace = nullptr);
    // Sorted quantiles in original units.
    Tensor forecast(Backbone& backbone, const WindowData& w, AdapterTrace* trace = nullptr);

    // Zeroes every GLU value path; the outer fusion gates are also frozen.
    void apply_gate_zero();

    std::string content_hash() const;
    Json to_json(const Backbone& backbone) const;
    // CompatibilityError when the checkpoint was trained against another backbone.
    static Adapter from_json(const Json& j, const Backbone& backbone);
    void save(const std::filesystem::path& path, const Backbone& backbone) const;
    static Adapter load(const std::filesystem::path& path, const Backbone& backbone);

private:
    Var apply_past(Tape& t, Var x, const CovariateTokens& tok, Var c, AdapterTrace* trace);
    Var apply_future(Tape& t, Var x, const CovariateTokens& tok, Var c, AdapterTrace* trace);

    Schema schema_;
    BackboneConfig backbone_cfg_;
    FusionConfig cfg_;
    ChannelRegistry registry_;
    std::uint64_t seed_ = 0;
    std::vector<CategoricalVocab> vocabs_;
    std::vector<Homogenizer> homogenizers_;
    StaticContext static_;
    bool has_past_ = false;
    bool has_future_ = false;
    PastFusion past_;
    FutureFusion future_;
    WeightFusion wf_past_;
    WeightFusion wf_future_;
};

}  // namespace unica
