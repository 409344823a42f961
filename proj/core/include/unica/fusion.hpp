#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "unica/backbone.hpp"
#include "unica/homogenize.hpp"
#include "unica/layers.hpp"

namespace unica {

/// sigmoid(x W4 + b4) * (x W5 + b5). The value path starts at zero so a
/// fresh gate contributes nothing.
struct GLU {
    Linear gate;   // W4, b4
    Linear value;  // W5, b5

    GLU() = default;
    GLU(const std::string& name, std::size_t in, std::size_t out, Rng& rng);

    Var operator()(Tape& t, Var x);
    void zero_value();
    void set_value_frozen(bool frozen);
    void collect(std::vector<Parameter*>& out);
};

/// eta2 = ELU(a W2 + b2 + c W3), eta1 = eta2 W1 + b1,
/// out = LayerNorm(residual(a) + GLU(eta1)).
/// The residual is the identity when in == out, a learned map otherwise.
struct GRN {
    Linear w2;
    Linear w3;  // conditional only, no bias
    Linear w1;
    GLU glu;
    Linear skip;  // only when in != out
    LayerNorm norm;
    bool conditional = false;
    bool has_skip = false;

    GRN() = default;
    GRN(const std::string& name, std::size_t in, std::size_t hidden, std::size_t out, std::size_t context, Rng& rng);

    // a [n, in]; c [1, context] is broadcast over rows. ContractError when a
    // conditional GRN gets no context.
    Var operator()(Tape& t, Var a, Var c = Var());
    void collect(std::vector<Parameter*>& out);
};

/// Conditional attention pooling over M channels of d-dim tokens.
struct CAP {
    GRN affinity;  // [M d] + context d -> M
    GRN value;     // d -> d, shared across channels
    std::size_t channels = 0;

    struct Out {
        Var pooled;      // [P, d]
        Tensor weights;  // [P, M], rows on the simplex
    };

    CAP() = default;
    CAP(const std::string& name, std::size_t channels, std::size_t d, Rng& rng);

    // E [P * M, d] token-major, c [1, d].
    Out operator()(Tape& t, Var E, Var c);
    void collect(std::vector<Parameter*>& out);
};

/// Mean of per-static-covariate embeddings rho (table lookups for
/// categoricals, 1 -> d maps for reals); a zero vector without statics.
struct StaticContext {
    std::vector<CategoricalVocab> tables;
    std::vector<Linear> reals;
    std::size_t dim = 0;

    StaticContext() = default;
    StaticContext(const Schema& schema, std::size_t d, Rng& rng);

    Var operator()(Tape& t, const WindowData& w);
    void collect(std::vector<Parameter*>& out);
};

enum class Position { pre, post };
enum class Mechanism { unica, weight_fusion, gate_zero };

std::string to_string(Position p);
std::string to_string(Mechanism m);
Position parse_position(std::string_view s);
Mechanism parse_mechanism(std::string_view s);

struct FusionConfig {
    Position past_position = Position::pre;
    Position future_position = Position::post;
    Mechanism mechanism = Mechanism::unica;
    std::size_t heads = 4;
    bool use_static = true;
    HomogenizerKind homogenizer = HomogenizerKind::linear;
    std::size_t d_het = 4;
    std::size_t d_emb = 4;

    void validate(std::size_t d_model) const;  // ConfigError
};

Json to_json(const FusionConfig& c);
FusionConfig fusion_config_from_json(const Json& j);

/// Covariate tokens: each channel standardised by its own history
/// statistics, then run through the frozen tokenizer.
struct CovariateTokens {
    Var past;    // [P * M, d] over the history of known and past-only channels; invalid if M = 0
    Var future;  // [P_f * M_known, d] over the horizon of known channels; invalid if M_known = 0
    std::size_t m_past = 0;
    std::size_t m_future = 0;
};

CovariateTokens tokenize_covariates(Tape& t, Backbone& backbone, const UnifiedCovariates& cov);

/// X + GLU(CAP(E_past, c)).
struct PastFusion {
    CAP cap;
    GLU gate;

    PastFusion() = default;
    PastFusion(std::size_t channels, std::size_t d, Rng& rng);
    Var operator()(Tape& t, Var x, Var E, Var c, Tensor* weights = nullptr);
    void collect(std::vector<Parameter*>& out);
};

/// S = SelfAttn(LN([X; CAP(E_fut, c)] + type)), X + GLU(S[0..P]).
struct FutureFusion {
    CAP cap;
    Parameter type_embedding;  // [2, d]: history, future
    LayerNorm norm;
    MultiHeadAttention attn;
    GLU gate;

    FutureFusion() = default;
    FutureFusion(std::size_t channels, std::size_t d, std::size_t heads, Rng& rng);
    Var operator()(Tape& t, Var x, Var E, Var c, Tensor* cap_weights = nullptr, std::vector<Tensor>* attn = nullptr);
    void collect(std::vector<Parameter*>& out);
};

/// Linear baseline: X + Linear(channel mean per token) for the past block,
/// X + Linear(mean over every future token and channel) for the future block.
struct WeightFusion {
    Linear map;
    bool per_token = true;

    WeightFusion() = default;
    WeightFusion(const std::string& name, std::size_t d, bool per_token);
    Var operator()(Tape& t, Var x, Var E, std::size_t channels);
    void collect(std::vector<Parameter*>& out);
};

// Free-function forms of the two fusion steps.
Var pre_fuse(Tape& t, Var Z, const Var& E_past, std::size_t m_past, Var c, PastFusion& f, Tensor* weights = nullptr);
Var post_fuse(Tape& t, Var H, const Var& E_fut, std::size_t m_future, Var c, FutureFusion& f,
              Tensor* cap_weights = nullptr, std::vector<Tensor>* attn = nullptr);

}  // namespace unica
