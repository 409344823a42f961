#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "unica/dataset.hpp"
#include "unica/json_io.hpp"
#include "unica/layers.hpp"
#include "unica/preprocess.hpp"

namespace unica {

struct CategoricalVocab {
    std::string name;
    std::size_t size = 0;
    Parameter embedding;  // [size, d_emb]

    CategoricalVocab() = default;
    CategoricalVocab(const std::string& name, std::size_t size, std::size_t d_emb, Rng& rng);
    std::size_t dim() const { return embedding.value.cols(); }
};

// Row t is the embedding of ids[t]; DataError naming the covariate when an
// id is out of range.
Var embed_categorical(Tape& t, std::span<const std::size_t> ids, CategoricalVocab& vocab);

enum class HomogenizerKind { linear, mlp };

std::string to_string(HomogenizerKind k);
HomogenizerKind parse_homogenizer(std::string_view s);

/// Covariate homogenizer: D -> d_het, either one affine map or
/// affine -> ELU -> affine with hidden width d_het.
struct Homogenizer {
    std::string name;
    HomogenizerKind kind = HomogenizerKind::linear;
    Linear first;
    Linear second;  // mlp only

    Homogenizer() = default;
    Homogenizer(const std::string& name, HomogenizerKind kind, std::size_t in, std::size_t out, Rng& rng);

    std::size_t in() const { return first.in(); }
    std::size_t out() const { return kind == HomogenizerKind::linear ? first.out() : second.out(); }
    // features [n, D] -> [n, d_het]; ContractError on width mismatch.
    Var operator()(Tape& t, Var features);
    void collect(std::vector<Parameter*>& out);
};

struct ChannelInfo {
    std::string source;  // covariate name (time features are "time:<feature>")
    std::string kind;    // real, time, indicator, categorical, heterogeneous
    std::size_t sub = 0;  // channel index within the source
    bool future_known = false;
};

/// Column bookkeeping of the unified covariate block. Known columns are
/// numbered first, past-only columns continue after them.
struct ChannelRegistry {
    std::vector<ChannelInfo> known;
    std::vector<ChannelInfo> past;

    std::size_t m_known() const noexcept { return known.size(); }
    std::size_t m_past() const noexcept { return past.size(); }
    std::size_t size() const noexcept { return known.size() + past.size(); }
    const ChannelInfo& at(std::size_t column) const;
    Json to_json() const;
};

ChannelRegistry build_registry(const Schema& schema, std::size_t d_emb, std::size_t d_het);

struct UnifiedCovariates {
    Var known;  // [T + H, M_known]; invalid when M_known = 0
    Var past;   // [T, M_past]; invalid when M_past = 0
};

// Stacks known reals + time features, categorical embeddings and future-known
// homogenized features into the known block; past reals + indicators and
// past-only homogenized features into the past block. Never reads the target.
UnifiedCovariates assemble(Tape& t, const WindowData& w, const ChannelRegistry& registry,
                           std::vector<CategoricalVocab>& vocabs, std::vector<Homogenizer>& homogenizers,
                           const Schema& schema);

}  // namespace unica
