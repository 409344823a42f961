#include "unica/homogenize.hpp"

#include "unica/errors.hpp"

namespace unica {

CategoricalVocab::CategoricalVocab(const std::string& name_, std::size_t size_, std::size_t d_emb, Rng& rng)
    : name(name_), size(size_) {
    Tensor table({size_, d_emb});
    for (double& v : table.data()) v = rng.normal();
    embedding = Parameter("embed." + name_, std::move(table));
}

Var embed_categorical(Tape& t, std::span<const std::size_t> ids, CategoricalVocab& vocab) {
    for (auto id : ids)
        if (id >= vocab.size)
            throw DataError("categorical covariate '" + vocab.name + "': id " + std::to_string(id) +
                            " outside vocabulary of size " + std::to_string(vocab.size));
    return ops::gather_rows(t.param(vocab.embedding), ids);
}

std::string to_string(HomogenizerKind k) { return k == HomogenizerKind::linear ? "linear" : "mlp"; }

HomogenizerKind parse_homogenizer(std::string_view s) {
    if (s == "linear") return HomogenizerKind::linear;
    if (s == "mlp") return HomogenizerKind::mlp;
    throw ConfigError("unknown homogenizer structure '" + std::string(s) + "'");
}

Homogenizer::Homogenizer(const std::string& name_, HomogenizerKind kind_, std::size_t in, std::size_t out, Rng& rng)
    : name(name_), kind(kind_) {
    if (in == 0 || out == 0) throw ConfigError("homogenizer '" + name_ + "': widths must be positive");
    first = Linear("homogenizer." + name_ + ".first", in, out, rng);
    if (kind == HomogenizerKind::mlp) second = Linear("homogenizer." + name_ + ".second", out, out, rng);
}

Var Homogenizer::operator()(Tape& t, Var features) {
    const auto& v = features.value();
    if (v.rank() != 2 || v.cols() != in())
        throw ContractError("homogenizer '" + name + "': expected width " + std::to_string(in()) + ", got " +
                            shape_str(v.shape()));
    Var h = first(t, features);
    if (kind == HomogenizerKind::mlp) h = second(t, ops::elu(h));
    return h;
}

void Homogenizer::collect(std::vector<Parameter*>& out) {
    first.collect(out);
    if (kind == HomogenizerKind::mlp) second.collect(out);
}

const ChannelInfo& ChannelRegistry::at(std::size_t column) const {
    if (column < known.size()) return known[column];
    if (column < size()) return past[column - known.size()];
    throw ContractError("channel registry: column " + std::to_string(column) + " out of range");
}

Json ChannelRegistry::to_json() const {
    Json cols = Json::array();
    for (std::size_t c = 0; c < size(); ++c) {
        const auto& ch = at(c);
        cols.push_back({{"column", c},
                        {"block", c < known.size() ? "known" : "past"},
                        {"source", ch.source},
                        {"kind", ch.kind},
                        {"sub", ch.sub}});
    }
    return cols;
}

ChannelRegistry build_registry(const Schema& schema, std::size_t d_emb, std::size_t d_het) {
    if (d_emb == 0 || d_het == 0) throw ConfigError("registry: d_emb and d_het must be positive");
    ChannelRegistry r;
    for (const auto& n : known_real_channels(schema))
        r.known.push_back({n, n.rfind("time:", 0) == 0 ? "time" : "real", 0, true});
    for (const auto& c : schema.known_cat)
        for (std::size_t k = 0; k < d_emb; ++k) r.known.push_back({c.name, "categorical", k, true});
    for (const auto& h : schema.het)
        if (h.future_known)
            for (std::size_t k = 0; k < d_het; ++k) r.known.push_back({h.name, "heterogeneous", k, true});
    for (const auto& n : past_real_channels(schema))
        r.past.push_back({n, n.rfind("missing:", 0) == 0 ? "indicator" : "real", 0, false});
    for (const auto& h : schema.het)
        if (!h.future_known)
            for (std::size_t k = 0; k < d_het; ++k) r.past.push_back({h.name, "heterogeneous", k, false});
    return r;
}

UnifiedCovariates assemble(Tape& t, const WindowData& w, const ChannelRegistry& registry,
                           std::vector<CategoricalVocab>& vocabs, std::vector<Homogenizer>& homogenizers,
                           const Schema& schema) {
    if (vocabs.size() != schema.known_cat.size() || homogenizers.size() != schema.het.size() ||
        w.known_cat.size() != schema.known_cat.size() || w.het.size() != schema.het.size())
        throw DataError("assemble: window does not match the adapter schema");
    std::vector<Var> known, past;
    if (w.known_real.cols() > 0) known.push_back(t.constant(w.known_real));
    for (std::size_t i = 0; i < vocabs.size(); ++i) known.push_back(embed_categorical(t, w.known_cat[i], vocabs[i]));
    for (std::size_t i = 0; i < schema.het.size(); ++i) {
        Var h = homogenizers[i](t, t.constant(w.het[i]));
        (schema.het[i].future_known ? known : past).push_back(h);
    }
    if (w.past_real.cols() > 0) past.insert(past.begin(), t.constant(w.past_real));

    UnifiedCovariates out;
    if (!known.empty()) out.known = known.size() == 1 ? known[0] : ops::concat_cols(known);
    if (!past.empty()) out.past = past.size() == 1 ? past[0] : ops::concat_cols(past);
    const std::size_t mk = out.known.valid() ? out.known.value().cols() : 0;
    const std::size_t mp = out.past.valid() ? out.past.value().cols() : 0;
    if (mk != registry.m_known() || mp != registry.m_past())
        throw DataError("assemble: window yields " + std::to_string(mk) + "+" + std::to_string(mp) +
                        " channels, registry expects " + std::to_string(registry.m_known()) + "+" +
                        std::to_string(registry.m_past()));
    return out;
}

}  // namespace unica
