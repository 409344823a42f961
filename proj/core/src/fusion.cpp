#include "unica/fusion.hpp"

#include "unica/errors.hpp"

namespace unica {

GLU::GLU(const std::string& name, std::size_t in, std::size_t out, Rng& rng)
    : gate(name + ".gate", in, out, rng, true, 0.1), value(name + ".value", in, out, rng) {
    zero_value();
}

Var GLU::operator()(Tape& t, Var x) { return ops::mul(ops::sigmoid(gate(t, x)), value(t, x)); }

void GLU::zero_value() {
    value.W.value.fill(0.0);
    value.b.value.fill(0.0);
}

void GLU::set_value_frozen(bool frozen) {
    value.W.frozen = frozen;
    value.b.frozen = frozen;
}

void GLU::collect(std::vector<Parameter*>& out) {
    gate.collect(out);
    value.collect(out);
}

GRN::GRN(const std::string& name, std::size_t in, std::size_t hidden, std::size_t out, std::size_t context, Rng& rng)
    : w2(name + ".w2", in, hidden, rng),
      w1(name + ".w1", hidden, hidden, rng),
      glu(name + ".glu", hidden, out, rng),
      norm(name + ".norm", out),
      conditional(context > 0),
      has_skip(in != out) {
    if (conditional) w3 = Linear(name + ".w3", context, hidden, rng, false);
    if (has_skip) skip = Linear(name + ".skip", in, out, rng);
}

Var GRN::operator()(Tape& t, Var a, Var c) {
    if (conditional && !c.valid()) throw ContractError(w2.W.name + ": conditional GRN called without context");
    Var pre = w2(t, a);
    if (conditional) pre = ops::add_bias(pre, w3(t, c));
    Var eta1 = w1(t, ops::elu(pre));
    Var res = has_skip ? skip(t, a) : a;
    return norm(t, ops::add(res, glu(t, eta1)));
}

void GRN::collect(std::vector<Parameter*>& out) {
    w2.collect(out);
    if (conditional) w3.collect(out);
    w1.collect(out);
    glu.collect(out);
    if (has_skip) skip.collect(out);
    norm.collect(out);
}

CAP::CAP(const std::string& name, std::size_t channels_, std::size_t d, Rng& rng)
    : affinity(name + ".affinity", channels_ * d, d, channels_, d, rng),
      value(name + ".value", d, d, d, 0, rng),
      channels(channels_) {
    if (channels_ == 0) throw ContractError(name + ": CAP needs at least one channel");
}

CAP::Out CAP::operator()(Tape& t, Var E, Var c) {
    const auto& ev = E.value();
    const std::size_t d = value.w2.in();
    if (ev.rank() != 2 || ev.cols() != d || ev.rows() % channels != 0)
        throw ContractError("CAP: expected [P * " + std::to_string(channels) + ", " + std::to_string(d) + "] tokens, got " +
                            shape_str(ev.shape()));
    const std::size_t P = ev.rows() / channels;
    Var flat = ops::reshape(E, {P, channels * d});
    Var w = ops::softmax_rows(affinity(t, flat, c));
    Var v = value(t, E);
    return Out{ops::pool_channels(w, v), w.value()};
}

void CAP::collect(std::vector<Parameter*>& out) {
    affinity.collect(out);
    value.collect(out);
}

StaticContext::StaticContext(const Schema& schema, std::size_t d, Rng& rng) : dim(d) {
    for (const auto& s : schema.static_cat) {
        tables.emplace_back(s.name, s.vocab, d, rng);
        tables.back().embedding.name = "static." + s.name;
    }
    for (const auto& s : schema.static_real) reals.emplace_back("static." + s.name, 1, d, rng);
}

Var StaticContext::operator()(Tape& t, const WindowData& w) {
    if (tables.empty() && reals.empty()) return t.constant(Tensor({1, dim}));
    if (w.static_cat.size() != tables.size() || w.static_real.size() != reals.size())
        throw DataError("static context: window does not match the adapter schema");
    std::vector<Var> rows;
    for (std::size_t i = 0; i < tables.size(); ++i)
        rows.push_back(embed_categorical(t, std::span<const std::size_t>(&w.static_cat[i], 1), tables[i]));
    for (std::size_t i = 0; i < reals.size(); ++i)
        rows.push_back(reals[i](t, t.constant(Tensor({1, 1}, std::vector<double>{w.static_real[i]}))));
    return rows.size() == 1 ? rows[0] : ops::mean_rows(ops::concat_rows(rows));
}

void StaticContext::collect(std::vector<Parameter*>& out) {
    for (auto& v : tables) out.push_back(&v.embedding);
    for (auto& l : reals) l.collect(out);
}

std::string to_string(Position p) { return p == Position::pre ? "pre" : "post"; }

std::string to_string(Mechanism m) {
    switch (m) {
        case Mechanism::unica: return "unica";
        case Mechanism::weight_fusion: return "weight_fusion";
        case Mechanism::gate_zero: return "gate_zero";
    }
    return "unica";
}

Position parse_position(std::string_view s) {
    if (s == "pre") return Position::pre;
    if (s == "post") return Position::post;
    throw ConfigError("unknown fusion position '" + std::string(s) + "'");
}

Mechanism parse_mechanism(std::string_view s) {
    if (s == "unica") return Mechanism::unica;
    if (s == "weight_fusion") return Mechanism::weight_fusion;
    if (s == "gate_zero") return Mechanism::gate_zero;
    throw ConfigError("unknown fusion mechanism '" + std::string(s) + "'");
}

void FusionConfig::validate(std::size_t d_model) const {
    if (heads == 0 || d_model % heads != 0) throw ConfigError("fusion config: heads must divide d_model");
    if (d_het == 0 || d_emb == 0) throw ConfigError("fusion config: d_het and d_emb must be positive");
}

Json to_json(const FusionConfig& c) {
    return Json{{"past_position", to_string(c.past_position)},
                {"future_position", to_string(c.future_position)},
                {"mechanism", to_string(c.mechanism)},
                {"heads", c.heads},
                {"use_static", c.use_static},
                {"homogenizer", to_string(c.homogenizer)},
                {"d_het", c.d_het},
                {"d_emb", c.d_emb}};
}

FusionConfig fusion_config_from_json(const Json& j) {
    if (!j.is_object()) throw ConfigError("fusion config must be a JSON object");
    FusionConfig c;
    for (const auto& [key, v] : j.items()) {
        try {
            if (key == "past_position") c.past_position = parse_position(v.get<std::string>());
            else if (key == "future_position") c.future_position = parse_position(v.get<std::string>());
            else if (key == "mechanism") c.mechanism = parse_mechanism(v.get<std::string>());
            else if (key == "heads") c.heads = v.get<std::size_t>();
            else if (key == "use_static") c.use_static = v.get<bool>();
            else if (key == "homogenizer") c.homogenizer = parse_homogenizer(v.get<std::string>());
            else if (key == "d_het") c.d_het = v.get<std::size_t>();
            else if (key == "d_emb") c.d_emb = v.get<std::size_t>();
            else throw ConfigError("fusion config: unknown field '" + key + "'");
        } catch (const Json::exception& e) {
            throw ConfigError("fusion config field '" + key + "': " + e.what());
        }
    }
    return c;
}

CovariateTokens tokenize_covariates(Tape& t, Backbone& backbone, const UnifiedCovariates& cov) {
    const std::size_t T = backbone.config().context, H = backbone.config().horizon;
    CovariateTokens out;
    std::vector<Var> history;
    if (cov.known.valid()) {
        if (cov.known.value().rows() != T + H) throw ContractError("tokenize_covariates: known block must span T + H rows");
        Var kn = ops::standardize_columns(cov.known, T);
        history.push_back(ops::slice_rows(kn, 0, T));
        out.future = backbone.tokenize(t, ops::slice_rows(kn, T, H));
        out.m_future = cov.known.value().cols();
    }
    if (cov.past.valid()) {
        if (cov.past.value().rows() != T) throw ContractError("tokenize_covariates: past block must span T rows");
        history.push_back(ops::standardize_columns(cov.past, T));
    }
    if (!history.empty()) {
        Var h = history.size() == 1 ? history[0] : ops::concat_cols(history);
        out.m_past = h.value().cols();
        out.past = backbone.tokenize(t, h);
    }
    return out;
}

PastFusion::PastFusion(std::size_t channels, std::size_t d, Rng& rng)
    : cap("past.cap", channels, d, rng), gate("past.glu", d, d, rng) {}

Var PastFusion::operator()(Tape& t, Var x, Var E, Var c, Tensor* weights) {
    auto r = cap(t, E, c);
    if (r.pooled.value().shape() != x.value().shape())
        throw ContractError("pre_fuse: pooled covariates " + shape_str(r.pooled.value().shape()) + " vs tokens " +
                            shape_str(x.value().shape()));
    if (weights) *weights = r.weights;
    return ops::add(x, gate(t, r.pooled));
}

void PastFusion::collect(std::vector<Parameter*>& out) {
    cap.collect(out);
    gate.collect(out);
}

FutureFusion::FutureFusion(std::size_t channels, std::size_t d, std::size_t heads, Rng& rng)
    : cap("future.cap", channels, d, rng),
      norm("future.norm", d),
      attn("future.attn", d, heads, rng),
      gate("future.glu", d, d, rng) {
    Tensor te({2, d});
    for (double& v : te.data()) v = rng.normal(0.0, 0.02);
    type_embedding = Parameter("future.type", std::move(te));
}

Var FutureFusion::operator()(Tape& t, Var x, Var E, Var c, Tensor* cap_weights, std::vector<Tensor>* attn_weights) {
    const std::size_t P = x.value().rows();
    auto r = cap(t, E, c);
    if (r.pooled.value().cols() != x.value().cols()) throw ContractError("post_fuse: width mismatch");
    if (cap_weights) *cap_weights = r.weights;
    const std::size_t Pf = r.pooled.value().rows();
    std::vector<std::size_t> ids(P + Pf, 0);
    for (std::size_t i = P; i < P + Pf; ++i) ids[i] = 1;
    Var seq = ops::add(ops::concat_rows({x, r.pooled}), ops::gather_rows(t.param(type_embedding), ids));
    Var s = attn(t, norm(t, seq), attn_weights);
    return ops::add(x, gate(t, ops::slice_rows(s, 0, P)));
}

void FutureFusion::collect(std::vector<Parameter*>& out) {
    cap.collect(out);
    out.push_back(&type_embedding);
    norm.collect(out);
    attn.collect(out);
    gate.collect(out);
}

WeightFusion::WeightFusion(const std::string& name, std::size_t d, bool per_token_) : per_token(per_token_) {
    map.W = Parameter(name + ".W", Tensor({d, d}));
    map.b = Parameter(name + ".b", Tensor({d}));
}

Var WeightFusion::operator()(Tape& t, Var x, Var E, std::size_t channels) {
    if (per_token) {
        const std::size_t P = E.value().rows() / channels;
        Var w = t.constant(Tensor({P, channels}, 1.0 / static_cast<double>(channels)));
        Var mean = ops::pool_channels(w, E);
        if (mean.value().shape() != x.value().shape()) throw ContractError("weight_fusion: token count mismatch");
        return ops::add(x, map(t, mean));
    }
    return ops::add_bias(x, map(t, ops::mean_rows(E)));
}

void WeightFusion::collect(std::vector<Parameter*>& out) { map.collect(out); }

Var pre_fuse(Tape& t, Var Z, const Var& E_past, std::size_t m_past, Var c, PastFusion& f, Tensor* weights) {
    if (m_past == 0 || !E_past.valid()) return Z;
    return f(t, Z, E_past, c, weights);
}

Var post_fuse(Tape& t, Var H, const Var& E_fut, std::size_t m_future, Var c, FutureFusion& f, Tensor* cap_weights,
              std::vector<Tensor>* attn) {
    if (m_future == 0 || !E_fut.valid()) return H;
    return f(t, H, E_fut, c, cap_weights, attn);
}

}  // namespace unica
