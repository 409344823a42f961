#include "unica/adapter.hpp"

#include <set>

#include "unica/errors.hpp"

namespace unica {

Adapter::Adapter(const Schema& schema, const BackboneConfig& backbone, const FusionConfig& cfg, std::uint64_t seed)
    : schema_(schema), backbone_cfg_(backbone), cfg_(cfg), seed_(seed) {
    backbone_cfg_.validate();
    cfg_.validate(backbone_cfg_.d_model);
    registry_ = build_registry(schema_, cfg_.d_emb, cfg_.d_het);
    const std::size_t d = backbone_cfg_.d_model;
    Rng rng(derive_seed(seed, "adapter"));
    for (const auto& c : schema_.known_cat) vocabs_.emplace_back(c.name, c.vocab, cfg_.d_emb, rng);
    for (const auto& h : schema_.het) homogenizers_.emplace_back(h.name, cfg_.homogenizer, h.dim, cfg_.d_het, rng);
    static_ = StaticContext(schema_, d, rng);
    has_past_ = registry_.size() > 0;
    has_future_ = registry_.m_known() > 0;
    if (cfg_.mechanism == Mechanism::weight_fusion) {
        if (has_past_) wf_past_ = WeightFusion("past.weight", d, true);
        if (has_future_) wf_future_ = WeightFusion("future.weight", d, false);
    } else {
        if (has_past_) past_ = PastFusion(registry_.size(), d, rng);
        if (has_future_) future_ = FutureFusion(registry_.m_known(), d, cfg_.heads, rng);
    }
    if (cfg_.mechanism == Mechanism::gate_zero) apply_gate_zero();

    std::set<std::string> names;
    for (const auto* p : parameters())
        if (!names.insert(p->name).second) throw ConfigError("adapter: duplicate parameter name " + p->name);
}

std::vector<Parameter*> Adapter::parameters() {
    std::vector<Parameter*> out;
    for (auto& v : vocabs_) out.push_back(&v.embedding);
    for (auto& h : homogenizers_) h.collect(out);
    if (cfg_.use_static) static_.collect(out);
    if (cfg_.mechanism == Mechanism::weight_fusion) {
        if (has_past_) wf_past_.collect(out);
        if (has_future_) wf_future_.collect(out);
    } else {
        if (has_past_) past_.collect(out);
        if (has_future_) future_.collect(out);
    }
    return out;
}

std::vector<const Parameter*> Adapter::parameters() const {
    auto ps = const_cast<Adapter*>(this)->parameters();
    return {ps.begin(), ps.end()};
}

void Adapter::apply_gate_zero() {
    auto zero_grn = [](GRN& g) { g.glu.zero_value(); };
    if (has_past_ && cfg_.mechanism != Mechanism::weight_fusion) {
        zero_grn(past_.cap.affinity);
        zero_grn(past_.cap.value);
        past_.gate.zero_value();
        past_.gate.set_value_frozen(true);
    }
    if (has_future_ && cfg_.mechanism != Mechanism::weight_fusion) {
        zero_grn(future_.cap.affinity);
        zero_grn(future_.cap.value);
        future_.gate.zero_value();
        future_.gate.set_value_frozen(true);
    }
}

Var Adapter::apply_past(Tape& t, Var x, const CovariateTokens& tok, Var c, AdapterTrace* trace) {
    if (!has_past_ || tok.m_past == 0) return x;
    if (cfg_.mechanism == Mechanism::weight_fusion) return wf_past_(t, x, tok.past, tok.m_past);
    return pre_fuse(t, x, tok.past, tok.m_past, c, past_, trace ? &trace->pre_weights : nullptr);
}

Var Adapter::apply_future(Tape& t, Var x, const CovariateTokens& tok, Var c, AdapterTrace* trace) {
    if (!has_future_ || tok.m_future == 0) return x;
    if (cfg_.mechanism == Mechanism::weight_fusion) return wf_future_(t, x, tok.future, tok.m_future);
    return post_fuse(t, x, tok.future, tok.m_future, c, future_, trace ? &trace->post_weights : nullptr,
                     trace ? &trace->fusion_attention : nullptr);
}

Var Adapter::forward(Tape& t, Backbone& backbone, const WindowData& w, Normalized* norm, AdapterTrace* trace) {
    if (!(backbone.config().context == backbone_cfg_.context && backbone.config().horizon == backbone_cfg_.horizon &&
          backbone.config().d_model == backbone_cfg_.d_model && backbone.config().patch == backbone_cfg_.patch))
        throw CompatibilityError("adapter: backbone architecture differs from the one the adapter was built for");
    if (w.history.size() != backbone_cfg_.context || w.future.size() != backbone_cfg_.horizon)
        throw ContractError("adapter: window lengths differ from the backbone context/horizon");
    if (norm) *norm = instance_normalize(w.history);

    Var z = backbone.tokenize_series(t, w.history, w.history_observed);
    CovariateTokens tok;
    if (registry_.size() > 0) {
        const UnifiedCovariates cov = assemble(t, w, registry_, vocabs_, homogenizers_, schema_);
        if (trace) {
            if (cov.known.valid()) trace->known_channels = cov.known.value();
            if (cov.past.valid()) trace->past_channels = cov.past.value();
        }
        tok = tokenize_covariates(t, backbone, cov);
    }
    Var c = cfg_.use_static ? static_(t, w) : t.constant(Tensor({1, backbone_cfg_.d_model}));

    if (cfg_.past_position == Position::pre) z = apply_past(t, z, tok, c, trace);
    if (cfg_.future_position == Position::pre) z = apply_future(t, z, tok, c, trace);
    Var h = backbone.encode(t, z);
    if (cfg_.past_position == Position::post) h = apply_past(t, h, tok, c, trace);
    if (cfg_.future_position == Position::post) h = apply_future(t, h, tok, c, trace);
    return backbone.predict(t, h);
}

Tensor Adapter::forecast(Backbone& backbone, const WindowData& w, AdapterTrace* trace) {
    Tape t(false);
    Normalized nz;
    Var q = forward(t, backbone, w, &nz, trace);
    return finalize_quantiles(q.value(), nz.mu, nz.sigma);
}

namespace {

Json params_json(const std::vector<const Parameter*>& ps) {
    Json out = Json::object();
    for (const auto* p : ps) out[p->name] = tensor_to_json(p->value);
    return out;
}

}  // namespace

std::string Adapter::content_hash() const {
    return sha256_hex(dump_stable(Json{{"schema", unica::to_json(schema_)},
                                       {"fusion", unica::to_json(cfg_)},
                                       {"params", params_json(parameters())}}));
}

Json Adapter::to_json(const Backbone& backbone) const {
    return Json{{"format_version", 1},
                {"kind", "adapter"},
                {"backbone_hash", backbone.content_hash()},
                {"backbone_config", unica::to_json(backbone_cfg_)},
                {"schema", unica::to_json(schema_)},
                {"fusion", unica::to_json(cfg_)},
                {"seed", seed_},
                {"registry", registry_.to_json()},
                {"content_hash", content_hash()},
                {"params", params_json(parameters())}};
}

Adapter Adapter::from_json(const Json& j, const Backbone& backbone) {
    try {
        if (j.at("format_version").get<int>() != 1) throw CompatibilityError("adapter checkpoint: unsupported format_version");
        if (j.at("kind").get<std::string>() != "adapter") throw CompatibilityError("checkpoint is not an adapter");
        if (j.at("backbone_hash").get<std::string>() != backbone.content_hash())
            throw CompatibilityError("adapter checkpoint was trained against a different backbone (hash mismatch)");
        Adapter a(schema_from_json(j.at("schema")), backbone.config(), fusion_config_from_json(j.at("fusion")),
                  j.at("seed").get<std::uint64_t>());
        const auto& params = j.at("params");
        for (auto* p : a.parameters()) {
            if (!params.contains(p->name)) throw CompatibilityError("adapter checkpoint: missing parameter " + p->name);
            Tensor v = tensor_from_json(params[p->name]);
            if (v.shape() != p->value.shape())
                throw CompatibilityError("adapter checkpoint: parameter " + p->name + " has shape " + shape_str(v.shape()));
            p->value = std::move(v);
        }
        if (params.size() != a.parameters().size()) throw CompatibilityError("adapter checkpoint: unexpected parameters");
        if (a.content_hash() != j.at("content_hash").get<std::string>())
            throw CompatibilityError("adapter checkpoint: content hash mismatch");
        return a;
    } catch (const Json::exception& e) {
        throw DataError(std::string("malformed adapter checkpoint: ") + e.what());
    } catch (const ConfigError& e) {
        throw CompatibilityError(std::string("adapter checkpoint: ") + e.what());
    }
}

void Adapter::save(const std::filesystem::path& path, const Backbone& backbone) const {
    write_json_file(path, to_json(backbone));
}

Adapter Adapter::load(const std::filesystem::path& path, const Backbone& backbone) {
    return from_json(read_json_file(path), backbone);
}

}  // namespace unica
