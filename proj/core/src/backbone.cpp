#include "unica/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "unica/errors.hpp"
#include "unica/optim.hpp"
#include "unica/preprocess.hpp"

namespace unica {

void BackboneConfig::validate() const {
    if (context == 0 || horizon == 0 || patch == 0 || d_model == 0 || layers == 0 || heads == 0)
        throw ConfigError("backbone config: context, horizon, patch, d_model, layers and heads must be positive");
    if (d_model % heads != 0) throw ConfigError("backbone config: d_model must be divisible by heads");
    if (levels.empty()) throw ConfigError("backbone config: at least one quantile level is required");
    for (std::size_t k = 0; k < levels.size(); ++k) {
        if (!(levels[k] > 0.0 && levels[k] < 1.0)) throw ConfigError("backbone config: quantile levels must lie in (0, 1)");
        if (k > 0 && !(levels[k] > levels[k - 1])) throw ConfigError("backbone config: quantile levels must be strictly increasing");
    }
}

std::size_t BackboneConfig::median_index() const {
    std::size_t best = 0;
    for (std::size_t k = 1; k < levels.size(); ++k)
        if (std::abs(levels[k] - 0.5) < std::abs(levels[best] - 0.5)) best = k;
    return best;
}

Json to_json(const BackboneConfig& c) {
    return Json{{"context", c.context}, {"horizon", c.horizon}, {"patch", c.patch}, {"d_model", c.d_model},
                {"layers", c.layers},   {"heads", c.heads},     {"levels", c.levels}};
}

BackboneConfig backbone_config_from_json(const Json& j) {
    if (!j.is_object()) throw ConfigError("backbone config must be a JSON object");
    BackboneConfig c;
    for (const auto& [key, v] : j.items()) {
        try {
            if (key == "context") c.context = v.get<std::size_t>();
            else if (key == "horizon") c.horizon = v.get<std::size_t>();
            else if (key == "patch") c.patch = v.get<std::size_t>();
            else if (key == "d_model") c.d_model = v.get<std::size_t>();
            else if (key == "layers") c.layers = v.get<std::size_t>();
            else if (key == "heads") c.heads = v.get<std::size_t>();
            else if (key == "levels") c.levels = v.get<std::vector<double>>();
            else throw ConfigError("backbone config: unknown field '" + key + "'");
        } catch (const Json::exception& e) {
            throw ConfigError("backbone config field '" + key + "': " + e.what());
        }
    }
    c.validate();
    return c;
}

Normalized instance_normalize(std::span<const double> x) {
    Normalized out;
    const double n = static_cast<double>(x.size());
    double mu = 0.0;
    for (double v : x) mu += v;
    mu /= n;
    double var = 0.0;
    for (double v : x) var += (v - mu) * (v - mu);
    var /= n;
    out.mu = mu;
    out.sigma = std::max(std::sqrt(var), kSigmaFloor);
    out.z.reserve(x.size());
    for (double v : x) out.z.push_back((v - mu) / out.sigma);
    return out;
}

std::vector<double> denormalize(std::span<const double> z, double mu, double sigma) {
    std::vector<double> out;
    out.reserve(z.size());
    for (double v : z) out.push_back(mu + sigma * v);
    return out;
}

Tokenizer::Tokenizer(std::size_t patch, std::size_t d, Rng& rng)
    : in("tokenizer.in", 2 * patch, d, rng), out("tokenizer.out", d, d, rng), res("tokenizer.res", 2 * patch, d, rng) {}

Var Tokenizer::operator()(Tape& t, Var patches) {
    return ops::add(res(t, patches), out(t, ops::silu(in(t, patches))));
}

void Tokenizer::collect(std::vector<Parameter*>& o) {
    in.collect(o);
    out.collect(o);
    res.collect(o);
}

EncoderBlock::EncoderBlock(const std::string& name, std::size_t d, std::size_t heads, Rng& rng)
    : ln1(name + ".ln1", d),
      attn(name + ".attn", d, heads, rng),
      ln2(name + ".ln2", d),
      fc1(name + ".fc1", d, 2 * d, rng),
      fc2(name + ".fc2", 2 * d, d, rng) {}

Var EncoderBlock::operator()(Tape& t, Var x, std::vector<Tensor>* weights) {
    x = ops::add(x, attn(t, ln1(t, x), weights));
    return ops::add(x, fc2(t, ops::silu(fc1(t, ln2(t, x)))));
}

void EncoderBlock::collect(std::vector<Parameter*>& o) {
    ln1.collect(o);
    attn.collect(o);
    ln2.collect(o);
    fc1.collect(o);
    fc2.collect(o);
}

Backbone::Backbone(const BackboneConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(derive_seed(seed, "backbone"));
    const std::size_t d = cfg_.d_model;
    tokenizer_ = Tokenizer(cfg_.patch, d, rng);
    Tensor pos({cfg_.num_patches(), d});
    for (double& v : pos.data()) v = rng.normal(0.0, 0.02);
    pos_ = Parameter("encoder.pos", std::move(pos));
    for (std::size_t l = 0; l < cfg_.layers; ++l)
        blocks_.emplace_back("encoder.blocks." + std::to_string(l), d, cfg_.heads, rng);
    predictor_ = Linear("predictor", cfg_.num_patches() * d, cfg_.horizon * cfg_.num_levels(), rng, true, 0.5);
    info_.seed = seed;
}

std::vector<Parameter*> Backbone::parameters() {
    std::vector<Parameter*> out;
    tokenizer_.collect(out);
    out.push_back(&pos_);
    for (auto& b : blocks_) b.collect(out);
    predictor_.collect(out);
    return out;
}

std::vector<const Parameter*> Backbone::parameters() const {
    auto ps = const_cast<Backbone*>(this)->parameters();
    return {ps.begin(), ps.end()};
}

Var Backbone::tokenize(Tape& t, Var values, const Tensor& mask) {
    return tokenizer_(t, ops::patchify(values, mask, cfg_.patch));
}

Var Backbone::tokenize_series(Tape& t, std::span<const double> values, std::span<const double> observed) {
    if (values.empty()) throw ContractError("tokenize: empty series");
    const auto nz = instance_normalize(values);
    const std::size_t n = values.size();
    Tensor mask;
    if (!observed.empty()) {
        if (observed.size() != n) throw DimensionError("tokenize: mask length differs from values");
        mask = Tensor({n, 1}, std::vector<double>(observed.begin(), observed.end()));
    }
    return tokenize(t, t.constant(Tensor({n, 1}, nz.z)), mask);
}

Var Backbone::encode(Tape& t, Var tokens, std::vector<Tensor>* weights) {
    const auto& v = tokens.value();
    if (v.rank() != 2 || v.cols() != cfg_.d_model || v.rows() == 0 || v.rows() > cfg_.num_patches())
        throw ContractError("encode: expected [P <= " + std::to_string(cfg_.num_patches()) + ", " +
                            std::to_string(cfg_.d_model) + "] tokens, got " + shape_str(v.shape()));
    Var pos = t.param(pos_);
    if (v.rows() != cfg_.num_patches()) pos = ops::slice_rows(pos, 0, v.rows());
    Var x = ops::add(tokens, pos);
    for (auto& b : blocks_) x = b(t, x, weights);
    return x;
}

Var Backbone::predict(Tape& t, Var states) {
    const auto& v = states.value();
    if (v.rank() != 2 || v.rows() != cfg_.num_patches() || v.cols() != cfg_.d_model)
        throw ContractError("predict: expected [" + std::to_string(cfg_.num_patches()) + ", " +
                            std::to_string(cfg_.d_model) + "] states, got " + shape_str(v.shape()));
    Var flat = ops::reshape(states, {1, cfg_.num_patches() * cfg_.d_model});
    return ops::reshape(predictor_(t, flat), {cfg_.horizon, cfg_.num_levels()});
}

Tensor finalize_quantiles(const Tensor& normalized, double mu, double sigma) {
    Tensor out = normalized;
    const std::size_t k = out.cols();
    for (std::size_t h = 0; h < out.rows(); ++h) {
        auto row = out.data().subspan(h * k, k);
        std::sort(row.begin(), row.end());
        for (double& q : row) q = mu + sigma * q;
    }
    return out;
}

Tensor Backbone::forecast(std::span<const double> history, std::span<const double> observed) {
    if (history.size() != cfg_.context)
        throw ContractError("forecast: history length " + std::to_string(history.size()) + " differs from context " +
                            std::to_string(cfg_.context));
    Tape t(false);
    const auto nz = instance_normalize(history);
    Var q = predict(t, encode(t, tokenize_series(t, history, observed)));
    return finalize_quantiles(q.value(), nz.mu, nz.sigma);
}

void Backbone::freeze() {
    for (auto* p : parameters()) p->frozen = true;
    frozen_ = true;
    frozen_hash_ = content_hash();
}

void Backbone::unfreeze() {
    for (auto* p : parameters()) p->frozen = false;
    frozen_ = false;
}

namespace {

Json params_json(const std::vector<const Parameter*>& ps) {
    Json out = Json::object();
    for (const auto* p : ps) out[p->name] = tensor_to_json(p->value);
    return out;
}

}  // namespace

std::string Backbone::content_hash() const {
    return sha256_hex(dump_stable(Json{{"config", unica::to_json(cfg_)}, {"params", params_json(parameters())}}));
}

Json Backbone::to_json() const {
    return Json{{"format_version", 1},
                {"kind", "backbone"},
                {"config", unica::to_json(cfg_)},
                {"content_hash", content_hash()},
                {"params", params_json(parameters())},
                {"pretrain",
                 {{"seed", info_.seed},
                  {"steps", info_.steps},
                  {"batch_size", info_.batch_size},
                  {"learning_rate", info_.learning_rate},
                  {"initial_loss", info_.initial_loss},
                  {"final_loss", info_.final_loss}}}};
}

Backbone Backbone::from_json(const Json& j) {
    try {
        if (j.at("format_version").get<int>() != 1) throw CompatibilityError("backbone checkpoint: unsupported format_version");
        if (j.at("kind").get<std::string>() != "backbone") throw CompatibilityError("checkpoint is not a backbone");
        Backbone b(backbone_config_from_json(j.at("config")), 0);
        const auto& params = j.at("params");
        for (auto* p : b.parameters()) {
            if (!params.contains(p->name)) throw CompatibilityError("backbone checkpoint: missing parameter " + p->name);
            Tensor v = tensor_from_json(params[p->name]);
            if (v.shape() != p->value.shape())
                throw CompatibilityError("backbone checkpoint: parameter " + p->name + " has shape " + shape_str(v.shape()));
            p->value = std::move(v);
            p->grad = Tensor(p->value.shape());
        }
        if (params.size() != b.parameters().size()) throw CompatibilityError("backbone checkpoint: unexpected parameters");
        if (j.contains("pretrain")) {
            const auto& pj = j["pretrain"];
            b.info_.seed = pj.value("seed", std::uint64_t{0});
            b.info_.steps = pj.value("steps", std::size_t{0});
            b.info_.batch_size = pj.value("batch_size", std::size_t{0});
            b.info_.learning_rate = pj.value("learning_rate", 0.0);
            b.info_.initial_loss = pj.value("initial_loss", 0.0);
            b.info_.final_loss = pj.value("final_loss", 0.0);
        }
        if (b.content_hash() != j.at("content_hash").get<std::string>())
            throw CompatibilityError("backbone checkpoint: content hash mismatch");
        return b;
    } catch (const Json::exception& e) {
        throw DataError(std::string("malformed backbone checkpoint: ") + e.what());
    } catch (const ConfigError& e) {
        throw CompatibilityError(std::string("backbone checkpoint: ") + e.what());
    }
}

void Backbone::save(const std::filesystem::path& path) const { write_json_file(path, to_json()); }

Backbone Backbone::load(const std::filesystem::path& path) { return from_json(read_json_file(path)); }

Backbone pretrain(const Dataset& corpus, const BackboneConfig& cfg, const PretrainConfig& pc) {
    if (pc.steps == 0 || pc.batch_size == 0 || !(pc.learning_rate > 0.0))
        throw ConfigError("pretrain: steps, batch_size and learning_rate must be positive");
    const PreparedDataset pd = prepare(corpus);
    const std::size_t T = cfg.context, H = cfg.horizon;
    std::vector<std::size_t> usable;
    for (std::size_t s = 0; s < pd.series.size(); ++s)
        if (pd.series[s].length() >= T + H) usable.push_back(s);
    if (usable.empty()) throw DataError("pretrain: no series long enough for context + horizon");

    Backbone model(cfg, pc.seed);
    Rng rng(derive_seed(pc.seed, "pretrain"));
    Adam adam(model.parameters());
    const std::size_t tail = std::min<std::size_t>(50, pc.steps);
    double tail_sum = 0.0;
    for (std::size_t step = 0; step < pc.steps; ++step) {
        adam.zero_grad();
        Tape tape;
        Var total;
        for (std::size_t b = 0; b < pc.batch_size; ++b) {
            const auto& ps = pd.series[usable[rng.index(usable.size())]];
            const std::size_t origin = T + rng.index(ps.length() - T - H + 1);
            std::span<const double> hist(ps.target.data() + origin - T, T);
            std::span<const double> obs(ps.target_observed.data() + origin - T, T);
            const auto nz = instance_normalize(hist);
            std::vector<double> y(H);
            for (std::size_t h = 0; h < H; ++h) y[h] = (ps.target[origin + h] - nz.mu) / nz.sigma;
            Var q = model.predict(tape, model.encode(tape, model.tokenize_series(tape, hist, obs)));
            Var l = ops::quantile_loss(q, y, cfg.levels);
            total = total.valid() ? ops::add(total, l) : l;
        }
        Var loss = ops::scale(total, 1.0 / static_cast<double>(pc.batch_size));
        const double lv = loss.value().item();
        if (!std::isfinite(lv)) throw TrainingError("pretrain: non-finite loss at step " + std::to_string(step));
        if (step == 0) model.info().initial_loss = lv;
        if (step + tail >= pc.steps) tail_sum += lv;
        tape.backward(loss);
        adam.step(pc.learning_rate);
    }
    model.info().seed = pc.seed;
    model.info().steps = pc.steps;
    model.info().batch_size = pc.batch_size;
    model.info().learning_rate = pc.learning_rate;
    model.info().final_loss = tail_sum / static_cast<double>(tail);
    return model;
}

}  // namespace unica
