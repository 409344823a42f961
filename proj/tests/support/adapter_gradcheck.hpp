#pragma once

#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "toy_data.hpp"
#include "unica/adapter.hpp"
#include "unica/gradcheck.hpp"
#include "unica/ops.hpp"

namespace unica::testing {

inline bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

inline bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

inline std::string parameter_class(const std::string& name) {
    if (starts_with(name, "homogenizer.")) return "homogenizer";
    if (starts_with(name, "embed.") || starts_with(name, "static.")) return "embeddings";
    if (name.find(".cap.affinity.") != std::string::npos) return "affinity_grn";
    if (name.find(".cap.value.") != std::string::npos) return "value_grn";
    if (starts_with(name, "past.glu.") || starts_with(name, "future.glu.")) return "glu";
    if (starts_with(name, "future.attn.") || starts_with(name, "future.norm.") || name == "future.type")
        return "post_attention";
    return "other";
}

// Coordinates whose exact gradient is zero: a key bias shifts every logit of
// a query equally, and per-channel standardisation removes a homogenizer bias.
inline bool structurally_zero(const std::string& name) {
    return ends_with(name, ".attn.k.b") || (starts_with(name, "homogenizer.") && ends_with(name, ".b"));
}

// Random values at the scale of the initialisation (fan-in scaled matrices).
inline void randomize_like_init(const std::vector<Parameter*>& params, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    for (auto* p : params) {
        const bool gain = ends_with(p->name, ".gamma");
        const double sd = ends_with(p->name, ".W") ? 1.0 / std::sqrt(static_cast<double>(p->value.rows()))
                          : p->value.rank() == 2   ? 1.0
                                                   : 0.2;
        for (auto& v : p->value.data()) v = gain ? 1.0 + 0.2 * g(rng) : sd * g(rng);
    }
}

struct ClassCheck {
    std::size_t parameters = 0;
    std::size_t coordinates = 0;
    double max_rel_error = 0.0;  // over coordinates with a non-vanishing gradient
    double max_abs_zero = 0.0;   // over structurally zero coordinates
};

struct AdapterGradCheck {
    std::map<std::string, ClassCheck> classes;
    double max_rel_error = 0.0;
    double max_abs_zero = 0.0;
};

// Two dynamic covariates (a known categorical and a future-known
// heterogeneous block) plus a static group; T = 32, H = 8, d = 16.
inline AdapterGradCheck run_adapter_gradcheck(std::uint64_t seed = 12) {
    ToyOptions o;
    o.known_cat_vocab = 3;
    o.het_known_dim = 3;
    o.static_cat_vocab = 2;
    const Dataset ds = toy_dataset(o);
    const PreparedDataset pd = prepare(ds);
    BackboneConfig bc;
    bc.context = 32;
    bc.horizon = 8;
    bc.patch = 8;
    bc.d_model = 16;
    bc.layers = 1;
    bc.heads = 2;
    Backbone backbone(bc, 10);
    backbone.freeze();
    FusionConfig fc;
    fc.heads = 2;
    Adapter adapter(ds.schema, bc, fc, 11);
    randomize_like_init(adapter.parameters(), seed);
    const WindowData w = make_window(pd, {0, 44});
    std::mt19937_64 rng(seed + 1);
    std::normal_distribution<double> g(0.0, 1.0);
    Tensor weights({bc.horizon, bc.num_levels()});
    for (auto& v : weights.data()) v = g(rng);
    auto f = [&](Tape& t) { return ops::sum(ops::mul(adapter.forward(t, backbone, w), t.constant(weights))); };

    AdapterGradCheck out;
    for (auto* p : adapter.parameters()) {
        const auto res = finite_diff_check(f, {p}, 3e-4, Stencil::central4);
        auto& c = out.classes[parameter_class(p->name)];
        ++c.parameters;
        c.coordinates += res.coordinates;
        if (structurally_zero(p->name)) {
            double a = res.max_abs_error;
            for (double v : p->grad.data()) a = std::max(a, std::abs(v));
            c.max_abs_zero = std::max(c.max_abs_zero, a);
        } else {
            c.max_rel_error = std::max(c.max_rel_error, res.max_rel_error);
        }
    }
    for (const auto& [name, c] : out.classes) {
        out.max_rel_error = std::max(out.max_rel_error, c.max_rel_error);
        out.max_abs_zero = std::max(out.max_abs_zero, c.max_abs_zero);
    }
    return out;
}

}  // namespace unica::testing
